#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sgr/morton.hpp"
#include "sgr/neighbors.hpp"
#include "sgr/normals.hpp"

namespace sgr {

/// psi = 1 - 2 zeta / pi, zeta the angle between the lines spanned by a
/// and b (so psi(a, b) == psi(a, -b)). The angle is taken as
/// atan2(|a x b|, |a . b|), which equals arccos(|cos|) but stays accurate
/// near parallel vectors.
inline double angular_similarity(const Vec3& a, const Vec3& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0)
    throw Error("angular similarity: zero-length vector");
  const double zeta = std::atan2(norm(cross(a, b)), std::abs(dot(a, b)));
  return 1.0 - 2.0 * zeta / std::numbers::pi;
}

struct SimilarityStats {
  double mean = 0, stddev = 0, skewness = 0, kurtosis = 0, entropy = 0;

  std::array<double, 5> as_array() const {
    return {mean, stddev, skewness, kurtosis, entropy};
  }
};

inline constexpr std::size_t kEntropyBins = 8;

/// Mean, population sd, skewness, raw kurtosis and 8-bin entropy (bits) on
/// [0, 1]. A zero sd yields zero skewness and kurtosis.
inline SimilarityStats similarity_statistics(std::span<const double> psi) {
  const std::size_t n = psi.size();
  if (n < 2) throw Error("similarity statistics: need at least 2 values");
  SimilarityStats s;
  for (double v : psi) s.mean += v;
  s.mean /= double(n);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : psi) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= double(n);
  m3 /= double(n);
  m4 /= double(n);
  s.stddev = std::sqrt(m2);
  if (s.stddev <= 1e-12 * std::max(1.0, std::abs(s.mean))) {
    s.stddev = 0.0;
  } else {
    s.skewness = m3 / (m2 * s.stddev);
    s.kurtosis = m4 / (m2 * m2);
  }
  std::array<std::size_t, kEntropyBins> bins{};
  for (double v : psi) {
    const double c = std::clamp(v, 0.0, 1.0) * double(kEntropyBins);
    bins[std::min<std::size_t>(kEntropyBins - 1, std::size_t(c))]++;
  }
  for (std::size_t b : bins) {
    if (b == 0) continue;
    const double p = double(b) / double(n);
    s.entropy -= p * std::log2(p);
  }
  return s;
}

enum class AngularPooling { literal, per_point };

/// Five statistics of the similarity matrix between every point's normal
/// and the normals of its k_sim nearest neighbours (first k_sim entries of
/// the table rows).
inline SimilarityStats angular_scale_statistics(
    const NeighborTable& table, const std::vector<Vec3>& normals,
    std::size_t k_sim, AngularPooling pooling = AngularPooling::literal) {
  const std::size_t n = normals.size();
  const std::size_t k = std::min(k_sim, table.k);
  if (k < 2) throw Error("angular features: need at least 2 neighbours");
  if (table.rows() != n) throw Error("angular features: table/normal mismatch");

  if (pooling == AngularPooling::literal) {
    std::vector<double> col(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = table.row(i, k);
      for (std::size_t j = 0; j < k; ++j)
        col[j] += angular_similarity(normals[i], normals[row[j].index]);
    }
    for (double& c : col) c /= double(n);
    return similarity_statistics(col);
  }

  std::array<double, 5> acc{};
  std::vector<double> psi(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = table.row(i, k);
    for (std::size_t j = 0; j < k; ++j)
      psi[j] = angular_similarity(normals[i], normals[row[j].index]);
    const auto st = similarity_statistics(psi).as_array();
    for (std::size_t t = 0; t < 5; ++t) acc[t] += st[t];
  }
  SimilarityStats s;
  s.mean = acc[0] / double(n);
  s.stddev = acc[1] / double(n);
  s.skewness = acc[2] / double(n);
  s.kurtosis = acc[3] / double(n);
  s.entropy = acc[4] / double(n);
  return s;
}

struct AngularOptions {
  std::size_t k_normal = 12;
  std::size_t k_sim = 10;
  AngularPooling pooling = AngularPooling::literal;
  unsigned threads = 1;
};

struct AngularFeatures {
  std::array<double, 10> values{};
  std::size_t degenerate_normals = 0;
  std::vector<std::string> warnings;
};

namespace angular_detail {

inline void put(AngularFeatures& f, std::size_t scale, const SimilarityStats& s) {
  const auto a = s.as_array();
  for (std::size_t t = 0; t < 5; ++t) f.values[scale * 5 + t] = a[t];
}

}  // namespace angular_detail

/// Ten angular-consistency features: the five statistics at full
/// resolution, then at the Morton-stride half-resolution cloud with normals
/// re-estimated there.
///
/// `scale1_table` / `scale1_normals` let a caller reuse work it already did;
/// the table must have at least max(k_normal, k_sim) columns.
inline AngularFeatures angular_consistency_features(
    const PointCloud& cloud, const KdTree& index, const AngularOptions& opt,
    const NeighborTable* scale1_table = nullptr,
    const std::vector<Vec3>* scale1_normals = nullptr) {
  if (cloud.size() < opt.k_normal + 1)
    throw Error("angular features: cloud has fewer than k_normal + 1 points");
  const std::size_t kmax = std::max(opt.k_normal, opt.k_sim);
  AngularFeatures out;

  NeighborTable own;
  if (scale1_table == nullptr || scale1_table->k < std::min(kmax, cloud.size() - 1)) {
    own = neighbor_table(index, kmax, opt.threads);
    scale1_table = &own;
  }
  std::vector<Vec3> own_normals;
  if (scale1_normals == nullptr) {
    auto est = estimate_normals(index, *scale1_table, opt.k_normal, opt.threads);
    out.degenerate_normals += est.degenerate;
    own_normals = std::move(est.normals);
    scale1_normals = &own_normals;
  }
  const SimilarityStats s1 = angular_scale_statistics(
      *scale1_table, *scale1_normals, opt.k_sim, opt.pooling);
  angular_detail::put(out, 0, s1);

  const PointCloud half = subsample_stride(cloud, 2);
  if (half.size() < opt.k_normal + 1) {
    angular_detail::put(out, 1, s1);
    out.warnings.push_back(
        "angular: half-resolution cloud too small; reusing full-scale "
        "statistics");
    return out;
  }
  const KdTree half_index(half);
  const NeighborTable half_table = neighbor_table(half_index, kmax, opt.threads);
  auto est = estimate_normals(half_index, half_table, opt.k_normal, opt.threads);
  out.degenerate_normals += est.degenerate;
  angular_detail::put(out, 1,
                      angular_scale_statistics(half_table, est.normals,
                                               opt.k_sim, opt.pooling));
  return out;
}

/// Statistics of one scale for caller-supplied normals (e.g. synthetic
/// normals in experiments), bypassing estimation.
inline SimilarityStats angular_statistics_for_normals(
    const KdTree& index, const std::vector<Vec3>& normals, std::size_t k_sim,
    AngularPooling pooling = AngularPooling::literal) {
  if (normals.size() != index.size())
    throw Error("angular features: normals do not match index");
  return angular_scale_statistics(neighbor_table(index, k_sim), normals, k_sim,
                                  pooling);
}

}  // namespace sgr

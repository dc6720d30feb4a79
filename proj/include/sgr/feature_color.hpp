#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "sgr/ggd.hpp"
#include "sgr/graph_resampling.hpp"
#include "sgr/kdtree.hpp"
#include "sgr/morton.hpp"
#include "sgr/parallel.hpp"
#include "sgr/sym3_eigen.hpp"

namespace sgr {

/// BT.601 full-range RGB -> YUV (chroma offset 128, not clamped).
inline Vec3 rgb_to_yuv(const Rgb& c) {
  const double r = c[0], g = c[1], b = c[2];
  return {0.299 * r + 0.587 * g + 0.114 * b,
          -0.169 * r - 0.331 * g + 0.5 * b + 128.0,
          0.5 * r - 0.419 * g - 0.081 * b + 128.0};
}

inline constexpr double kWhiteningFloor = 1e-8;

/// ZCA whitening: centred samples times Sigma^(-1/2), with Sigma the sample
/// covariance (divisor N - 1) and its eigenvalues floored at 1e-8.
inline std::vector<Vec3> zca_whiten(const std::vector<Vec3>& samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw Error("zca: need at least 2 samples");
  Vec3 mean{0, 0, 0};
  for (const auto& s : samples) mean = mean + s;
  mean = (1.0 / double(n)) * mean;
  Sym3 cov;
  for (const auto& s : samples) {
    const Vec3 d = s - mean;
    cov.xx += d[0] * d[0];
    cov.xy += d[0] * d[1];
    cov.xz += d[0] * d[2];
    cov.yy += d[1] * d[1];
    cov.yz += d[1] * d[2];
    cov.zz += d[2] * d[2];
  }
  const double inv = 1.0 / double(n - 1);
  cov = {cov.xx * inv, cov.xy * inv, cov.xz * inv,
         cov.yy * inv, cov.yz * inv, cov.zz * inv};
  const Sym3Eigen eig = eigen_sym3(cov);

  std::array<std::array<double, 3>, 3> w{};
  for (int k = 0; k < 3; ++k) {
    const double s = 1.0 / std::sqrt(std::max(eig.values[k], kWhiteningFloor));
    const Vec3& v = eig.vectors[k];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) w[r][c] += s * v[r] * v[c];
  }
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = samples[i] - mean;
    for (int r = 0; r < 3; ++r)
      out[i][r] = w[r][0] * d[0] + w[r][1] * d[1] + w[r][2] * d[2];
  }
  return out;
}

inline constexpr double kMscnStabilizer = 1.0;
inline constexpr std::size_t kDefaultWindow = 49;

/// Mean-subtracted contrast-normalised coefficients over scattered points.
///
/// `index` must index exactly the points the values belong to, in the same
/// order. Each point's neighbourhood is its `window` nearest points (itself
/// included) weighted by a Gaussian whose sigma is half the neighbourhood
/// radius.
template <std::size_t C>
std::vector<std::array<double, C>> mscn_normalize(
    const std::vector<std::array<double, C>>& values, const KdTree& index,
    std::size_t window = kDefaultWindow) {
  const std::size_t n = values.size();
  if (index.size() != n) throw Error("mscn: index does not match values");
  if (window == 0) throw Error("mscn: window must be positive");
  const std::size_t k = std::min(window, n);
  std::vector<std::array<double, C>> out(n);
  std::vector<Neighbor> nb;
  std::vector<double> w;
  for (std::size_t i = 0; i < n; ++i) {
    index.knn(index.point(i), k, KdTree::npos, nb);
    const double sigma = 0.5 * nb.back().distance;
    w.resize(nb.size());
    double wsum = 0.0;
    for (std::size_t j = 0; j < nb.size(); ++j) {
      w[j] = sigma > 0.0 ? std::exp(-nb[j].distance * nb[j].distance /
                                    (2.0 * sigma * sigma))
                         : 1.0;
      wsum += w[j];
    }
    for (double& x : w) x /= wsum;
    // Moments of differences to the centre value, so a flat patch is exactly 0.
    for (std::size_t c = 0; c < C; ++c) {
      const double centre = values[i][c];
      double shift = 0.0;
      for (std::size_t j = 0; j < nb.size(); ++j)
        shift += w[j] * (values[nb[j].index][c] - centre);
      double var = 0.0;
      for (std::size_t j = 0; j < nb.size(); ++j) {
        const double d = values[nb[j].index][c] - centre - shift;
        var += w[j] * d * d;
      }
      out[i][c] = -shift / (std::sqrt(var) + kMscnStabilizer);
    }
  }
  return out;
}

inline std::vector<double> mscn_normalize(const std::vector<double>& values,
                                          const KdTree& index,
                                          std::size_t window = kDefaultWindow) {
  std::vector<std::array<double, 1>> v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v[i][0] = values[i];
  const auto r = mscn_normalize<1>(v, index, window);
  std::vector<double> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = r[i][0];
  return out;
}

inline constexpr std::array<std::size_t, 4> kColorScales{1, 2, 4, 8};

/// Layout index of a colour feature inside the 24-wide group:
/// channel-major (Y, U, V), then scale (1, 2, 4, 8), then (lambda, eps^2).
constexpr std::size_t color_feature_slot(std::size_t channel,
                                         std::size_t scale_index,
                                         std::size_t param) {
  return channel * 8 + scale_index * 2 + param;
}

struct ColorFeatures {
  std::array<double, 24> values{};
  std::size_t degenerate_fits = 0;
  std::size_t skipped_cells = 0;
  std::vector<std::string> warnings;
};

/// Whitening, MSCN and GGD fitting per (region, scale) cell, averaged over
/// regions.
inline ColorFeatures color_naturalness_features(
    const PointCloud& cloud, const std::vector<LocalRegion>& regions,
    std::size_t window = kDefaultWindow, unsigned threads = 1) {
  struct Cell {
    bool usable = false;
    std::array<bool, 3> ok{};
    std::array<GgdParams, 3> fit{};
  };
  std::vector<const LocalRegion*> live;
  for (const auto& r : regions)
    if (!r.sparse) live.push_back(&r);
  if (live.empty()) throw Error("color features: no usable regions");

  const std::size_t n_scales = kColorScales.size();
  std::vector<Cell> cells(live.size() * n_scales);
  parallel_for(cells.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t ci = b; ci < e; ++ci) {
      const LocalRegion& reg = *live[ci / n_scales];
      const std::size_t factor = kColorScales[ci % n_scales];
      Cell& cell = cells[ci];

      std::vector<Vec3> pos(reg.members.size());
      for (std::size_t j = 0; j < reg.members.size(); ++j)
        pos[j] = cloud.position(reg.members[j]);
      const auto keep = stride_indices(pos, factor);
      if (keep.size() < kMinRegionMembers) continue;

      std::vector<Vec3> sub(keep.size()), yuv(keep.size());
      for (std::size_t j = 0; j < keep.size(); ++j) {
        sub[j] = pos[keep[j]];
        yuv[j] = rgb_to_yuv(cloud.color[reg.members[keep[j]]]);
      }
      const auto white = zca_whiten(yuv);
      const KdTree index(std::move(sub));
      const auto mscn = mscn_normalize<3>(white, index, window);
      cell.usable = true;
      std::vector<double> ch(mscn.size());
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t j = 0; j < mscn.size(); ++j) ch[j] = mscn[j][c];
        try {
          cell.fit[c] = ggd_fit(ch);
          cell.ok[c] = true;
        } catch (const Error&) {
          cell.ok[c] = false;
        }
      }
    }
  });

  ColorFeatures out;
  static constexpr const char* kChannel[3] = {"Y", "U", "V"};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t s = 0; s < n_scales; ++s) {
      double lam = 0.0, eps = 0.0;
      std::size_t used = 0;
      for (std::size_t r = 0; r < live.size(); ++r) {
        const Cell& cell = cells[r * n_scales + s];
        if (!cell.usable) continue;
        if (!cell.ok[c]) continue;
        lam += cell.fit[c].lambda;
        eps += cell.fit[c].epsilon_sq;
        ++used;
      }
      if (used == 0) {
        lam = 2.0;
        eps = 0.0;
        out.warnings.push_back(std::string("color: no usable fit for channel ") +
                               kChannel[c] + " at scale " +
                               std::to_string(kColorScales[s]) +
                               "; using fallback");
      } else {
        lam /= double(used);
        eps /= double(used);
      }
      out.values[color_feature_slot(c, s, 0)] = lam;
      out.values[color_feature_slot(c, s, 1)] = eps;
    }
  }
  for (const auto& cell : cells) {
    if (!cell.usable) {
      ++out.skipped_cells;
      continue;
    }
    for (bool ok : cell.ok)
      if (!ok) ++out.degenerate_fits;
  }
  return out;
}

}  // namespace sgr

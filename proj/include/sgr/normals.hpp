#pragma once

#include <cmath>
#include <vector>

#include "sgr/neighbors.hpp"
#include "sgr/sym3_eigen.hpp"

namespace sgr {

struct NormalEstimate {
  std::vector<Vec3> normals;
  std::size_t degenerate = 0;  // neighbourhoods whose points all coincide
};

/// Flips n so that its largest-magnitude component is positive.
inline Vec3 canonical_sign(const Vec3& n) {
  int big = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(n[a]) > std::abs(n[big])) big = a;
  return n[big] < 0 ? -1.0 * n : n;
}

/// Plane-fit normal of a point set: eigenvector of the smallest eigenvalue
/// of the population covariance. Returns false if all points coincide.
template <typename Positions>
bool fit_plane_normal(const Positions& pts, Vec3& normal) {
  Vec3 c{0, 0, 0};
  for (const auto& p : pts) c = c + p;
  c = (1.0 / double(pts.size())) * c;
  Sym3 cov;
  for (const auto& p : pts) {
    const Vec3 d = p - c;
    cov.xx += d[0] * d[0];
    cov.xy += d[0] * d[1];
    cov.xz += d[0] * d[2];
    cov.yy += d[1] * d[1];
    cov.yz += d[1] * d[2];
    cov.zz += d[2] * d[2];
  }
  if (cov.xx + cov.yy + cov.zz == 0.0) {
    normal = {0, 0, 1};
    return false;
  }
  normal = canonical_sign(eigen_sym3(cov).vectors[0]);
  return true;
}

/// Normals from the first k_normal entries of each neighbour-table row.
inline NormalEstimate estimate_normals(const KdTree& index,
                                       const NeighborTable& table,
                                       std::size_t k_normal,
                                       unsigned threads = 1) {
  const std::size_t n = index.size();
  if (n < 3) throw Error("normals: need at least 3 points");
  if (k_normal < 3 || k_normal >= n)
    throw Error("normals: k_normal must satisfy 3 <= k < M (got " +
                std::to_string(k_normal) + ")");
  if (table.k < k_normal)
    throw Error("normals: neighbour table is narrower than k_normal");
  NormalEstimate out;
  out.normals.resize(n);
  std::vector<unsigned char> bad(n, 0);
  parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
    std::vector<Vec3> pts(k_normal);
    for (std::size_t i = b; i < e; ++i) {
      const auto row = table.row(i, k_normal);
      for (std::size_t j = 0; j < k_normal; ++j)
        pts[j] = index.point(row[j].index);
      bad[i] = fit_plane_normal(pts, out.normals[i]) ? 0 : 1;
    }
  });
  for (unsigned char b : bad) out.degenerate += b;
  return out;
}

inline NormalEstimate estimate_normals(const PointCloud& cloud,
                                       const KdTree& index,
                                       std::size_t k_normal = 12,
                                       unsigned threads = 1) {
  if (cloud.size() != index.size())
    throw Error("normals: index does not match cloud");
  if (k_normal < 3 || k_normal >= cloud.size())
    throw Error("normals: k_normal must satisfy 3 <= k < M (got " +
                std::to_string(k_normal) + ")");
  return estimate_normals(index, neighbor_table(index, k_normal, threads),
                          k_normal, threads);
}

}  // namespace sgr

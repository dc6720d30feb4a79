#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "sgr/point_cloud.hpp"

namespace sgr {

inline constexpr int kMortonBits = 21;

// Spreads the low 21 bits of v so that bit i lands at bit 3i.
inline std::uint64_t morton_spread(std::uint64_t v) {
  v &= 0x1fffffULL;
  v = (v | (v << 32)) & 0x001f00000000ffffULL;
  v = (v | (v << 16)) & 0x001f0000ff0000ffULL;
  v = (v | (v << 8)) & 0x100f00f00f00f00fULL;
  v = (v | (v << 4)) & 0x10c30c30c30c30c3ULL;
  v = (v | (v << 2)) & 0x1249249249249249ULL;
  return v;
}

/// 63-bit code with x in bit 0, y in bit 1, z in bit 2 of each triple.
inline std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y,
                                   std::uint32_t z) {
  return morton_spread(x) | (morton_spread(y) << 1) | (morton_spread(z) << 2);
}

/// Morton codes of positions quantized to 21 bits per axis over their own
/// bounding box.
template <typename Positions>
std::vector<std::uint64_t> morton_codes(const Positions& pts) {
  std::vector<std::uint64_t> codes(pts.size());
  if (pts.empty()) return codes;
  const BoundingRanges b = bounding_ranges_of(pts);
  constexpr double kMax = double((1u << kMortonBits) - 1);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::uint32_t q[3];
    for (int a = 0; a < 3; ++a) {
      const double r = b.range(a);
      double t = r > 0 ? (double(pts[i][a]) - b.min[a]) / r : 0.0;
      t = std::floor(t * double(1u << kMortonBits));
      q[a] = static_cast<std::uint32_t>(std::clamp(t, 0.0, kMax));
    }
    codes[i] = morton_encode(q[0], q[1], q[2]);
  }
  return codes;
}

/// Point indices sorted by Morton code, ties by original index.
template <typename Positions>
std::vector<std::size_t> morton_order(const Positions& pts) {
  const auto codes = morton_codes(pts);
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return codes[a] < codes[b] || (codes[a] == codes[b] && a < b);
  });
  return order;
}

/// Every factor-th entry of the Morton order, starting at offset 0.
template <typename Positions>
std::vector<std::size_t> stride_indices(const Positions& pts,
                                        std::size_t factor) {
  if (factor == 0) throw Error("subsample: factor must be >= 1");
  const auto order = morton_order(pts);
  std::vector<std::size_t> kept;
  kept.reserve((order.size() + factor - 1) / factor);
  for (std::size_t i = 0; i < order.size(); i += factor)
    kept.push_back(order[i]);
  return kept;
}

/// Deterministic spatially-uniform reduction: keeps ceil(M / factor) points.
inline PointCloud subsample_stride(const PointCloud& cloud,
                                   std::size_t factor) {
  if (cloud.empty()) throw Error("subsample: empty cloud");
  return cloud.select(stride_indices(cloud.geometry, factor));
}

}  // namespace sgr

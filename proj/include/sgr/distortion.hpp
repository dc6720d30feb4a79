#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgr/point_cloud.hpp"
#include "sgr/random.hpp"

namespace sgr {

/// Uniform random subset of round(keep_fraction * M) points, original order
/// preserved.
inline PointCloud downsample(const PointCloud& cloud, double keep_fraction,
                             std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw Error("downsample: keep fraction must be in (0, 1]");
  const auto keep =
      static_cast<std::size_t>(std::llround(keep_fraction * double(cloud.size())));
  if (keep < 32)
    throw Error("downsample: result would have " + std::to_string(keep) +
                " points (< 32)");
  if (keep == cloud.size()) return cloud;
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i)
    std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return cloud.select(idx);
}

/// Adds N(0, sigma^2) per axis with sigma = sigma_pct percent of the
/// bounding-box diagonal. Stored normals no longer apply and are dropped.
inline PointCloud geometry_noise(const PointCloud& cloud, double sigma_pct,
                                 std::uint64_t seed) {
  if (!(sigma_pct >= 0.0)) throw Error("geometry noise: sigma must be >= 0");
  if (cloud.empty()) throw Error("geometry noise: empty cloud");
  if (sigma_pct == 0.0) return cloud;
  const double sigma = sigma_pct / 100.0 * bounding_ranges(cloud).diagonal;
  PointCloud out;
  out.geometry = cloud.geometry;
  out.color = cloud.color;
  Rng rng(seed);
  for (auto& g : out.geometry)
    for (float& c : g) c = static_cast<float>(double(c) + sigma * rng.normal());
  return out;
}

/// Adds N(0, sigma^2) (in 8-bit levels) to each RGB channel, rounding and
/// clamping to [0, 255].
inline PointCloud color_noise(const PointCloud& cloud, double sigma_levels,
                              std::uint64_t seed) {
  if (!(sigma_levels >= 0.0)) throw Error("color noise: sigma must be >= 0");
  if (cloud.empty()) throw Error("color noise: empty cloud");
  if (sigma_levels == 0.0) return cloud;
  PointCloud out = cloud;
  Rng rng(seed);
  for (auto& c : out.color)
    for (auto& ch : c) {
      const double v = std::round(double(ch) + sigma_levels * rng.normal());
      ch = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  return out;
}

}  // namespace sgr

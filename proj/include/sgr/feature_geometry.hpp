#pragma once

#include <array>
#include <cmath>

#include "sgr/graph_resampling.hpp"

namespace sgr {

using GeometryFeatures = std::array<double, 6>;

/// Region-averaged per-axis mean and population standard deviation of member
/// coordinates, ordered (mu_x, sd_x, mu_y, sd_y, mu_z, sd_z). In centered
/// mode coordinates are taken relative to the region's keypoint.
inline GeometryFeatures geometry_density_features(
    const PointCloud& cloud, const std::vector<LocalRegion>& regions,
    bool centered = false) {
  GeometryFeatures sum{};
  std::size_t used = 0;
  for (const auto& reg : regions) {
    if (reg.sparse || reg.members.empty()) continue;
    const Vec3 origin = centered ? cloud.position(reg.center) : Vec3{0, 0, 0};
    const double n = double(reg.members.size());
    for (int a = 0; a < 3; ++a) {
      double mean = 0.0;
      for (std::size_t m : reg.members)
        mean += double(cloud.geometry[m][a]) - origin[a];
      mean /= n;
      double var = 0.0;
      for (std::size_t m : reg.members) {
        const double d = double(cloud.geometry[m][a]) - origin[a] - mean;
        var += d * d;
      }
      sum[2 * a] += mean;
      sum[2 * a + 1] += std::sqrt(var / n);
    }
    ++used;
  }
  if (used == 0) throw Error("geometry features: no usable regions");
  for (double& v : sum) v /= double(used);
  return sum;
}

}  // namespace sgr

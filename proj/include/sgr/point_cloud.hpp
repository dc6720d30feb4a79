#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgr {

/// Base class for every error raised by the library. The optional stage
/// label is filled in by the pipeline when an error crosses a stage boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

using Vec3 = std::array<double, 3>;
using Vec3f = std::array<float, 3>;
using Rgb = std::array<std::uint8_t, 3>;

inline Vec3 to_vec3(const Vec3f& v) { return {v[0], v[1], v[2]}; }

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// A colored point cloud. Geometry and normals are stored as 32-bit floats,
/// which is the on-disk precision; all computation promotes to double.
struct PointCloud {
  std::vector<Vec3f> geometry;
  std::vector<Rgb> color;
  std::optional<std::vector<Vec3f>> normals;

  std::size_t size() const { return geometry.size(); }
  bool empty() const { return geometry.empty(); }

  Vec3 position(std::size_t i) const { return to_vec3(geometry[i]); }

  /// Throws sgr::Error if any invariant is violated.
  void validate() const {
    if (color.size() != geometry.size())
      throw Error("point cloud: color count " + std::to_string(color.size()) +
                  " != geometry count " + std::to_string(geometry.size()));
    if (normals && normals->size() != geometry.size())
      throw Error("point cloud: normal count " +
                  std::to_string(normals->size()) + " != geometry count " +
                  std::to_string(geometry.size()));
    for (std::size_t i = 0; i < geometry.size(); ++i) {
      for (float c : geometry[i]) {
        if (!std::isfinite(c))
          throw Error("point cloud: non-finite coordinate at point " +
                      std::to_string(i));
      }
    }
    if (normals) {
      for (std::size_t i = 0; i < normals->size(); ++i) {
        const double n = norm(to_vec3((*normals)[i]));
        if (!(std::abs(n - 1.0) <= 1e-4))
          throw Error("point cloud: normal " + std::to_string(i) +
                      " is not unit length");
      }
    }
  }

  /// Copies the listed points, preserving the given order.
  PointCloud select(const std::vector<std::size_t>& indices) const {
    PointCloud out;
    out.geometry.reserve(indices.size());
    out.color.reserve(indices.size());
    for (std::size_t i : indices) {
      out.geometry.push_back(geometry[i]);
      out.color.push_back(color[i]);
    }
    if (normals) {
      std::vector<Vec3f> n;
      n.reserve(indices.size());
      for (std::size_t i : indices) n.push_back((*normals)[i]);
      out.normals = std::move(n);
    }
    return out;
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct BoundingRanges {
  std::array<double, 3> min{};
  std::array<double, 3> max{};
  double diagonal = 0.0;

  double range(int axis) const { return max[axis] - min[axis]; }
  double min_range() const {
    return std::min({range(0), range(1), range(2)});
  }
};

template <typename Positions>
BoundingRanges bounding_ranges_of(const Positions& pts) {
  if (pts.empty()) throw Error("bounding ranges: empty cloud");
  BoundingRanges b;
  b.min.fill(std::numeric_limits<double>::infinity());
  b.max.fill(-std::numeric_limits<double>::infinity());
  for (const auto& p : pts) {
    for (int a = 0; a < 3; ++a) {
      const double v = p[a];
      b.min[a] = std::min(b.min[a], v);
      b.max[a] = std::max(b.max[a], v);
    }
  }
  b.diagonal = std::sqrt(b.range(0) * b.range(0) + b.range(1) * b.range(1) +
                         b.range(2) * b.range(2));
  return b;
}

inline BoundingRanges bounding_ranges(const PointCloud& cloud) {
  return bounding_ranges_of(cloud.geometry);
}

}  // namespace sgr

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgr/feature_angular.hpp"
#include "sgr/feature_color.hpp"
#include "sgr/feature_geometry.hpp"
#include "sgr/graph_resampling.hpp"
#include "sgr/normals.hpp"

namespace sgr {

inline constexpr std::size_t kFeatureCount = 40;
inline constexpr std::size_t kGeometryOffset = 0;
inline constexpr std::size_t kColorOffset = 6;
inline constexpr std::size_t kAngularOffset = 30;
inline constexpr std::size_t kMinPipelinePoints = 32;

enum class ResampleSignal { normal, geometry, color };

struct PipelineConfig {
  std::size_t k_graph = 10;
  std::size_t filter_length = 4;
  std::optional<std::size_t> theta_override;
  std::size_t k_normal = 12;
  std::size_t k_sim = 10;
  std::size_t window = kDefaultWindow;
  AlphaMode alpha_mode = AlphaMode::literal;
  bool centered_geometry = false;
  AngularPooling angular_pooling = AngularPooling::literal;
  ResampleSignal resample_signal = ResampleSignal::normal;
  std::uint64_t seed = 0;
  bool use_file_normals = false;
  unsigned threads = 1;

  // Ablation switches: a disabled group is emitted as zeros.
  bool geometry_group = true;
  bool color_group = true;
  bool angular_group = true;

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw Error(std::string("config: ") + name + " must be positive");
    };
    positive(k_graph, "k_graph");
    positive(k_normal, "k_normal");
    positive(k_sim, "k_sim");
    positive(window, "window");
    if (filter_length < 2) throw Error("config: filter length must be >= 2");
    if (k_normal < 3) throw Error("config: k_normal must be >= 3");
    if (k_sim < 2) throw Error("config: k_sim must be >= 2");
    if (theta_override && *theta_override == 0)
      throw Error("config: theta must be positive");
  }
};

struct Diagnostics {
  std::size_t keypoints = 0;
  std::size_t regions = 0;
  std::size_t sparse_regions = 0;
  std::size_t degenerate_normals = 0;
  std::size_t degenerate_fits = 0;
  std::size_t skipped_color_cells = 0;
  std::vector<std::string> warnings;
};

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  Diagnostics diagnostics;
};

/// Column names of the feature layout, in order.
inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const char* axis : {"x", "y", "z"}) {
      n.push_back(std::string("geometry_mean_") + axis);
      n.push_back(std::string("geometry_sd_") + axis);
    }
    for (const char* ch : {"Y", "U", "V"})
      for (std::size_t s : kColorScales)
        for (const char* p : {"shape", "scale"})
          n.push_back(std::string("color_") + ch + "_s" + std::to_string(s) +
                      "_" + p);
    for (const char* sc : {"s1", "s2"})
      for (const char* st : {"mean", "sd", "skewness", "kurtosis", "entropy"})
        n.push_back(std::string("angular_") + sc + "_" + st);
    return n;
  }();
  return names;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash identifying the feature layout; stored in model files.
inline std::uint64_t feature_layout_hash() {
  std::string desc = "sgr-features-v1";
  for (const auto& n : feature_names()) desc += "|" + n;
  return fnv1a64(desc);
}

namespace pipeline_detail {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

}  // namespace pipeline_detail

/// Full feature extraction: index, normals, graph keypoints, regions and
/// the three feature groups.
inline FeatureVector extract_features(const PointCloud& cloud,
                                      const PipelineConfig& config) {
  using pipeline_detail::stage;
  config.validate();
  stage("input", [&] {
    cloud.validate();
    if (cloud.size() < kMinPipelinePoints)
      throw Error("cloud has " + std::to_string(cloud.size()) +
                  " points; at least " + std::to_string(kMinPipelinePoints) +
                  " are required");
    if (config.k_normal >= cloud.size() || config.k_graph >= cloud.size())
      throw Error("neighbour counts must be smaller than the point count");
    return 0;
  });
  const unsigned threads = resolve_threads(config.threads);
  FeatureVector fv;
  Diagnostics& diag = fv.diagnostics;

  const KdTree index = stage("index", [&] { return KdTree(cloud); });
  const std::size_t kmax =
      std::max({config.k_normal, config.k_graph, config.k_sim});
  const NeighborTable table =
      stage("index", [&] { return neighbor_table(index, kmax, threads); });

  std::vector<Vec3> normals;
  stage("normals", [&] {
    if (config.use_file_normals && cloud.normals) {
      normals.reserve(cloud.size());
      for (const auto& n : *cloud.normals) normals.push_back(to_vec3(n));
    } else {
      auto est = estimate_normals(index, table, config.k_normal, threads);
      diag.degenerate_normals = est.degenerate;
      normals = std::move(est.normals);
    }
    return 0;
  });

  const RegionSet regions = stage("resampling", [&] {
    std::vector<Vec3> signal;
    switch (config.resample_signal) {
      case ResampleSignal::normal:
        signal = normals;
        break;
      case ResampleSignal::geometry:
        signal.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
          signal[i] = cloud.position(i);
        break;
      case ResampleSignal::color:
        signal.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
          signal[i] = {double(cloud.color[i][0]), double(cloud.color[i][1]),
                       double(cloud.color[i][2])};
        break;
    }
    const GraphShift graph = build_graph(table, cloud.size(), config.k_graph);
    const auto response = highpass_response(
        graph, signal, FilterSpec::haar_like(config.filter_length), threads);
    const KeypointSet keys = select_keypoints(response, config.theta_override);
    RegionSet rs =
        construct_regions(cloud, index, keys, config.alpha_mode, threads);
    diag.keypoints = keys.size();
    diag.regions = rs.regions.size();
    diag.sparse_regions = rs.regions.size() - rs.usable();
    if (rs.usable() == 0) throw Error("no usable regions");
    return rs;
  });

  if (config.geometry_group) {
    const auto g = stage("geometry", [&] {
      return geometry_density_features(cloud, regions.regions,
                                       config.centered_geometry);
    });
    std::copy(g.begin(), g.end(), fv.values.begin() + kGeometryOffset);
  }
  if (config.color_group) {
    auto c = stage("color", [&] {
      return color_naturalness_features(cloud, regions.regions, config.window,
                                        threads);
    });
    std::copy(c.values.begin(), c.values.end(),
              fv.values.begin() + kColorOffset);
    diag.degenerate_fits = c.degenerate_fits;
    diag.skipped_color_cells = c.skipped_cells;
    for (auto& w : c.warnings) diag.warnings.push_back(std::move(w));
  }
  if (config.angular_group) {
    auto a = stage("angular", [&] {
      AngularOptions opt;
      opt.k_normal = config.k_normal;
      opt.k_sim = config.k_sim;
      opt.pooling = config.angular_pooling;
      opt.threads = threads;
      return angular_consistency_features(cloud, index, opt, &table, &normals);
    });
    std::copy(a.values.begin(), a.values.end(),
              fv.values.begin() + kAngularOffset);
    diag.degenerate_normals += a.degenerate_normals;
    for (auto& w : a.warnings) diag.warnings.push_back(std::move(w));
  }
  if (diag.degenerate_normals > 0)
    diag.warnings.push_back(std::to_string(diag.degenerate_normals) +
                            " degenerate normal neighbourhoods");
  if (diag.sparse_regions > 0)
    diag.warnings.push_back(std::to_string(diag.sparse_regions) +
                            " sparse regions skipped");
  for (double v : fv.values)
    if (!std::isfinite(v)) throw Error("features: non-finite value produced");
  return fv;
}

}  // namespace sgr

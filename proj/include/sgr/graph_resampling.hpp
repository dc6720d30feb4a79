#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "sgr/neighbors.hpp"
#include "sgr/point_cloud.hpp"

namespace sgr {

/// Row-stochastic k-NN graph shift operator in fixed-width sparse form.
struct GraphShift {
  std::size_t nodes = 0;
  std::size_t k = 0;  // neighbours per row, min(k_graph, M - 1)
  double sigma = 0.0;
  std::vector<std::size_t> neighbors;  // nodes * k
  std::vector<double> weights;         // nodes * k, each row sums to 1

  std::span<const std::size_t> row_neighbors(std::size_t i) const {
    return {neighbors.data() + i * k, k};
  }
  std::span<const double> row_weights(std::size_t i) const {
    return {weights.data() + i * k, k};
  }
};

/// Gaussian-weighted k-NN graph; sigma is the mean edge length.
inline GraphShift build_graph(const NeighborTable& table, std::size_t nodes,
                              std::size_t k_graph) {
  if (nodes < 2) throw Error("graph: need at least 2 points");
  if (k_graph < 1 || k_graph >= nodes)
    throw Error("graph: k_graph must satisfy 1 <= k < M");
  if (table.k < k_graph || table.rows() != nodes)
    throw Error("graph: neighbour table does not cover k_graph");
  GraphShift g;
  g.nodes = nodes;
  g.k = k_graph;
  g.neighbors.resize(nodes * k_graph);
  g.weights.resize(nodes * k_graph);

  double total = 0.0;
  for (std::size_t i = 0; i < nodes; ++i)
    for (const auto& nb : table.row(i, k_graph)) total += nb.distance;
  g.sigma = total / double(nodes * k_graph);
  if (!(g.sigma > 0.0))
    throw Error("graph: degenerate geometry (all points coincide)");
  const double inv_s2 = 1.0 / (g.sigma * g.sigma);

  for (std::size_t i = 0; i < nodes; ++i) {
    const auto row = table.row(i, k_graph);
    // Offsetting by the nearest edge cancels in the normalisation and keeps
    // far outliers from underflowing the whole row.
    const double d0 = row[0].distance * row[0].distance;
    double sum = 0.0;
    for (std::size_t j = 0; j < k_graph; ++j) {
      const double d2 = row[j].distance * row[j].distance;
      const double w = std::exp(-(d2 - d0) * inv_s2);
      g.neighbors[i * k_graph + j] = row[j].index;
      g.weights[i * k_graph + j] = w;
      sum += w;
    }
    for (std::size_t j = 0; j < k_graph; ++j) g.weights[i * k_graph + j] /= sum;
  }
  return g;
}

inline GraphShift build_graph(const KdTree& index, std::size_t k_graph,
                              unsigned threads = 1) {
  if (index.size() < 2) throw Error("graph: need at least 2 points");
  if (k_graph < 1 || k_graph >= index.size())
    throw Error("graph: k_graph must satisfy 1 <= k < M");
  return build_graph(neighbor_table(index, k_graph, threads), index.size(),
                     k_graph);
}

/// Polynomial graph filter h(A) = sum_k h_k A^k.
struct FilterSpec {
  std::vector<double> coefficients;

  std::size_t length() const { return coefficients.size(); }

  /// (I - A)^(K-1): binomial differencing, the default high-pass.
  static FilterSpec haar_like(std::size_t length = 4) {
    if (length < 2) throw Error("filter: length must be >= 2");
    FilterSpec f;
    const std::size_t n = length - 1;
    double c = 1.0;
    for (std::size_t k = 0; k <= n; ++k) {
      f.coefficients.push_back((k % 2 == 0) ? c : -c);
      c = c * double(n - k) / double(k + 1);
    }
    return f;
  }

  bool is_highpass() const {
    double s = 0.0, mag = 0.0;
    for (double h : coefficients) {
      s += h;
      mag += std::abs(h);
    }
    return std::abs(s) <= 1e-9 * std::max(1.0, mag);
  }
};

namespace graph_detail {

// Re-expresses sum_k h_k A^k as sum_j c_j (I - A)^j.
inline std::vector<double> difference_basis(const std::vector<double>& h) {
  const std::size_t n = h.size();
  std::vector<double> c(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = j; k < n; ++k) {
      double binom = 1.0;
      for (std::size_t t = 0; t < j; ++t)
        binom = binom * double(k - t) / double(t + 1);
      s += h[k] * binom;
    }
    c[j] = (j % 2 == 0) ? s : -s;
  }
  return c;
}

}  // namespace graph_detail

/// Per-node magnitude of the filtered vector signal, computed with K-1
/// sparse products. Each product evaluates (I - A)x as sum_j w_ij (x_i - x_j),
/// so constant signals are annihilated exactly.
inline std::vector<double> highpass_response(const GraphShift& graph,
                                             const std::vector<Vec3>& signal,
                                             const FilterSpec& filter,
                                             unsigned threads = 1) {
  if (signal.size() != graph.nodes)
    throw Error("highpass: signal length does not match graph");
  if (filter.length() < 1) throw Error("highpass: empty filter");
  if (!filter.is_highpass())
    throw Error("highpass: filter coefficients must sum to zero");
  const auto c = graph_detail::difference_basis(filter.coefficients);
  const std::size_t n = graph.nodes;

  std::vector<Vec3> acc(n), cur = signal, next(n);
  for (std::size_t i = 0; i < n; ++i) acc[i] = c[0] * signal[i];
  for (std::size_t step = 1; step < c.size(); ++step) {
    parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const auto nb = graph.row_neighbors(i);
        const auto w = graph.row_weights(i);
        Vec3 d{0, 0, 0};
        for (std::size_t j = 0; j < graph.k; ++j)
          d = d + w[j] * (cur[i] - cur[nb[j]]);
        next[i] = d;
      }
    });
    std::swap(cur, next);
    if (c[step] != 0.0)
      for (std::size_t i = 0; i < n; ++i) acc[i] = acc[i] + c[step] * cur[i];
  }
  std::vector<double> response(n);
  for (std::size_t i = 0; i < n; ++i) response[i] = norm(acc[i]);
  return response;
}

struct KeypointSet {
  std::vector<std::size_t> indices;
  std::vector<double> scores;

  std::size_t size() const { return indices.size(); }
};

/// Default keypoint count: M / 10000 rounded half-up, at least 1, at most M.
inline std::size_t keypoint_count(std::size_t m) {
  if (m == 0) return 0;
  return std::min(m, std::max<std::size_t>(1, (m + 5000) / 10000));
}

inline KeypointSet select_keypoints(
    const std::vector<double>& responses,
    std::optional<std::size_t> theta_override = std::nullopt) {
  const std::size_t m = responses.size();
  if (m == 0) throw Error("keypoints: empty response vector");
  std::size_t theta = keypoint_count(m);
  if (theta_override) {
    if (*theta_override == 0 || *theta_override > m)
      throw Error("keypoints: theta override " +
                  std::to_string(*theta_override) + " outside [1, " +
                  std::to_string(m) + "]");
    theta = *theta_override;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + theta, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return responses[a] > responses[b] ||
                             (responses[a] == responses[b] && a < b);
                    });
  KeypointSet ks;
  ks.indices.assign(order.begin(), order.begin() + theta);
  for (std::size_t i : ks.indices) ks.scores.push_back(responses[i]);
  return ks;
}

enum class AlphaMode { literal, squared };

inline constexpr std::size_t kMinRegionMembers = 8;

struct LocalRegion {
  std::size_t center = 0;
  std::vector<std::size_t> members;  // ascending, includes center
  bool sparse = false;
};

struct RegionSet {
  double alpha = 0.0;
  double threshold = 0.0;  // compared against squared distance
  std::vector<LocalRegion> regions;

  std::size_t usable() const {
    return std::count_if(regions.begin(), regions.end(),
                         [](const LocalRegion& r) { return !r.sparse; });
  }
};

/// One twentieth of the smallest axis extent.
inline double region_alpha(const BoundingRanges& b) {
  return b.min_range() / 20.0;
}

/// Regions are drawn from the full cloud: every point whose squared distance
/// to the keypoint is within alpha (or alpha^2 in squared mode).
inline RegionSet construct_regions(const PointCloud& cloud,
                                   const KdTree& index,
                                   const KeypointSet& keypoints,
                                   AlphaMode mode = AlphaMode::literal,
                                   unsigned threads = 1) {
  if (cloud.empty()) throw Error("regions: empty cloud");
  RegionSet rs;
  rs.alpha = region_alpha(bounding_ranges(cloud));
  rs.threshold = mode == AlphaMode::literal ? rs.alpha : rs.alpha * rs.alpha;
  rs.regions.resize(keypoints.size());
  parallel_for(keypoints.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      const std::size_t c = keypoints.indices[r];
      if (c >= cloud.size()) throw Error("regions: keypoint out of range");
      LocalRegion& reg = rs.regions[r];
      reg.center = c;
      reg.members = index.radius_search(index.point(c), rs.threshold);
      reg.sparse = reg.members.size() < kMinRegionMembers;
    }
  });
  return rs;
}

}  // namespace sgr

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sgr/parallel.hpp"
#include "sgr/pipeline.hpp"
#include "sgr/random.hpp"

namespace sgr {

inline constexpr const char* kModelFormat = "sgr-rfr-v1";

class ModelError : public Error {
 public:
  using Error::Error;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t mtry = 13;
  std::size_t min_leaf = 2;
  bool bootstrap = true;
  // Lifts the non-constant-target precondition (used by tests).
  bool allow_constant_target = false;
  unsigned threads = 1;
};

/// Row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  void push_row(std::span<const double> values) {
    if (rows == 0 && cols == 0) cols = values.size();
    if (values.size() != cols) throw Error("feature matrix: row width mismatch");
    data.insert(data.end(), values.begin(), values.end());
    ++rows;
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;         // mean target of the node's samples

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    std::uint32_t i = 0;
    while (nodes[i].feature >= 0)
      i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left
                                                    : nodes[i].right;
    return nodes[i].value;
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  std::size_t feature_count = kFeatureCount;
  std::size_t mtry = 13;
  std::size_t min_leaf = 2;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::uint64_t layout_hash = feature_layout_hash();

  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

namespace forest_detail {

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> y,
              std::size_t mtry, std::size_t min_leaf, Rng& rng)
      : x_(x), y_(y), mtry_(std::min(mtry, x.cols)), min_leaf_(min_leaf),
        rng_(rng) {}

  RegressionTree build(std::vector<std::uint32_t> samples) {
    samples_ = std::move(samples);
    tree_.nodes.clear();
    grow(0, samples_.size());
    return std::move(tree_);
  }

 private:
  std::uint32_t grow(std::size_t begin, std::size_t end) {
    const std::uint32_t id = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const std::size_t n = end - begin;
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y_[samples_[i]];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    tree_.nodes[id].value = sum / double(n);
    if (lo == hi || n < 2 * min_leaf_) return id;

    // Candidate features, drawn without replacement. Past mtry, drawing
    // continues only while no valid partition has been found.
    features_.resize(x_.cols);
    std::iota(features_.begin(), features_.end(), 0u);

    double best_gain = -std::numeric_limits<double>::infinity();
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;
    const double parent = sum * sum / double(n);
    order_.resize(n);
    for (std::size_t f = 0; f < x_.cols && (f < mtry_ || best_feature < 0); ++f) {
      std::swap(features_[f], features_[f + rng_.below(x_.cols - f)]);
      const std::uint32_t feat = features_[f];
      for (std::size_t i = 0; i < n; ++i) order_[i] = samples_[begin + i];
      std::sort(order_.begin(), order_.end(),
                [&](std::uint32_t a, std::uint32_t b) {
                  const double va = x_.at(a, feat), vb = x_.at(b, feat);
                  return va < vb || (va == vb && a < b);
                });
      double left_sum = 0.0;
      for (std::size_t p = 1; p < n; ++p) {
        left_sum += y_[order_[p - 1]];
        if (p < min_leaf_ || n - p < min_leaf_) continue;
        const double a = x_.at(order_[p - 1], feat);
        const double b = x_.at(order_[p], feat);
        if (!(a < b)) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / double(p) +
                            right_sum * right_sum / double(n - p) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<std::int32_t>(feat);
          double t = a + (b - a) / 2.0;
          if (!(t >= a && t < b)) t = a;
          best_threshold = t;
        }
      }
    }
    if (best_feature < 0) return id;

    auto mid = std::stable_partition(
        samples_.begin() + begin, samples_.begin() + end,
        [&](std::uint32_t s) { return x_.at(s, best_feature) <= best_threshold; });
    const std::size_t split = std::size_t(mid - samples_.begin());
    const std::uint32_t l = grow(begin, split);
    const std::uint32_t r = grow(split, end);
    tree_.nodes[id].feature = best_feature;
    tree_.nodes[id].threshold = best_threshold;
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  std::size_t mtry_;
  std::size_t min_leaf_;
  Rng& rng_;
  RegressionTree tree_;
  std::vector<std::uint32_t> samples_, order_, features_;
};

}  // namespace forest_detail

/// Bagged CART regression trees with variance-reduction splits over mtry
/// randomly drawn features per node. Tree t uses its own generator derived
/// from (seed, t), so results do not depend on the thread count.
inline ForestModel train_forest(const FeatureMatrix& x,
                                std::span<const double> y,
                                const ForestParams& params,
                                std::uint64_t seed) {
  if (x.rows != y.size()) throw Error("forest: X and y row counts differ");
  if (x.rows < 4) throw Error("forest: need at least 4 samples");
  if (x.cols == 0) throw Error("forest: no features");
  if (params.n_trees == 0 || params.mtry == 0 || params.min_leaf == 0)
    throw Error("forest: n_trees, mtry and min_leaf must be positive");
  for (double v : x.data)
    if (!std::isfinite(v)) throw Error("forest: non-finite feature value");
  for (double v : y)
    if (!std::isfinite(v)) throw Error("forest: non-finite target value");
  if (!params.allow_constant_target &&
      std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; }))
    throw Error("forest: all targets are equal");

  ForestModel model;
  model.feature_count = x.cols;
  model.mtry = std::min(params.mtry, x.cols);
  model.min_leaf = params.min_leaf;
  model.bootstrap = params.bootstrap;
  model.seed = seed;
  model.trees.resize(params.n_trees);
  parallel_for(params.n_trees, resolve_threads(params.threads),
               [&](std::size_t b, std::size_t e) {
                 for (std::size_t t = b; t < e; ++t) {
                   Rng rng = Rng::derive(seed, t);
                   std::vector<std::uint32_t> samples(x.rows);
                   if (params.bootstrap) {
                     for (auto& s : samples)
                       s = static_cast<std::uint32_t>(rng.below(x.rows));
                   } else {
                     std::iota(samples.begin(), samples.end(), 0u);
                   }
                   forest_detail::TreeBuilder builder(x, y, model.mtry,
                                                      params.min_leaf, rng);
                   model.trees[t] = builder.build(std::move(samples));
                 }
               });
  return model;
}

inline double predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.feature_count)
    throw Error("forest: expected " + std::to_string(model.feature_count) +
                " features, got " + std::to_string(x.size()));
  if (model.trees.empty()) throw Error("forest: model has no trees");
  // Running mean: exact when all trees agree, never leaves [min, max].
  double mean = 0.0;
  std::size_t k = 0;
  for (const auto& t : model.trees) mean += (t.predict(x) - mean) / double(++k);
  return mean;
}

namespace forest_detail {

inline std::string hex_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  return std::string(buf, r.ptr);
}

inline double parse_hex_double(const std::string& s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v,
                           std::chars_format::hex);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ModelError("model: bad number '" + s + "'");
  return v;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace forest_detail

/// Serialises to the text format `sgr-rfr-v1`:
///
///   sgr-rfr-v1
///   layout <16 hex digits>
///   length <body bytes>
///   checksum <16 hex digits, FNV-1a 64 of the body>
///   <body>
///
/// The body holds `key value` lines followed by one `tree <nodes>` block per
/// tree, each node as `feature threshold left right value` with reals in
/// hexadecimal floating point so reloading is bit-exact.
inline std::string save_model(const ForestModel& m) {
  using namespace forest_detail;
  std::ostringstream body;
  body << "feature_count " << m.feature_count << "\n"
       << "trees " << m.trees.size() << "\n"
       << "mtry " << m.mtry << "\n"
       << "min_leaf " << m.min_leaf << "\n"
       << "bootstrap " << (m.bootstrap ? 1 : 0) << "\n"
       << "seed " << m.seed << "\n";
  for (const auto& t : m.trees) {
    body << "tree " << t.nodes.size() << "\n";
    for (const auto& n : t.nodes)
      body << n.feature << ' ' << hex_double(n.threshold) << ' ' << n.left
           << ' ' << n.right << ' ' << hex_double(n.value) << "\n";
  }
  body << "end\n";
  const std::string b = body.str();
  std::string out = std::string(kModelFormat) + "\n";
  out += "layout " + hex64(m.layout_hash) + "\n";
  out += "length " + std::to_string(b.size()) + "\n";
  out += "checksum " + hex64(fnv1a64(b)) + "\n";
  out += b;
  return out;
}

inline ForestModel load_model(const std::string& bytes,
                              std::uint64_t expected_layout = feature_layout_hash()) {
  using namespace forest_detail;
  std::size_t pos = 0;
  auto line = [&]() {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ModelError("model: truncated header");
    std::string l = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return l;
  };
  auto field = [&](const std::string& key) {
    const std::string l = line();
    if (l.rfind(key + " ", 0) != 0)
      throw ModelError("model: expected '" + key + "' line");
    return l.substr(key.size() + 1);
  };

  const std::string magic = line();
  if (magic != kModelFormat) {
    if (magic.rfind("sgr-rfr-", 0) == 0)
      throw ModelError("model: unsupported format version '" + magic +
                       "' (expected " + kModelFormat + ")");
    throw ModelError("model: not an sgr model file");
  }
  const std::string layout = field("layout");
  const std::string length = field("length");
  const std::string checksum = field("checksum");
  std::size_t len = 0;
  try {
    len = std::stoull(length);
  } catch (...) {
    throw ModelError("model: bad length field");
  }
  if (bytes.size() - pos != len)
    throw ModelError("model: corrupted stream (length mismatch)");
  const std::string body = bytes.substr(pos);
  if (hex64(fnv1a64(body)) != checksum)
    throw ModelError("model: corrupted stream (checksum mismatch)");

  ForestModel m;
  try {
    m.layout_hash = std::stoull(layout, nullptr, 16);
  } catch (...) {
    throw ModelError("model: bad layout field");
  }
  if (m.layout_hash != expected_layout)
    throw ModelError("model: feature layout mismatch (model " + layout +
                     ", pipeline " + hex64(expected_layout) + ")");

  std::istringstream in(body);
  auto expect = [&](const char* key) {
    std::string k;
    in >> k;
    if (k != key) throw ModelError(std::string("model: expected '") + key + "'");
  };
  std::size_t n_trees = 0;
  int bootstrap = 1;
  expect("feature_count");
  in >> m.feature_count;
  expect("trees");
  in >> n_trees;
  expect("mtry");
  in >> m.mtry;
  expect("min_leaf");
  in >> m.min_leaf;
  expect("bootstrap");
  in >> bootstrap;
  m.bootstrap = bootstrap != 0;
  expect("seed");
  in >> m.seed;
  if (!in) throw ModelError("model: malformed parameters");
  m.trees.resize(n_trees);
  for (auto& t : m.trees) {
    std::size_t n_nodes = 0;
    expect("tree");
    in >> n_nodes;
    if (!in || n_nodes == 0) throw ModelError("model: malformed tree");
    t.nodes.resize(n_nodes);
    for (std::size_t ni = 0; ni < n_nodes; ++ni) {
      TreeNode& node = t.nodes[ni];
      std::string thr, val;
      in >> node.feature >> thr >> node.left >> node.right >> val;
      if (!in) throw ModelError("model: malformed node");
      node.threshold = parse_hex_double(thr);
      node.value = parse_hex_double(val);
      if (node.feature >= 0 &&
          (std::size_t(node.feature) >= m.feature_count ||
           node.left >= n_nodes || node.right >= n_nodes ||
           node.left <= ni || node.right <= ni))
        throw ModelError("model: node references out of range");
      if (!std::isfinite(node.value)) throw ModelError("model: non-finite leaf");
    }
  }
  expect("end");
  return m;
}

}  // namespace sgr

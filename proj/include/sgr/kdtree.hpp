#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "sgr/point_cloud.hpp"

namespace sgr {

struct Neighbor {
  std::size_t index;
  double distance;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact k-nearest-neighbour index over a fixed set of 3D points.
///
/// Results are ordered by (distance, index): equal distances are broken by
/// ascending point index, so the output is a pure function of the point set
/// and the query.
class KdTree {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  KdTree() = default;

  explicit KdTree(const PointCloud& cloud, std::size_t leaf_size = 16)
      : KdTree(positions_of(cloud), leaf_size) {}

  explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 16)
      : leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    if (points.empty()) throw Error("kd-tree: empty cloud");
    const std::size_t n = points.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    source_ = std::move(points);
    nodes_.reserve(2 * n / leaf_size_ + 1);
    build(0, n);
    pts_.resize(n);
    for (std::size_t i = 0; i < n; ++i) pts_[i] = source_[order_[i]];
  }

  std::size_t size() const { return pts_.size(); }
  const Vec3& point(std::size_t i) const { return source_[i]; }

  /// Up to k nearest points to `query`. When `exclude` names an indexed
  /// point, that single index is skipped (other points at the same position
  /// are still returned).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k,
                            std::size_t exclude = npos) const {
    std::vector<Neighbor> out;
    knn(query, k, exclude, out);
    return out;
  }

  /// Buffer-reusing form of knn().
  void knn(const Vec3& query, std::size_t k, std::size_t exclude,
           std::vector<Neighbor>& out) const {
    if (k == 0) throw Error("kd-tree: k must be positive");
    Heap heap;
    heap.cap = std::min(k, size());
    heap.items.clear();
    heap.items.reserve(heap.cap + 1);
    search(0, query, exclude, heap);
    out.resize(heap.items.size());
    for (std::size_t i = 0; i < heap.items.size(); ++i)
      out[i] = {heap.items[i].index, std::sqrt(heap.items[i].d2)};
  }

  /// k nearest neighbours of indexed point i, excluding i itself.
  std::vector<Neighbor> knn_of(std::size_t i, std::size_t k) const {
    return knn(source_[i], k, i);
  }

  /// All indices whose squared distance to `query` is <= max_d2, ascending.
  std::vector<std::size_t> radius_search(const Vec3& query,
                                         double max_d2) const {
    std::vector<std::size_t> out;
    radius(0, query, max_d2, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    std::size_t begin, end;
    std::size_t left = 0, right = 0;  // 0 => leaf (root is never a child)
    int axis = 0;
    double split = 0.0;
  };

  struct Item {
    double d2;
    std::size_t index;
    bool operator<(const Item& o) const {
      return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
  };

  // Sorted bounded list; k is small so insertion beats a binary heap.
  struct Heap {
    std::size_t cap = 0;
    std::vector<Item> items;

    bool full() const { return items.size() == cap; }
    double worst() const { return items.back().d2; }

    void offer(const Item& it) {
      if (full() && !(it < items.back())) return;
      auto pos = std::upper_bound(items.begin(), items.end(), it);
      items.insert(pos, it);
      if (items.size() > cap) items.pop_back();
    }
  };

  static std::vector<Vec3> positions_of(const PointCloud& cloud) {
    std::vector<Vec3> p(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) p[i] = cloud.position(i);
    return p;
  }

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;

    Vec3 lo{std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-lo[0], -lo[1], -lo[2]};
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& p = source_[order_[i]];
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](std::size_t a, std::size_t b) {
                       const double va = source_[a][axis];
                       const double vb = source_[b][axis];
                       return va < vb || (va == vb && a < b);
                     });
    const double split = source_[order_[mid]][axis];
    const std::size_t l = build(begin, mid);
    const std::size_t r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    return id;
  }

  void search(std::size_t id, const Vec3& q, std::size_t exclude,
              Heap& heap) const {
    const Node& n = nodes_[id];
    if (n.left == 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx == exclude) continue;
        heap.offer({squared_distance(pts_[i], q), idx});
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::size_t near = diff < 0 ? n.left : n.right;
    const std::size_t far = diff < 0 ? n.right : n.left;
    search(near, q, exclude, heap);
    if (!heap.full() || diff * diff <= heap.worst())
      search(far, q, exclude, heap);
  }

  void radius(std::size_t id, const Vec3& q, double max_d2,
              std::vector<std::size_t>& out) const {
    const Node& n = nodes_[id];
    if (n.left == 0) {
      for (std::size_t i = n.begin; i < n.end; ++i)
        if (squared_distance(pts_[i], q) <= max_d2) out.push_back(order_[i]);
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::size_t near = diff < 0 ? n.left : n.right;
    const std::size_t far = diff < 0 ? n.right : n.left;
    radius(near, q, max_d2, out);
    if (diff * diff <= max_d2) radius(far, q, max_d2, out);
  }

  std::size_t leaf_size_ = 16;
  std::vector<Vec3> source_;       // by original index
  std::vector<Vec3> pts_;          // by tree position
  std::vector<std::size_t> order_; // tree position -> original index
  std::vector<Node> nodes_;
};

inline KdTree build_index(const PointCloud& cloud) { return KdTree(cloud); }

}  // namespace sgr

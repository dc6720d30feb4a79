#pragma once

#include <span>
#include <vector>

#include "sgr/kdtree.hpp"
#include "sgr/parallel.hpp"

namespace sgr {

/// k nearest neighbours (self excluded) of every indexed point, row-major.
/// Rows are prefixes-compatible: the first j entries of a row are the
/// j-nearest-neighbour answer for any j <= k.
struct NeighborTable {
  std::size_t k = 0;
  std::vector<Neighbor> entries;

  std::size_t rows() const { return k == 0 ? 0 : entries.size() / k; }

  std::span<const Neighbor> row(std::size_t i) const {
    return {entries.data() + i * k, k};
  }
  std::span<const Neighbor> row(std::size_t i, std::size_t count) const {
    return {entries.data() + i * k, std::min(count, k)};
  }
};

inline NeighborTable neighbor_table(const KdTree& index, std::size_t k,
                                    unsigned threads = 1) {
  if (k == 0) throw Error("neighbor table: k must be positive");
  NeighborTable t;
  const std::size_t n = index.size();
  t.k = std::min(k, n - 1);
  if (t.k == 0) return t;
  t.entries.resize(n * t.k);
  parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
    std::vector<Neighbor> buf;
    for (std::size_t i = b; i < e; ++i) {
      index.knn(index.point(i), t.k, i, buf);
      std::copy(buf.begin(), buf.end(), t.entries.begin() + i * t.k);
    }
  });
  return t;
}

}  // namespace sgr

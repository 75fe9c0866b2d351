#pragma once

#include "eelabel/error.hpp"
#include "eelabel/transform.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

namespace eelabel {

struct Neighbor {
  std::size_t id = 0;
  double dist2 = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.id < b.id);
  }
};

/// Exact k-nearest and radius queries over a fixed point set. Median-split
/// KD-tree with leaves of at most 16 points. The indexed positions are
/// copied, so the index does not borrow from its source cloud.
class SpatialIndex {
 public:
  static constexpr std::size_t kLeafSize = 16;

  SpatialIndex() = default;

  explicit SpatialIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 1);
      build(0, points_.size());
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(std::size_t id) const { return points_[id]; }

  /// k nearest points sorted by (distance, id); ties go to the lower id.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const {
    require_nonempty();
    if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
    k = std::min(k, points_.size());
    std::priority_queue<Neighbor> heap;  // max-heap on (dist2, id)
    knn_recurse(0, query, k, heap);
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

  /// Nearest point; equivalent to knn(query, 1).front() without the heap.
  Neighbor nearest(const Vec3& query) const {
    require_nonempty();
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    nearest_recurse(0, query, best);
    return best;
  }

  /// All points with distance <= radius, sorted by id.
  std::vector<Neighbor> radius(const Vec3& query, double r) const {
    std::vector<Neighbor> out;
    radius_into(query, r, out);
    return out;
  }

  /// Same as radius() but reuses the caller's buffer.
  void radius_into(const Vec3& query, double r, std::vector<Neighbor>& out) const {
    require_nonempty();
    if (!(r > 0.0)) throw Error(ErrorKind::kInvalidArgument, "radius must be > 0");
    out.clear();
    radius_recurse(0, query, r * r, out);
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
  }

 private:
  struct Node {
    // Leaf when split_dim < 0: points are order_[begin, end).
    std::size_t begin = 0;
    std::size_t end = 0;
    int split_dim = -1;
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    Vec3 lo;
    Vec3 hi;
  };

  void require_nonempty() const {
    if (points_.empty()) throw Error(ErrorKind::kEmptyIndex, "query on an empty index");
  }

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Vec3 lo = points_[order_[begin]];
    Vec3 hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= kLeafSize) return id;
    int dim = 0;
    (hi - lo).maxCoeff(&dim);
    if (hi[dim] == lo[dim]) return id;  // all coincident
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][dim] < points_[b][dim]; });
    nodes_[id].split_dim = dim;
    nodes_[id].split = points_[order_[mid]][dim];
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_dist2(const Node& n, const Vec3& q) {
    const Vec3 d = (n.lo - q).cwiseMax(q - n.hi).cwiseMax(0.0);
    return d.squaredNorm();
  }

  void knn_recurse(std::uint32_t ni, const Vec3& q, std::size_t k, std::priority_queue<Neighbor>& heap) const {
    const Node& n = nodes_[ni];
    if (heap.size() == k && box_dist2(n, q) > heap.top().dist2) return;
    if (n.split_dim < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    const bool go_left = q[n.split_dim] < n.split;
    knn_recurse(go_left ? n.left : n.right, q, k, heap);
    knn_recurse(go_left ? n.right : n.left, q, k, heap);
  }

  void nearest_recurse(std::uint32_t ni, const Vec3& q, Neighbor& best) const {
    const Node& n = nodes_[ni];
    if (box_dist2(n, q) > best.dist2) return;
    if (n.split_dim < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
        if (cand < best) best = cand;
      }
      return;
    }
    const bool go_left = q[n.split_dim] < n.split;
    nearest_recurse(go_left ? n.left : n.right, q, best);
    nearest_recurse(go_left ? n.right : n.left, q, best);
  }

  void radius_recurse(std::uint32_t ni, const Vec3& q, double r2, std::vector<Neighbor>& out) const {
    const Node& n = nodes_[ni];
    if (box_dist2(n, q) > r2) return;
    if (n.split_dim < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const double d2 = (points_[order_[i]] - q).squaredNorm();
        if (d2 <= r2) out.push_back({order_[i], d2});
      }
      return;
    }
    radius_recurse(n.left, q, r2, out);
    radius_recurse(n.right, q, r2, out);
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace eelabel

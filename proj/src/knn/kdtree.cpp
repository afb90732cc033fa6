#include "benchsynth/knn/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "benchsynth/common/errors.hpp"

namespace benchsynth::knn {

KdTree::KdTree(const PointSet& points, std::size_t leaf_size)
    : points_(&points), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  order_.resize(points.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!order_.empty()) {
    nodes_.reserve(2 * (points.size() / leaf_size_ + 1));
    build(0, static_cast<std::uint32_t>(order_.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  const std::size_t dim = points_->dim();
  std::uint32_t best_dim = 0;
  double best_spread = -1.0;
  for (std::size_t d = 0; d < dim; ++d) {
    double lo = points_->row(order_[begin])[d];
    double hi = lo;
    for (auto i = begin + 1; i < end; ++i) {
      double v = points_->row(order_[i])[d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = static_cast<std::uint32_t>(d);
    }
  }
  if (best_spread <= 0.0) return id;  // all points coincide: keep as a leaf

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [this, best_dim](std::uint32_t a, std::uint32_t b) {
                     return points_->row(a)[best_dim] < points_->row(b)[best_dim];
                   });
  const double split = points_->row(order_[mid])[best_dim];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  auto& node = nodes_[static_cast<std::size_t>(id)];
  node.left = left;
  node.right = right;
  node.split_dim = best_dim;
  node.split_value = split;
  return id;
}

void KdTree::search(std::int32_t node_id, std::span<const double> query, std::size_t k,
                    std::size_t skip, std::vector<double>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const std::uint32_t p = order_[i];
      if (p == skip) continue;
      const double d2 = squared_distance(query, points_->row(p));
      if (heap.size() < k) {
        heap.push_back(d2);
        std::push_heap(heap.begin(), heap.end());
      } else if (d2 < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = d2;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double diff = query[node.split_dim] - node.split_value;
  const auto near = diff < 0.0 ? node.left : node.right;
  const auto far = diff < 0.0 ? node.right : node.left;
  search(near, query, k, skip, heap);
  // Points beyond the plane are at least |diff| away; equal distances cannot
  // change the k-th value, so a strict bound suffices.
  if (heap.size() < k || diff * diff < heap.front()) search(far, query, k, skip, heap);
}

double KdTree::kth_distance(std::span<const double> query, std::size_t k,
                            std::size_t skip) const {
  const std::size_t available = size() - (skip < size() ? 1 : 0);
  if (k == 0 || k > available) {
    throw InsufficientPoints("k=" + std::to_string(k) + " needs more than " +
                             std::to_string(available) + " candidate points");
  }
  std::vector<double> heap;
  heap.reserve(k);
  search(0, query, k, skip, heap);
  return std::sqrt(heap.front());
}

namespace parallel {

std::vector<double> kth_distances_self(const PointSet& points, std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0 || k + 1 > n) {
    throw InsufficientPoints("k=" + std::to_string(k) + " needs at least " +
                             std::to_string(k + 1) + " points, have " + std::to_string(n));
  }
  const KdTree tree(points);
  std::vector<double> out(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto u = static_cast<std::size_t>(i);
    out[u] = tree.kth_distance(points.row(u), k, u);
  }
  return out;
}

std::vector<double> kth_distances_cross(const PointSet& queries, const PointSet& reference,
                                        std::size_t k) {
  if (queries.size() > 0 && queries.dim() != reference.dim()) {
    throw DimensionMismatch("query and reference dimensions differ");
  }
  if (k == 0 || k > reference.size()) {
    throw InsufficientPoints("k=" + std::to_string(k) + " exceeds reference size " +
                             std::to_string(reference.size()));
  }
  const KdTree tree(reference);
  std::vector<double> out(queries.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i) {
    const auto u = static_cast<std::size_t>(i);
    out[u] = tree.kth_distance(queries.row(u), k);
  }
  return out;
}

}  // namespace parallel
}  // namespace benchsynth::knn

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "benchsynth/knn/point_set.hpp"

namespace benchsynth::knn {

// Exact k-d tree over a PointSet (which must outlive the tree). Queries are
// const and safe to run concurrently.
class KdTree {
 public:
  static constexpr std::size_t kNoSkip = std::numeric_limits<std::size_t>::max();

  explicit KdTree(const PointSet& points, std::size_t leaf_size = 16);

  // k-th smallest distance from `query` to the indexed points, ignoring the
  // point with index `skip`. Requires k <= size (minus one when skipping).
  double kth_distance(std::span<const double> query, std::size_t k,
                      std::size_t skip = kNoSkip) const;

  std::size_t size() const { return points_->size(); }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t split_dim = 0;
    double split_value = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, std::span<const double> query, std::size_t k,
              std::size_t skip, std::vector<double>& heap) const;

  const PointSet* points_;
  std::size_t leaf_size_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

namespace parallel {

// OpenMP kernels: one tree build, queries distributed across threads.
// Output matches the reference kernels bit for bit.
std::vector<double> kth_distances_self(const PointSet& points, std::size_t k);
std::vector<double> kth_distances_cross(const PointSet& queries, const PointSet& reference,
                                        std::size_t k);

}  // namespace parallel

}  // namespace benchsynth::knn

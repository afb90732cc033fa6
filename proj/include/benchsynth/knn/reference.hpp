#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "benchsynth/knn/point_set.hpp"

namespace benchsynth::knn::reference {

// Serial all-pairs k-th nearest neighbour kernels. Kept as the oracle for
// the tree kernels; O(n^2) and single-threaded on purpose.

// out[i] = distance from point i to its k-th nearest neighbour among the
// other points of `points`.
std::vector<double> kth_distances_self(const PointSet& points, std::size_t k);

// out[i] = distance from queries[i] to its k-th nearest neighbour in `reference`.
std::vector<double> kth_distances_cross(const PointSet& queries, const PointSet& reference,
                                        std::size_t k);

// k-th smallest distance from `query` to `points`; if `skip` < size, that
// point is ignored.
double kth_distance(const PointSet& points, std::span<const double> query, std::size_t k,
                    std::size_t skip);

}  // namespace benchsynth::knn::reference

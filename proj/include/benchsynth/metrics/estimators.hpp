#pragma once

#include <cstddef>
#include <span>

#include "benchsynth/knn/point_set.hpp"

namespace benchsynth::metrics {

using knn::PointSet;

// Distances are floored here before taking logs so coincident points do not
// produce -inf.
inline constexpr double kDistanceFloor = 1e-12;

enum class KnnBackend {
  kReference,  // serial all-pairs scan
  kTree,       // OpenMP k-d tree
};

// Exact k-th smallest Euclidean distance from `query` to `points`. With
// exclude_self, one point coinciding with the query is ignored.
double kth_nn_distance(const PointSet& points, std::span<const double> query, std::size_t k,
                       bool exclude_self);

// k-NN estimate of D(q || p) in nats, q sampled by `candidate` (m points)
// and p by `baseline` (n points):
//   (d/m) * sum_i log(nu_k(i) / rho_k(i)) + log(n / (m - 1))
// nu_k(i): distance from y_i to its k-th neighbour in the baseline.
// rho_k(i): distance from y_i to its k-th neighbour among the other y.
// Not clamped; can be negative when the candidate is a tight subset.
double kl_divergence(const PointSet& candidate, const PointSet& baseline, std::size_t k,
                     KnnBackend backend = KnnBackend::kTree);

// Kozachenko-Leonenko differential entropy in nats:
//   psi(N) - psi(k) + log V_d + (d/N) * sum_i log rho_k(i)
double differential_entropy(const PointSet& points, std::size_t k,
                            KnnBackend backend = KnnBackend::kTree);

}  // namespace benchsynth::metrics

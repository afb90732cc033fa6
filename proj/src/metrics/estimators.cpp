#include "benchsynth/metrics/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "benchsynth/common/errors.hpp"
#include "benchsynth/knn/kdtree.hpp"
#include "benchsynth/knn/reference.hpp"
#include "benchsynth/metrics/special.hpp"

namespace benchsynth::metrics {
namespace {

std::vector<double> self_distances(const PointSet& points, std::size_t k, KnnBackend backend) {
  return backend == KnnBackend::kReference ? knn::reference::kth_distances_self(points, k)
                                           : knn::parallel::kth_distances_self(points, k);
}

std::vector<double> cross_distances(const PointSet& queries, const PointSet& reference,
                                    std::size_t k, KnnBackend backend) {
  return backend == KnnBackend::kReference
             ? knn::reference::kth_distances_cross(queries, reference, k)
             : knn::parallel::kth_distances_cross(queries, reference, k);
}

double floored_log(double distance) { return std::log(std::max(distance, kDistanceFloor)); }

}  // namespace

double kth_nn_distance(const PointSet& points, std::span<const double> query, std::size_t k,
                       bool exclude_self) {
  if (!points.empty() && query.size() != points.dim()) {
    throw DimensionMismatch("query dimension " + std::to_string(query.size()) +
                            " != point dimension " + std::to_string(points.dim()));
  }
  std::size_t skip = points.size();
  if (exclude_self) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (knn::squared_distance(query, points.row(j)) == 0.0) {
        skip = j;
        break;
      }
    }
  }
  return knn::reference::kth_distance(points, query, k, skip);
}

double kl_divergence(const PointSet& candidate, const PointSet& baseline, std::size_t k,
                     KnnBackend backend) {
  const std::size_t m = candidate.size();
  const std::size_t n = baseline.size();
  if (m > 0 && n > 0 && candidate.dim() != baseline.dim()) {
    throw DimensionMismatch("candidate dimension " + std::to_string(candidate.dim()) +
                            " != baseline dimension " + std::to_string(baseline.dim()));
  }
  if (k < 1 || m < k + 1 || n < k) {
    throw InsufficientPoints("kl_divergence needs m >= k+1 and n >= k (k=" + std::to_string(k) +
                             ", m=" + std::to_string(m) + ", n=" + std::to_string(n) + ")");
  }
  const auto rho = self_distances(candidate, k, backend);
  const auto nu = cross_distances(candidate, baseline, k, backend);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum += floored_log(nu[i]) - floored_log(rho[i]);
  const double d = static_cast<double>(candidate.dim());
  return d / static_cast<double>(m) * sum +
         std::log(static_cast<double>(n) / static_cast<double>(m - 1));
}

double differential_entropy(const PointSet& points, std::size_t k, KnnBackend backend) {
  const std::size_t count = points.size();
  if (k < 1 || count < k + 1) {
    throw InsufficientPoints("differential_entropy needs N >= k+1 (k=" + std::to_string(k) +
                             ", N=" + std::to_string(count) + ")");
  }
  const auto rho = self_distances(points, k, backend);
  double sum = 0.0;
  for (double r : rho) sum += floored_log(r);
  const double d = static_cast<double>(points.dim());
  const double big_n = static_cast<double>(count);
  return digamma(big_n) - digamma(static_cast<double>(k)) +
         log_unit_ball_volume(static_cast<int>(points.dim())) + d / big_n * sum;
}

}  // namespace benchsynth::metrics

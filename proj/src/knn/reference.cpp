#include "benchsynth/knn/reference.hpp"

#include <algorithm>
#include <cmath>

#include "benchsynth/common/errors.hpp"

namespace benchsynth::knn {

PointSet::PointSet(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0 && !coords_.empty()) throw DimensionMismatch("zero-dimensional points");
  if (dim_ != 0 && coords_.size() % dim_ != 0) {
    throw DimensionMismatch("coordinate count is not a multiple of the dimension");
  }
}

PointSet PointSet::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  std::size_t dim = rows.front().size();
  std::vector<double> coords;
  coords.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw DimensionMismatch("ragged point rows");
    coords.insert(coords.end(), r.begin(), r.end());
  }
  return PointSet(dim, std::move(coords));
}

void PointSet::push_back(std::span<const double> point) {
  if (dim_ == 0) dim_ = point.size();
  if (point.size() != dim_) throw DimensionMismatch("point dimension mismatch");
  coords_.insert(coords_.end(), point.begin(), point.end());
}

PointSet PointSet::subset(std::span<const std::size_t> indices) const {
  std::vector<double> coords;
  coords.reserve(indices.size() * dim_);
  for (auto i : indices) {
    auto r = row(i);
    coords.insert(coords.end(), r.begin(), r.end());
  }
  return PointSet(dim_, std::move(coords));
}

PointSet PointSet::scaled(double factor) const {
  auto coords = coords_;
  for (auto& c : coords) c *= factor;
  return PointSet(dim_, std::move(coords));
}

namespace reference {

double kth_distance(const PointSet& points, std::span<const double> query, std::size_t k,
                    std::size_t skip) {
  const std::size_t n = points.size();
  const std::size_t available = n - (skip < n ? 1 : 0);
  if (k == 0 || k > available) {
    throw InsufficientPoints("k=" + std::to_string(k) + " needs more than " +
                             std::to_string(available) + " candidate points");
  }
  std::vector<double> d2;
  d2.reserve(available);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == skip) continue;
    d2.push_back(squared_distance(query, points.row(j)));
  }
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(k - 1), d2.end());
  return std::sqrt(d2[k - 1]);
}

std::vector<double> kth_distances_self(const PointSet& points, std::size_t k) {
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = kth_distance(points, points.row(i), k, i);
  }
  return out;
}

std::vector<double> kth_distances_cross(const PointSet& queries, const PointSet& reference,
                                        std::size_t k) {
  if (queries.size() > 0 && queries.dim() != reference.dim()) {
    throw DimensionMismatch("query and reference dimensions differ");
  }
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out[i] = kth_distance(reference, queries.row(i), k, reference.size());
  }
  return out;
}

}  // namespace reference
}  // namespace benchsynth::knn

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace benchsynth::knn {

// Row-major set of points in R^dim.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t dim, std::vector<double> coords);
  static PointSet from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return size() == 0; }

  std::span<const double> row(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) { return {coords_.data() + i * dim_, dim_}; }
  const std::vector<double>& coords() const { return coords_; }

  void push_back(std::span<const double> point);
  PointSet subset(std::span<const std::size_t> indices) const;
  PointSet scaled(double factor) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

// Accumulates in coordinate order. Every kernel goes through this function
// so the brute-force and tree paths produce bit-identical distances.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace benchsynth::knn

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "benchsynth/knn/point_set.hpp"

namespace testsupport {

inline benchsynth::knn::PointSet gaussian(std::size_t n, std::size_t d, std::mt19937_64& rng,
                                          std::vector<double> mean = {}, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> coords(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      coords[i * d + j] = dist(rng) + (j < mean.size() ? mean[j] : 0.0);
  return benchsynth::knn::PointSet(d, std::move(coords));
}

inline benchsynth::knn::PointSet uniform(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> coords(n * d);
  for (auto& c : coords) c = dist(rng);
  return benchsynth::knn::PointSet(d, std::move(coords));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("benchsynth-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "benchsynth/knn/kdtree.hpp"
#include "benchsynth/knn/reference.hpp"
#include "support/sampling.hpp"

using benchsynth::knn::KdTree;
using benchsynth::knn::PointSet;
namespace ref = benchsynth::knn::reference;
namespace par = benchsynth::knn::parallel;

namespace {

// Sorts every distance and picks the k-th; shares nothing with the kernels.
double sorted_kth(const PointSet& pts, std::span<const double> q, std::size_t k,
                  std::size_t skip) {
  std::vector<double> d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i == skip) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < pts.dim(); ++j) s += (q[j] - pts.row(i)[j]) * (q[j] - pts.row(i)[j]);
    d.push_back(std::sqrt(s));
  }
  std::sort(d.begin(), d.end());
  return d[k - 1];
}

}  // namespace

TEST_CASE("reference self distances match a full sort") {
  std::mt19937_64 rng(11);
  auto pts = testsupport::gaussian(500, 3, rng);
  auto got = ref::kth_distances_self(pts, 7);
  REQUIRE(got.size() == 500);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(got[i] == doctest::Approx(sorted_kth(pts, pts.row(i), 7, i)).epsilon(1e-12));
  }
}

TEST_CASE("tree kernels are bit-identical to the reference") {
  std::mt19937_64 rng(5);
  for (std::size_t d : {1u, 2u, 5u, 12u}) {
    auto a = testsupport::gaussian(700, d, rng);
    auto b = testsupport::uniform(400, d, rng);
    for (std::size_t k : {1u, 4u, 9u}) {
      CHECK(par::kth_distances_self(a, k) == ref::kth_distances_self(a, k));
      CHECK(par::kth_distances_cross(b, a, k) == ref::kth_distances_cross(b, a, k));
    }
  }
}

TEST_CASE("tree handles duplicates and tiny leaves") {
  PointSet pts = PointSet::from_rows({{0, 0}, {0, 0}, {0, 0}, {1, 1}, {2, 2}, {0, 0}});
  KdTree tree(pts, 1);
  std::vector<double> q{0, 0};
  CHECK(tree.kth_distance(q, 3) == 0.0);
  CHECK(tree.kth_distance(q, 4) == 0.0);
  CHECK(tree.kth_distance(q, 5) == doctest::Approx(std::sqrt(2.0)));
  CHECK(tree.kth_distance(q, 4, 0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("point set helpers") {
  PointSet pts = PointSet::from_rows({{1, 2}, {3, 4}, {5, 6}});
  CHECK(pts.size() == 3);
  CHECK(pts.dim() == 2);
  std::vector<std::size_t> idx{2, 0};
  auto sub = pts.subset(idx);
  CHECK(sub.row(0)[0] == 5);
  CHECK(sub.row(1)[1] == 2);
  auto sc = pts.scaled(2.0);
  CHECK(sc.row(1)[1] == 8);
}

#include "benchsynth/metrics/protocols.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <random>
#include <string>

#include "benchsynth/common/digest.hpp"
#include "benchsynth/common/errors.hpp"
#include "benchsynth/common/stats.hpp"

namespace benchsynth::metrics {

NoveltyEstimate novelty_protocol(std::span<const PointSet> candidate_runs,
                                 std::span<const PointSet> baseline_runs, std::size_t k) {
  if (candidate_runs.size() != baseline_runs.size()) {
    throw DataError("candidate and baseline run counts differ");
  }
  if (candidate_runs.empty()) throw DataError("novelty needs at least one projection run");
  NoveltyEstimate est;
  est.k = k;
  est.d = candidate_runs.front().dim();
  est.m = candidate_runs.front().size();
  est.n = baseline_runs.front().size();
  for (std::size_t r = 0; r < candidate_runs.size(); ++r) {
    est.per_run.push_back(kl_divergence(candidate_runs[r], baseline_runs[r], k));
  }
  auto s = summarize(est.per_run);
  est.value = s.mean;
  est.ci95 = s.ci95;
  return est;
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::uint64_t seed) {
  if (count > population) throw DataError("sample larger than population");
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

DiversityEstimate diversity_protocol(std::span<const PointSet> runs, std::size_t subsample,
                                     std::size_t trials, std::size_t k, std::uint64_t seed) {
  if (runs.empty()) throw DataError("diversity needs at least one projection run");
  if (trials == 0) throw DataError("diversity needs at least one trial");
  for (const auto& r : runs) {
    if (subsample > r.size()) {
      throw DataError("subsample N=" + std::to_string(subsample) + " exceeds dataset size " +
                      std::to_string(r.size()));
    }
  }
  if (k < 1 || k + 1 > subsample) {
    throw InsufficientPoints("diversity needs k <= N-1 (k=" + std::to_string(k) +
                             ", N=" + std::to_string(subsample) + ")");
  }
  DiversityEstimate est;
  est.trials = trials;
  est.runs = runs.size();
  est.subsample = subsample;
  est.k = k;
  est.d = runs.front().dim();
  est.seed = seed;
  est.per_trial.assign(runs.size() * trials, 0.0);

  const auto total = static_cast<std::ptrdiff_t>(est.per_trial.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < total; ++t) {
    try {
      const auto u = static_cast<std::size_t>(t);
      const auto& points = runs[u / trials];
      const auto idx = sample_without_replacement(points.size(), subsample, derive_seed(seed, u));
      est.per_trial[u] = differential_entropy(points.subset(idx), k);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  auto s = summarize(est.per_trial);
  est.value = s.mean;
  est.ci95 = s.ci95;
  return est;
}

}  // namespace benchsynth::metrics

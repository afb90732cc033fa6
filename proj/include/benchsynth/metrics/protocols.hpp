#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "benchsynth/metrics/estimators.hpp"

namespace benchsynth::metrics {

struct NoveltyEstimate {
  double value = 0.0;               // mean of per_run, nats
  std::vector<double> per_run;
  double ci95 = 0.0;                // 1.96 * s / sqrt(runs)
  std::size_t k = 0;
  std::size_t d = 0;
  std::size_t n = 0;                // baseline size
  std::size_t m = 0;                // candidate size
};

struct DiversityEstimate {
  double value = 0.0;               // mean over runs x trials, nats
  std::vector<double> per_trial;    // run-major
  double ci95 = 0.0;
  std::size_t trials = 0;
  std::size_t runs = 0;
  std::size_t subsample = 0;
  std::size_t k = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultNoveltyK = 4;

// KL estimate per projection run (candidate_runs[r] against
// baseline_runs[r]) averaged across runs.
NoveltyEstimate novelty_protocol(std::span<const PointSet> candidate_runs,
                                 std::span<const PointSet> baseline_runs,
                                 std::size_t k = kDefaultNoveltyK);

// Per run, `trials` subsamples of size `subsample` drawn without
// replacement; each trial has its own generator seeded from (seed, run,
// trial) so results do not depend on thread scheduling.
DiversityEstimate diversity_protocol(std::span<const PointSet> runs, std::size_t subsample,
                                     std::size_t trials, std::size_t k, std::uint64_t seed);

// Sorted indices of a uniform size-`count` subset of [0, population).
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::uint64_t seed);

}  // namespace benchsynth::metrics

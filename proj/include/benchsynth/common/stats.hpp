#pragma once

#include <span>

namespace benchsynth {

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;     // sample standard deviation (n - 1)
  double ci95 = 0.0;       // half-width, 1.96 * stddev / sqrt(n)
  std::size_t count = 0;
};

// Normal-approximation summary of a list of per-run or per-trial values.
Summary summarize(std::span<const double> values);

}  // namespace benchsynth

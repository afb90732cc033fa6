#include "benchsynth/common/stats.hpp"

#include <cmath>

namespace benchsynth {

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  s.ci95 = 1.96 * s.stddev / std::sqrt(static_cast<double>(values.size()));
  return s;
}

}  // namespace benchsynth

#include "benchsynth/metrics/special.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "benchsynth/common/errors.hpp"

namespace benchsynth::metrics {

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DataError("digamma requires a positive finite argument, got " + std::to_string(x));
  }
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number coefficients B_2n / (2n)
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
  return shift + std::log(x) - 0.5 * inv - series;
}

double log_unit_ball_volume(int d) {
  if (d < 1) throw DataError("unit ball dimension must be >= 1");
  const double half = 0.5 * d;
  return half * std::log(std::numbers::pi) - std::lgamma(half + 1.0);
}

}  // namespace benchsynth::metrics

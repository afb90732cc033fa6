#pragma once

namespace benchsynth::metrics {

// psi(x) for x > 0: upward recurrence to x >= 10, then the asymptotic
// series. Absolute error below 1e-12 over the domain used here.
double digamma(double x);

// log of the volume of the unit ball in R^d, log(pi^(d/2) / Gamma(d/2 + 1)).
double log_unit_ball_volume(int d);

}  // namespace benchsynth::metrics

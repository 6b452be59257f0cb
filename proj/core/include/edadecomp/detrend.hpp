#pragma once

#include "edadecomp/decomposition.hpp"
#include "edadecomp/signal.hpp"

#include <span>

namespace edadecomp {

// tonic(t) = intercept + slope * t, t in seconds from the frame start.
struct LinearTrend {
  double slope = 0.0;     // µS/s
  double intercept = 0.0; // µS at t = 0
};

// Exact Theil-Sen estimate over all n(n-1)/2 sample pairs: slope is the median
// pairwise slope, intercept the median of x_i - slope * t_i. Even-sized medians
// average the two middle order statistics.
LinearTrend theil_sen(std::span<const double> x, double fs);
LinearTrend theil_sen(const Frame& frame);

Decomposition detrend_decompose(const Frame& frame);

} // namespace edadecomp

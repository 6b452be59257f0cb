#include "edadecomp/detrend.hpp"

#include "edadecomp/errors.hpp"

#include <algorithm>
#include <vector>

namespace edadecomp {

namespace {

// Median via selection; reorders `v`.
double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1)
    return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

} // namespace

LinearTrend theil_sen(std::span<const double> x, double fs) {
  const std::size_t n = x.size();
  if (n < 2)
    throw DataError("Theil-Sen needs at least 2 samples");
  if (!(fs > 0.0))
    throw ConfigError("sampling rate must be positive");

  std::vector<double> slopes;
  slopes.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double xi = x[i];
    for (std::size_t j = i + 1; j < n; ++j)
      slopes.push_back((x[j] - xi) * fs / static_cast<double>(j - i));
  }
  LinearTrend trend;
  trend.slope = median_inplace(slopes);

  std::vector<double> offsets(n);
  for (std::size_t i = 0; i < n; ++i)
    offsets[i] = x[i] - trend.slope * (static_cast<double>(i) / fs);
  trend.intercept = median_inplace(offsets);
  return trend;
}

LinearTrend theil_sen(const Frame& frame) { return theil_sen(frame.samples(), Frame::fs()); }

Decomposition detrend_decompose(const Frame& frame) {
  const auto trend = theil_sen(frame);
  std::vector<double> tonic(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i)
    tonic[i] = trend.intercept + trend.slope * Frame::time_of(i);
  return residual_decomposition(frame, std::move(tonic), "detrend");
}

} // namespace edadecomp

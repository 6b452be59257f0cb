#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace edadecomp {

inline constexpr double kFrameRateHz = 8.0;
inline constexpr double kFrameSeconds = 180.0;
inline constexpr std::size_t kFrameLength = 1440;

// Uniformly sampled skin-conductance trace in microsiemens.
struct EdaSignal {
  std::vector<double> samples;
  double fs = kFrameRateHz;
  std::optional<double> origin; // start time, seconds since epoch

  std::size_t size() const { return samples.size(); }
  double duration() const;

  // Throws DataError on empty or non-finite samples, ConfigError on fs <= 0.
  void validate() const;
};

// One 3-minute window at 8 Hz. Always exactly kFrameLength samples.
class Frame {
public:
  Frame() = default;
  Frame(std::vector<double> samples, std::size_t index);

  std::span<const double> samples() const { return samples_; }
  const std::vector<double>& values() const { return samples_; }
  std::size_t index() const { return index_; }
  static constexpr double fs() { return kFrameRateHz; }
  std::size_t size() const { return samples_.size(); }
  double operator[](std::size_t i) const { return samples_[i]; }

  // Time of sample i in seconds from the frame start.
  static constexpr double time_of(std::size_t i) { return static_cast<double>(i) / kFrameRateHz; }

private:
  std::vector<double> samples_;
  std::size_t index_ = 0;
};

struct FilterSpec {
  double cutoff_hz = 3.0;
  int order = 4;
};

// Direct-form II transposed biquad coefficients, a0 normalised to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

// Digital Butterworth low-pass as a cascade of second-order sections, each
// with unit DC gain. Odd orders end with a first-order section (b2 = a2 = 0).
std::vector<Biquad> design_butterworth_lowpass(const FilterSpec& spec, double fs);

// |H(e^{j 2 pi f / fs})| of a section cascade.
double magnitude_response(std::span<const Biquad> sections, double f_hz, double fs);

// Causal single pass, zero initial state.
std::vector<double> sos_filter(std::span<const Biquad> sections, std::span<const double> x);

// Zero-phase low-pass: reflect-pad by 3*order samples, forward-backward pass
// with steady-state initial conditions, trim.
EdaSignal butterworth_lowpass(const EdaSignal& signal, const FilterSpec& spec);

// Single forward pass of the same design (used to measure the gain response).
EdaSignal butterworth_lowpass_single_pass(const EdaSignal& signal, const FilterSpec& spec);

// Linear-interpolation resampling onto a uniform grid at target_hz covering
// [0, duration]. Integer ratios land exactly on source samples.
EdaSignal resample(const EdaSignal& signal, double target_hz);

// Non-overlapping 1440-sample windows; a trailing partial window is dropped.
std::vector<Frame> frame(const EdaSignal& signal);

} // namespace edadecomp

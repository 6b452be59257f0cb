#pragma once

#include "edadecomp/decomposition.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace edadecomp {

enum class SlopeClass { falling = 0, stable = 1, rising = 2 };

std::string to_string(SlopeClass c);

inline constexpr double kSlopeBoundary = 0.001;   // µS/s
inline constexpr double kMinPeakAmplitude = 0.01; // µS
inline constexpr std::size_t kMinPeakDistance = 8; // samples (1 s at 8 Hz)

struct Peak {
  std::size_t index = 0;
  double amplitude = 0.0; // peak value minus the trough since the previous peak
};

struct FrameFeatures {
  std::size_t frame_index = 0;
  double slope = 0.0;
  SlopeClass slope_class = SlopeClass::stable;
  std::size_t peak_count = 0;
  std::vector<double> amplitudes;
  std::vector<std::size_t> peak_indices;
  double phasic_range = 0.0;
};

// (last - first) / frame duration, in µS/s.
double tonic_slope(std::span<const double> tonic, double fs = 8.0);

// Closed stable band: |slope| <= 0.001 is Stable.
SlopeClass classify_slope(double slope);

// Strict local maxima (plateaus resolved to their midpoint), amplitude
// measured from the lowest point since the previous accepted peak (or frame
// start), amplitude >= 0.01 µS, at least 8 samples between peaks with the
// higher peak winning a conflict. Scans left to right.
std::vector<Peak> detect_peaks(std::span<const double> phasic);

FrameFeatures frame_features(const Decomposition& d);

// Histogram layouts. Bins are half-open [lower, upper).
struct HistogramSpec {
  std::string name;
  std::vector<std::string> labels;
  std::vector<double> edges; // interior boundaries, labels.size() - 1 of them
};

const HistogramSpec& slope_histogram();
const HistogramSpec& peak_count_histogram();
const HistogramSpec& amplitude_histogram();
const HistogramSpec& phasic_range_histogram();

std::size_t bin_index(const HistogramSpec& spec, double value);

struct Histogram {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  double percent(std::size_t bin) const;
  // Rounded to integers so that they sum to exactly 100 (largest remainder).
  std::vector<int> display_percent() const;
};

struct MethodSummary {
  std::string method;
  std::size_t frames = 0;
  std::size_t failed_frames = 0;
  Histogram slope;
  Histogram peak_count;
  Histogram amplitude;
  Histogram phasic_range;
  double mean_peaks = 0.0;     // over frames
  double mean_amplitude = 0.0; // over all peaks
};

struct HistogramReport {
  std::vector<MethodSummary> methods; // in the order given to aggregate()
};

// Per-method feature lists (insertion order preserved). Throws DataError for
// an empty method list or a method without frames.
using MethodFeatures = std::vector<std::pair<std::string, std::vector<FrameFeatures>>>;
HistogramReport aggregate(const MethodFeatures& features);

// Aligned plain-text tables: slope classes, peak counts, amplitudes, ranges.
std::string render_tables(const HistogramReport& report);

// One row per (method, histogram, bin): method,histogram,bin,count,total,percent
std::string render_csv(const HistogramReport& report);

} // namespace edadecomp

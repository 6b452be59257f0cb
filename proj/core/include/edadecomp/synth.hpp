#pragma once

#include "edadecomp/signal.hpp"
#include "edadecomp/text.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace edadecomp {

// Time constants of the biexponential SCR kernel, in seconds.
struct BatemanParams {
  double tau_rise = 0.7;
  double tau_decay = 2.0;

  // Throws SpecError unless 0 < tau_rise < tau_decay.
  void validate() const;
  // Location of the kernel's single interior maximum.
  double peak_time() const;
};

// exp(-t/tau_decay) - exp(-t/tau_rise); zero for t <= 0.
double bateman(double t, const BatemanParams& p);

// Kernels are cut off after this many seconds (tail < 1e-6 of peak for the defaults).
inline constexpr double kKernelSupportSeconds = 30.0;

// Sampled kernel on the grid k/fs, k in [0, 30 s), scaled so its sampled
// maximum is exactly 1. Shared by the generator and the deconvolution dictionary.
std::vector<double> sampled_kernel(const BatemanParams& p, double fs);

struct ScrEvent {
  double onset_s = 0.0;
  double amplitude = 0.0; // peak height, µS
};

enum class TonicKind { constant, linear, spline, step };

std::string to_string(TonicKind kind);
TonicKind tonic_kind_from_string(const std::string& name);

// tonic_params per kind:
//   constant: {level}
//   linear:   {level_at_start, slope_per_second}
//   spline:   knot values (>= 2) equally spaced over the frame, natural cubic
//   step:     {level_before, ramp_start_s, ramp_end_s, delta}
struct SynthSpec {
  TonicKind tonic_kind = TonicKind::constant;
  std::vector<double> tonic_params{1.0};
  std::vector<ScrEvent> events;
  double noise_sigma = 0.0;
  BatemanParams bateman;
  std::uint64_t seed = 0;
  std::size_t frame_index = 0;
};

struct GroundTruth {
  std::vector<double> tonic;
  std::vector<double> phasic;
  std::vector<ScrEvent> events; // onsets snapped to the sample grid
};

// Tonic level at time t (seconds) for the given spec.
double tonic_at(const SynthSpec& spec, double t);

// frame = tonic + phasic + N(0, sigma^2). Onsets are snapped to the nearest
// sample so every event kernel peaks at exactly its amplitude. Throws
// SpecError for invalid specs or any negative generated conductance.
std::pair<Frame, GroundTruth> generate_frame(const SynthSpec& spec);

// Step-down of 0.5 µS ramped over [110, 125] s with three SCRs away from it.
SynthSpec step_scl_spec(std::uint64_t seed);
std::pair<Frame, GroundTruth> scenario_step_scl(std::uint64_t seed);

inline constexpr double kStepSclHeight = 0.5;
inline constexpr double kStepSclWindowStart = 105.0;
inline constexpr double kStepSclWindowEnd = 130.0;

// Ranges for randomly drawn specs used to build synthetic corpora.
struct CorpusOptions {
  TonicKind tonic_kind = TonicKind::linear;
  double level_min = 1.0, level_max = 6.0;
  double slope_min = -0.004, slope_max = 0.004; // µS/s, linear kind
  double spline_spread = 0.3;                   // µS, spline kind knot jitter
  std::size_t min_events = 0, max_events = 8;
  double amplitude_min = 0.02, amplitude_max = 0.6;
  double min_spacing_s = 4.0;
  double noise_sigma = 0.01;
  BatemanParams bateman;
};

SynthSpec random_spec(std::uint64_t seed, const CorpusOptions& opt);

// Deterministic standard normal draws (Box-Muller over mt19937_64) so noise
// is identical across standard libraries.
class NormalSource {
public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}
  double uniform(); // [0, 1)
  double normal();
  std::uint64_t next_u64() { return engine_(); }

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

KeyValues to_key_values(const SynthSpec& spec);
// Throws ConfigError on unknown keys or malformed values.
SynthSpec synth_spec_from_key_values(const KeyValues& kv);

} // namespace edadecomp

#include "edadecomp/synth.hpp"

#include "edadecomp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace edadecomp {

void BatemanParams::validate() const {
  if (!(tau_rise > 0.0) || !(tau_decay > tau_rise) || !std::isfinite(tau_decay))
    throw SpecError("Bateman parameters require 0 < tau_rise < tau_decay");
}

double BatemanParams::peak_time() const {
  return tau_rise * tau_decay / (tau_decay - tau_rise) * std::log(tau_decay / tau_rise);
}

double bateman(double t, const BatemanParams& p) {
  if (t <= 0.0)
    return 0.0;
  return std::exp(-t / p.tau_decay) - std::exp(-t / p.tau_rise);
}

std::vector<double> sampled_kernel(const BatemanParams& p, double fs) {
  p.validate();
  const auto len = static_cast<std::size_t>(std::ceil(kKernelSupportSeconds * fs - 1e-9));
  std::vector<double> k(len);
  for (std::size_t i = 0; i < len; ++i)
    k[i] = bateman(static_cast<double>(i) / fs, p);
  const double peak = *std::max_element(k.begin(), k.end());
  if (!(peak > 0.0))
    throw SpecError("sampled Bateman kernel has no positive sample at this rate");
  for (double& v : k)
    v /= peak;
  return k;
}

std::string to_string(TonicKind kind) {
  switch (kind) {
  case TonicKind::constant: return "constant";
  case TonicKind::linear: return "linear";
  case TonicKind::spline: return "spline";
  case TonicKind::step: return "step";
  }
  return "constant";
}

TonicKind tonic_kind_from_string(const std::string& name) {
  if (name == "constant") return TonicKind::constant;
  if (name == "linear") return TonicKind::linear;
  if (name == "spline") return TonicKind::spline;
  if (name == "step") return TonicKind::step;
  throw ConfigError("unknown tonic kind '" + name + "'");
}

namespace {

std::size_t expected_params(TonicKind kind) {
  switch (kind) {
  case TonicKind::constant: return 1;
  case TonicKind::linear: return 2;
  case TonicKind::step: return 4;
  case TonicKind::spline: return 0; // variable, >= 2
  }
  return 0;
}

void validate_spec(const SynthSpec& spec) {
  spec.bateman.validate();
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma))
    throw SpecError("noise_sigma must be >= 0");
  const auto want = expected_params(spec.tonic_kind);
  if (spec.tonic_kind == TonicKind::spline) {
    if (spec.tonic_params.size() < 2)
      throw SpecError("spline tonic needs at least 2 knot values");
  } else if (spec.tonic_params.size() != want) {
    throw SpecError(to_string(spec.tonic_kind) + " tonic needs " + std::to_string(want) +
                    " parameters");
  }
  for (double v : spec.tonic_params)
    if (!std::isfinite(v))
      throw SpecError("non-finite tonic parameter");
  if (spec.tonic_kind == TonicKind::step && !(spec.tonic_params[2] >= spec.tonic_params[1]))
    throw SpecError("step ramp must end after it starts");
  for (const auto& e : spec.events) {
    if (!(e.onset_s >= 0.0) || !(e.onset_s < kFrameSeconds))
      throw SpecError("event onset must lie in [0, 180) s");
    if (!(e.amplitude > 0.0) || !std::isfinite(e.amplitude))
      throw SpecError("event amplitude must be positive");
  }
}

// Natural cubic spline second derivatives for equally spaced knots.
std::vector<double> natural_spline_moments(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  std::vector<double> m(n, 0.0);
  if (n < 3)
    return m;
  // Tridiagonal system for interior moments: m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2y[i] + y[i-1]) / h^2
  const std::size_t k = n - 2;
  std::vector<double> diag(k, 4.0), rhs(k);
  for (std::size_t i = 0; i < k; ++i)
    rhs[i] = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
  for (std::size_t i = 1; i < k; ++i) {
    const double w = 1.0 / diag[i - 1];
    diag[i] -= w;
    rhs[i] -= w * rhs[i - 1];
  }
  m[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i >= 1; --i)
    m[i] = (rhs[i - 1] - m[i + 1]) / diag[i - 1];
  return m;
}

double spline_value(const std::vector<double>& y, const std::vector<double>& m, double h, double t) {
  const std::size_t n = y.size();
  double pos = t / h;
  auto j = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(n - 2)));
  const double a = (static_cast<double>(j + 1) * h - t) / h;
  const double b = 1.0 - a;
  return a * y[j] + b * y[j + 1] + ((a * a * a - a) * m[j] + (b * b * b - b) * m[j + 1]) * h * h / 6.0;
}

} // namespace

double tonic_at(const SynthSpec& spec, double t) {
  const auto& p = spec.tonic_params;
  switch (spec.tonic_kind) {
  case TonicKind::constant:
    return p[0];
  case TonicKind::linear:
    return p[0] + p[1] * t;
  case TonicKind::step: {
    const double before = p[0], start = p[1], end = p[2], delta = p[3];
    if (t <= start)
      return before;
    if (t >= end)
      return before + delta;
    return before + delta * (t - start) / (end - start);
  }
  case TonicKind::spline: {
    const double h = kFrameSeconds / static_cast<double>(p.size() - 1);
    const auto m = natural_spline_moments(p, h);
    return spline_value(p, m, h, t);
  }
  }
  return 0.0;
}

std::pair<Frame, GroundTruth> generate_frame(const SynthSpec& spec) {
  validate_spec(spec);
  const std::size_t n = kFrameLength;
  const double fs = kFrameRateHz;

  GroundTruth truth;
  truth.tonic.resize(n);
  if (spec.tonic_kind == TonicKind::spline) {
    const auto& y = spec.tonic_params;
    const double h = kFrameSeconds / static_cast<double>(y.size() - 1);
    const auto m = natural_spline_moments(y, h);
    for (std::size_t i = 0; i < n; ++i)
      truth.tonic[i] = spline_value(y, m, h, Frame::time_of(i));
  } else {
    for (std::size_t i = 0; i < n; ++i)
      truth.tonic[i] = tonic_at(spec, Frame::time_of(i));
  }

  const auto kernel = sampled_kernel(spec.bateman, fs);
  truth.phasic.assign(n, 0.0);
  for (const auto& e : spec.events) {
    const auto onset = std::min<std::size_t>(static_cast<std::size_t>(std::llround(e.onset_s * fs)), n - 1);
    truth.events.push_back({static_cast<double>(onset) / fs, e.amplitude});
    for (std::size_t k = 0; k < kernel.size() && onset + k < n; ++k)
      truth.phasic[onset + k] += e.amplitude * kernel[k];
  }

  NormalSource noise(spec.seed);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (truth.tonic[i] < 0.0)
      throw SpecError("generated tonic is negative at sample " + std::to_string(i));
    const double eps = spec.noise_sigma > 0.0 ? spec.noise_sigma * noise.normal() : 0.0;
    x[i] = truth.tonic[i] + truth.phasic[i] + eps;
    if (x[i] < 0.0)
      throw SpecError("generated conductance is negative at sample " + std::to_string(i));
  }
  return {Frame(std::move(x), spec.frame_index), std::move(truth)};
}

SynthSpec step_scl_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.tonic_kind = TonicKind::step;
  spec.tonic_params = {2.0, 110.0, 125.0, -kStepSclHeight};
  spec.events = {{25.0, 0.3}, {60.0, 0.2}, {155.0, 0.25}};
  spec.noise_sigma = 0.005;
  spec.seed = seed;
  return spec;
}

std::pair<Frame, GroundTruth> scenario_step_scl(std::uint64_t seed) {
  return generate_frame(step_scl_spec(seed));
}

double NormalSource::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

SynthSpec random_spec(std::uint64_t seed, const CorpusOptions& opt) {
  NormalSource rng(seed ^ 0x9e3779b97f4a7c15ULL);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

  SynthSpec spec;
  spec.seed = seed;
  spec.noise_sigma = opt.noise_sigma;
  spec.bateman = opt.bateman;
  spec.tonic_kind = opt.tonic_kind;
  const double level = uni(opt.level_min, opt.level_max);
  switch (opt.tonic_kind) {
  case TonicKind::constant:
    spec.tonic_params = {level};
    break;
  case TonicKind::linear:
    spec.tonic_params = {level, uni(opt.slope_min, opt.slope_max)};
    break;
  case TonicKind::spline: {
    spec.tonic_params.clear();
    for (int i = 0; i < 7; ++i)
      spec.tonic_params.push_back(level + uni(-opt.spline_spread, opt.spline_spread));
    break;
  }
  case TonicKind::step: {
    const double start = uni(30.0, 140.0);
    spec.tonic_params = {level, start, start + uni(2.0, 15.0), uni(-0.6, 0.6)};
    break;
  }
  }

  const std::size_t span = opt.max_events - opt.min_events + 1;
  const std::size_t count = opt.min_events + static_cast<std::size_t>(rng.next_u64() % span);
  const double log_lo = std::log(opt.amplitude_min), log_hi = std::log(opt.amplitude_max);
  for (std::size_t e = 0, attempts = 0; e < count && attempts < 1000; ++attempts) {
    const double onset = uni(1.0, kFrameSeconds - 10.0);
    const bool clash = std::any_of(spec.events.begin(), spec.events.end(), [&](const ScrEvent& o) {
      return std::abs(o.onset_s - onset) < opt.min_spacing_s;
    });
    if (clash)
      continue;
    spec.events.push_back({onset, std::exp(uni(log_lo, log_hi))});
    ++e;
  }
  std::sort(spec.events.begin(), spec.events.end(),
            [](const ScrEvent& a, const ScrEvent& b) { return a.onset_s < b.onset_s; });
  return spec;
}

KeyValues to_key_values(const SynthSpec& spec) {
  KeyValues kv;
  kv["tonic_kind"] = to_string(spec.tonic_kind);
  std::string params;
  for (std::size_t i = 0; i < spec.tonic_params.size(); ++i)
    params += (i ? "," : "") + format_double(spec.tonic_params[i]);
  kv["tonic_params"] = params;
  std::string events;
  for (std::size_t i = 0; i < spec.events.size(); ++i)
    events += (i ? "," : "") + format_double(spec.events[i].onset_s) + ":" +
              format_double(spec.events[i].amplitude);
  kv["events"] = events;
  kv["noise_sigma"] = format_double(spec.noise_sigma);
  kv["tau_rise"] = format_double(spec.bateman.tau_rise);
  kv["tau_decay"] = format_double(spec.bateman.tau_decay);
  kv["seed"] = std::to_string(spec.seed);
  kv["frame_index"] = std::to_string(spec.frame_index);
  return kv;
}

namespace {

double require_double(const std::string& key, const std::string& text) {
  const auto v = parse_double(text);
  if (!v)
    throw ConfigError("key '" + key + "': not a number: '" + text + "'");
  return *v;
}

std::uint64_t require_uint(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-')
    throw ConfigError("key '" + key + "': not an unsigned integer: '" + text + "'");
  return v;
}

} // namespace

SynthSpec synth_spec_from_key_values(const KeyValues& kv) {
  SynthSpec spec;
  spec.events.clear();
  for (const auto& [key, value] : kv) {
    if (key == "tonic_kind") {
      spec.tonic_kind = tonic_kind_from_string(value);
    } else if (key == "tonic_params") {
      spec.tonic_params.clear();
      for (const auto& part : split(value, ','))
        spec.tonic_params.push_back(require_double(key, part));
    } else if (key == "events") {
      if (trim(value).empty())
        continue;
      for (const auto& part : split(value, ',')) {
        const auto fields = split(part, ':');
        if (fields.size() != 2)
          throw ConfigError("key 'events': expected onset:amplitude, got '" + part + "'");
        spec.events.push_back({require_double(key, fields[0]), require_double(key, fields[1])});
      }
    } else if (key == "noise_sigma") {
      spec.noise_sigma = require_double(key, value);
    } else if (key == "tau_rise") {
      spec.bateman.tau_rise = require_double(key, value);
    } else if (key == "tau_decay") {
      spec.bateman.tau_decay = require_double(key, value);
    } else if (key == "seed") {
      spec.seed = require_uint(key, value);
    } else if (key == "frame_index") {
      spec.frame_index = require_uint(key, value);
    } else {
      throw ConfigError("unknown scenario key '" + key + "'");
    }
  }
  return spec;
}

} // namespace edadecomp

#include "edadecomp/signal.hpp"

#include "edadecomp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace edadecomp {

double EdaSignal::duration() const {
  if (samples.empty())
    return 0.0;
  return static_cast<double>(samples.size() - 1) / fs;
}

void EdaSignal::validate() const {
  if (!(fs > 0.0) || !std::isfinite(fs))
    throw ConfigError("sampling rate must be positive, got " + std::to_string(fs));
  if (samples.empty())
    throw DataError("signal has no samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i]))
      throw DataError("non-finite sample at index " + std::to_string(i));
  }
}

Frame::Frame(std::vector<double> samples, std::size_t index)
    : samples_(std::move(samples)), index_(index) {
  if (samples_.size() != kFrameLength)
    throw DataError("frame must hold " + std::to_string(kFrameLength) + " samples, got " +
                    std::to_string(samples_.size()));
}

std::vector<Biquad> design_butterworth_lowpass(const FilterSpec& spec, double fs) {
  if (spec.order < 1)
    throw ConfigError("filter order must be positive");
  if (!(fs > 0.0))
    throw ConfigError("sampling rate must be positive");
  if (!(spec.cutoff_hz > 0.0) || spec.cutoff_hz >= fs / 2.0)
    throw ConfigError("cutoff " + std::to_string(spec.cutoff_hz) + " Hz must lie in (0, " +
                      std::to_string(fs / 2.0) + ") Hz");

  using std::numbers::pi;
  const int n = spec.order;
  const double k = 2.0 * fs;
  // Pre-warped analog cutoff so the digital -3 dB point lands on cutoff_hz.
  const double wc = k * std::tan(pi * spec.cutoff_hz / fs);

  std::vector<Biquad> sections;
  for (int i = 0; i < n / 2; ++i) {
    const double theta = pi / 2.0 + pi * (2.0 * i + 1.0) / (2.0 * n);
    const std::complex<double> s = wc * std::polar(1.0, theta);
    const std::complex<double> z = (k + s) / (k - s);
    Biquad q;
    q.a1 = -2.0 * z.real();
    q.a2 = std::norm(z);
    const double g = (1.0 + q.a1 + q.a2) / 4.0;
    q.b0 = g;
    q.b1 = 2.0 * g;
    q.b2 = g;
    sections.push_back(q);
  }
  if (n % 2 == 1) {
    const double z = (k - wc) / (k + wc);
    Biquad q;
    q.a1 = -z;
    q.a2 = 0.0;
    const double g = (1.0 + q.a1) / 2.0;
    q.b0 = g;
    q.b1 = g;
    q.b2 = 0.0;
    sections.push_back(q);
  }
  return sections;
}

double magnitude_response(std::span<const Biquad> sections, double f_hz, double fs) {
  const double w = 2.0 * std::numbers::pi * f_hz / fs;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& q : sections)
    h *= (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
  return std::abs(h);
}

namespace {

void run_section(const Biquad& q, std::vector<double>& x, double init_level, bool steady_init) {
  double s1 = 0.0, s2 = 0.0;
  if (steady_init) {
    s2 = (q.b2 - q.a2) * init_level;
    s1 = (q.b1 - q.a1) * init_level + s2;
  }
  for (double& v : x) {
    const double in = v;
    const double out = q.b0 * in + s1;
    s1 = q.b1 * in - q.a1 * out + s2;
    s2 = q.b2 * in - q.a2 * out;
    v = out;
  }
}

void check_finite(std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw DataError("non-finite sample at index " + std::to_string(i));
}

} // namespace

std::vector<double> sos_filter(std::span<const Biquad> sections, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& q : sections)
    run_section(q, y, 0.0, false);
  return y;
}

EdaSignal butterworth_lowpass_single_pass(const EdaSignal& signal, const FilterSpec& spec) {
  signal.validate();
  const auto sections = design_butterworth_lowpass(spec, signal.fs);
  EdaSignal out = signal;
  out.samples = sos_filter(sections, signal.samples);
  return out;
}

EdaSignal butterworth_lowpass(const EdaSignal& signal, const FilterSpec& spec) {
  if (!(signal.fs > 0.0))
    throw ConfigError("sampling rate must be positive");
  const auto sections = design_butterworth_lowpass(spec, signal.fs);
  if (signal.samples.empty())
    throw DataError("signal has no samples");
  check_finite(signal.samples);

  const auto& x = signal.samples;
  const std::size_t n = x.size();
  const std::size_t pad = std::min<std::size_t>(3 * static_cast<std::size_t>(spec.order), n - 1);

  // Odd (point) reflection about the end samples keeps the local slope continuous.
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i)
    ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i)
    ext.push_back(2.0 * x.back() - x[n - 1 - i]);

  for (const auto& q : sections)
    run_section(q, ext, ext.front(), true);
  std::reverse(ext.begin(), ext.end());
  for (const auto& q : sections)
    run_section(q, ext, ext.front(), true);
  std::reverse(ext.begin(), ext.end());

  EdaSignal out = signal;
  out.samples.assign(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                     ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
  return out;
}

EdaSignal resample(const EdaSignal& signal, double target_hz) {
  if (!(target_hz > 0.0) || !std::isfinite(target_hz))
    throw ConfigError("target rate must be positive");
  if (!(signal.fs > 0.0))
    throw ConfigError("sampling rate must be positive");
  if (signal.samples.size() < 2)
    throw DataError("resampling needs at least 2 samples");
  check_finite(signal.samples);

  const auto& x = signal.samples;
  const std::size_t n = x.size();
  EdaSignal out;
  out.fs = target_hz;
  out.origin = signal.origin;
  if (target_hz == signal.fs) {
    out.samples = x;
    return out;
  }

  // Output k sits at t = k / target_hz; its source position is k * fs / target_hz.
  const double last = static_cast<double>(n - 1);
  const auto count =
      static_cast<std::size_t>(std::floor(last * target_hz / signal.fs + 1e-9)) + 1;
  out.samples.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    double pos = static_cast<double>(k) * signal.fs / target_hz;
    if (pos > last)
      pos = last;
    const auto i0 = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i0);
    if (frac == 0.0 || i0 + 1 >= n)
      out.samples[k] = x[i0];
    else
      out.samples[k] = x[i0] + frac * (x[i0 + 1] - x[i0]);
  }
  return out;
}

std::vector<Frame> frame(const EdaSignal& signal) {
  if (signal.fs != kFrameRateHz)
    throw ConfigError("framing requires fs == 8 Hz, got " + std::to_string(signal.fs));
  std::vector<Frame> frames;
  const std::size_t count = signal.samples.size() / kFrameLength;
  frames.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    auto first = signal.samples.begin() + static_cast<std::ptrdiff_t>(f * kFrameLength);
    frames.emplace_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(kFrameLength)), f);
  }
  return frames;
}

} // namespace edadecomp

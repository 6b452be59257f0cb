#include "edadecomp/features.hpp"

#include "edadecomp/errors.hpp"
#include "edadecomp/text.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace edadecomp {

std::string to_string(SlopeClass c) {
  switch (c) {
  case SlopeClass::falling: return "Falling";
  case SlopeClass::stable: return "Stable";
  case SlopeClass::rising: return "Rising";
  }
  return "Stable";
}

double tonic_slope(std::span<const double> tonic, double fs) {
  if (tonic.size() < 2)
    throw DataError("tonic needs at least 2 samples");
  const double duration = static_cast<double>(tonic.size()) / fs;
  return (tonic.back() - tonic.front()) / duration;
}

SlopeClass classify_slope(double slope) {
  if (slope < -kSlopeBoundary)
    return SlopeClass::falling;
  if (slope > kSlopeBoundary)
    return SlopeClass::rising;
  return SlopeClass::stable;
}

namespace {

double min_between(std::span<const double> x, std::size_t from, std::size_t to) {
  return *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(from),
                           x.begin() + static_cast<std::ptrdiff_t>(to + 1));
}

} // namespace

std::vector<Peak> detect_peaks(std::span<const double> phasic) {
  const std::size_t n = phasic.size();
  std::vector<Peak> peaks;
  if (n < 3)
    return peaks;

  auto trough_start = [&](std::size_t accepted_count) -> std::size_t {
    return accepted_count == 0 ? 0 : peaks[accepted_count - 1].index;
  };

  std::size_t i = 1;
  while (i + 1 < n) {
    if (!(phasic[i] > phasic[i - 1])) {
      ++i;
      continue;
    }
    // Extent of a possible plateau starting at i.
    std::size_t j = i;
    while (j + 1 < n && phasic[j + 1] == phasic[i])
      ++j;
    if (j + 1 >= n || !(phasic[j + 1] < phasic[i])) {
      i = j + 1;
      continue;
    }
    const std::size_t p = (i + j) / 2;
    const double value = phasic[p];
    i = j + 1;

    if (!peaks.empty() && p - peaks.back().index < kMinPeakDistance) {
      if (value > phasic[peaks.back().index]) {
        const std::size_t from = trough_start(peaks.size() - 1);
        const double amp = value - min_between(phasic, from, p);
        if (amp >= kMinPeakAmplitude)
          peaks.back() = {p, amp};
      }
      continue;
    }
    const double amp = value - min_between(phasic, trough_start(peaks.size()), p);
    if (amp >= kMinPeakAmplitude)
      peaks.push_back({p, amp});
  }
  return peaks;
}

FrameFeatures frame_features(const Decomposition& d) {
  if (d.tonic.size() != d.phasic.size() || d.tonic.size() < 2)
    throw DataError("decomposition tonic/phasic lengths are inconsistent");
  FrameFeatures f;
  f.frame_index = d.frame_index;
  f.slope = tonic_slope(d.tonic);
  f.slope_class = classify_slope(f.slope);
  for (const auto& p : detect_peaks(d.phasic)) {
    f.amplitudes.push_back(p.amplitude);
    f.peak_indices.push_back(p.index);
  }
  f.peak_count = f.amplitudes.size();
  const auto [lo, hi] = std::minmax_element(d.phasic.begin(), d.phasic.end());
  f.phasic_range = *hi - *lo;
  return f;
}

const HistogramSpec& slope_histogram() {
  static const HistogramSpec spec{"tonic_slope", {"Falling", "Stable", "Rising"}, {}};
  return spec;
}

const HistogramSpec& peak_count_histogram() {
  static const HistogramSpec spec{"peak_count",
                                  {"0-4", "5-9", "10-14", "15-19", "20-24", "25-29", "30+"},
                                  {5, 10, 15, 20, 25, 30}};
  return spec;
}

const HistogramSpec& amplitude_histogram() {
  static const HistogramSpec spec{"peak_amplitude",
                                  {"<0.005", "0.005-0.10", "0.10-0.20", "0.20-0.40", ">=0.40"},
                                  {0.005, 0.10, 0.20, 0.40}};
  return spec;
}

const HistogramSpec& phasic_range_histogram() {
  static const HistogramSpec spec{
      "phasic_range",
      {"<0.02", "0.02-0.05", "0.05-0.10", "0.10-0.50", "0.50-1.0", "1.0-10", ">=10"},
      {0.02, 0.05, 0.10, 0.50, 1.0, 10.0}};
  return spec;
}

std::size_t bin_index(const HistogramSpec& spec, double value) {
  const auto it = std::upper_bound(spec.edges.begin(), spec.edges.end(), value);
  return static_cast<std::size_t>(it - spec.edges.begin());
}

double Histogram::percent(std::size_t bin) const {
  if (total == 0)
    return 0.0;
  return 100.0 * static_cast<double>(counts[bin]) / static_cast<double>(total);
}

std::vector<int> Histogram::display_percent() const {
  std::vector<int> out(counts.size(), 0);
  if (total == 0)
    return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const double p = percent(b);
    out[b] = static_cast<int>(std::floor(p));
    assigned += out[b];
    remainders.emplace_back(p - std::floor(p), b);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < 100 && k < remainders.size(); ++k, ++assigned)
    ++out[remainders[k].second];
  return out;
}

namespace {

Histogram make_histogram(std::size_t bins) {
  Histogram h;
  h.counts.assign(bins, 0);
  return h;
}

void add(Histogram& h, std::size_t bin) {
  ++h.counts[bin];
  ++h.total;
}

} // namespace

HistogramReport aggregate(const MethodFeatures& features) {
  if (features.empty())
    throw DataError("no methods to aggregate");
  HistogramReport report;
  for (const auto& [method, frames] : features) {
    if (frames.empty())
      throw DataError("method '" + method + "' has no frames to aggregate");
    MethodSummary s;
    s.method = method;
    s.frames = frames.size();
    s.slope = make_histogram(3);
    s.peak_count = make_histogram(peak_count_histogram().labels.size());
    s.amplitude = make_histogram(amplitude_histogram().labels.size());
    s.phasic_range = make_histogram(phasic_range_histogram().labels.size());
    double peak_sum = 0.0;
    std::vector<double> amps;
    for (const auto& f : frames) {
      add(s.slope, static_cast<std::size_t>(f.slope_class));
      add(s.peak_count, bin_index(peak_count_histogram(), static_cast<double>(f.peak_count)));
      add(s.phasic_range, bin_index(phasic_range_histogram(), f.phasic_range));
      peak_sum += static_cast<double>(f.peak_count);
      for (double a : f.amplitudes) {
        add(s.amplitude, bin_index(amplitude_histogram(), a));
        amps.push_back(a);
      }
    }
    // Summed in sorted order so the mean does not depend on frame order.
    std::sort(amps.begin(), amps.end());
    s.mean_peaks = peak_sum / static_cast<double>(frames.size());
    s.mean_amplitude = amps.empty() ? 0.0 : std::accumulate(amps.begin(), amps.end(), 0.0) / static_cast<double>(amps.size());
    report.methods.push_back(std::move(s));
  }
  return report;
}

namespace {

void table(std::ostringstream& out, const std::string& title, const HistogramSpec& spec,
           const HistogramReport& report, const Histogram MethodSummary::*member,
           const char* mean_header, double MethodSummary::*mean_member, int mean_precision) {
  std::size_t name_w = 8;
  for (const auto& m : report.methods)
    name_w = std::max(name_w, m.method.size() + 2);
  std::size_t col_w = 7;
  for (const auto& l : spec.labels)
    col_w = std::max(col_w, l.size() + 2);

  out << title << '\n';
  out << std::left << std::setw(static_cast<int>(name_w)) << "Method" << std::right;
  if (mean_header)
    out << std::setw(8) << mean_header;
  for (const auto& l : spec.labels)
    out << std::setw(static_cast<int>(col_w)) << l;
  out << '\n';
  for (const auto& m : report.methods) {
    out << std::left << std::setw(static_cast<int>(name_w)) << m.method << std::right;
    if (mean_header) {
      std::ostringstream v;
      v << std::fixed << std::setprecision(mean_precision) << m.*mean_member;
      out << std::setw(8) << v.str();
    }
    for (int p : (m.*member).display_percent())
      out << std::setw(static_cast<int>(col_w)) << (std::to_string(p) + "%");
    out << '\n';
  }
  out << '\n';
}

} // namespace

std::string render_tables(const HistogramReport& report) {
  std::ostringstream out;
  table(out, "Tonic slope classes (boundaries -0.001 / 0.001 uS/s)", slope_histogram(),
        report, &MethodSummary::slope, nullptr, nullptr, 0);
  table(out, "Peaks per 3-min frame", peak_count_histogram(), report,
        &MethodSummary::peak_count, "Mean", &MethodSummary::mean_peaks, 1);
  table(out, "Peak amplitude (uS)", amplitude_histogram(), report,
        &MethodSummary::amplitude, "Mean", &MethodSummary::mean_amplitude, 3);
  table(out, "Phasic range max-min (uS)", phasic_range_histogram(), report,
        &MethodSummary::phasic_range, nullptr, nullptr, 0);
  return out.str();
}

std::string render_csv(const HistogramReport& report) {
  std::ostringstream out;
  out << "method,histogram,bin,count,total,value\n";
  auto rows = [&](const MethodSummary& m, const HistogramSpec& spec, const Histogram& h) {
    for (std::size_t b = 0; b < spec.labels.size(); ++b)
      out << m.method << ',' << spec.name << ',' << spec.labels[b] << ',' << h.counts[b] << ','
          << h.total << ',' << format_double(h.percent(b)) << '\n';
  };
  for (const auto& m : report.methods) {
    out << m.method << ",summary,frames," << m.frames << ',' << m.frames + m.failed_frames << ",\n";
    out << m.method << ",summary,failed_frames," << m.failed_frames << ','
        << m.frames + m.failed_frames << ",\n";
    out << m.method << ",summary,mean_peaks,," << m.frames << ',' << format_double(m.mean_peaks)
        << '\n';
    out << m.method << ",summary,mean_amplitude,," << m.amplitude.total << ','
        << format_double(m.mean_amplitude) << '\n';
    rows(m, slope_histogram(), m.slope);
    rows(m, peak_count_histogram(), m.peak_count);
    rows(m, amplitude_histogram(), m.amplitude);
    rows(m, phasic_range_histogram(), m.phasic_range);
  }
  return out.str();
}

} // namespace edadecomp

#include "edadecomp/io.hpp"

#include "edadecomp/errors.hpp"
#include "edadecomp/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace edadecomp {

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

// Rejects rows whose field count or numbers are wrong.
std::vector<double> parse_row(const std::string& line, std::size_t fields, const std::string& source,
                              std::size_t line_no) {
  const auto cells = split(line, ',');
  if (cells.size() != fields)
    throw DataError(where(source, line_no) + "expected " + std::to_string(fields) + " fields, got " +
                    std::to_string(cells.size()));
  std::vector<double> out;
  for (const auto& c : cells) {
    const auto v = parse_double(trim(c));
    if (!v)
      throw DataError(where(source, line_no) + "malformed number '" + std::string(trim(c)) + "'");
    if (!std::isfinite(*v))
      throw DataError(where(source, line_no) + "non-finite value");
    out.push_back(*v);
  }
  return out;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2)
    return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

} // namespace

EdaSignal parse_session_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<double> t, x;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (trim(line).empty())
      continue;
    if (!header) {
      const auto cells = split(line, ',');
      if (cells.size() != 2 || parse_double(trim(cells[0])))
        throw DataError(where(source, line_no) + "expected header `timestamp_s,eda_us`");
      header = true;
      continue;
    }
    const auto row = parse_row(line, 2, source, line_no);
    if (!t.empty() && !(row[0] > t.back()))
      throw DataError(where(source, line_no) + "timestamps must be strictly increasing");
    if (row[1] < 0.0)
      throw DataError(where(source, line_no) + "negative conductance " + format_double(row[1]));
    t.push_back(row[0]);
    x.push_back(row[1]);
  }
  if (!header)
    throw DataError(source + ": empty file");
  if (t.size() < 2)
    throw DataError(source + ": need at least 2 samples");

  std::vector<double> dt(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    dt[i] = t[i + 1] - t[i];
  const double step = median(dt);
  double fs = 1.0 / step;
  if (std::abs(fs - std::round(fs)) < 1e-6 * fs)
    fs = std::round(fs);

  EdaSignal sig;
  sig.fs = fs;
  sig.origin = t.front();
  const bool regular =
      std::all_of(dt.begin(), dt.end(), [&](double d) { return std::abs(d - step) <= 1e-6 * step; });
  if (regular) {
    sig.samples = std::move(x);
  } else {
    const double span = t.back() - t.front();
    const auto n = static_cast<std::size_t>(std::floor(span / step + 1e-9)) + 1;
    sig.samples.resize(n);
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double tk = t.front() + static_cast<double>(k) * step;
      while (j + 2 < t.size() && t[j + 1] <= tk)
        ++j;
      const double w = std::clamp((tk - t[j]) / (t[j + 1] - t[j]), 0.0, 1.0);
      sig.samples[k] = x[j] + w * (x[j + 1] - x[j]);
    }
  }
  auto out = resample(sig, kFrameRateHz);
  out.origin = sig.origin;
  return out;
}

EdaSignal load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  return parse_session_csv(in, path.string());
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_session_csv(std::ostream& out, const EdaSignal& signal) {
  out << "timestamp_s,eda_us\n";
  const double origin = signal.origin.value_or(0.0);
  for (std::size_t i = 0; i < signal.samples.size(); ++i)
    out << format_double(origin + static_cast<double>(i) / signal.fs) << ',' << format_double(signal.samples[i])
        << '\n';
}

void write_session_csv(const std::filesystem::path& path, const EdaSignal& signal) {
  auto out = open_output(path);
  write_session_csv(out, signal);
  if (!out)
    throw IoError("failed writing '" + path.string() + "'");
}

void write_decomposition_csv(std::ostream& out, const Frame& frame, const Decomposition& d,
                             const std::vector<std::size_t>& peak_indices) {
  std::vector<int> flag(frame.size(), 0);
  for (std::size_t p : peak_indices)
    if (p < flag.size())
      flag[p] = 1;
  out << "t,eda,tonic,phasic,peak\n";
  for (std::size_t i = 0; i < frame.size(); ++i)
    out << format_double(Frame::time_of(i)) << ',' << format_double(frame[i]) << ','
        << format_double(d.tonic[i]) << ',' << format_double(d.phasic[i]) << ',' << flag[i] << '\n';
}

DecompositionTable read_decomposition_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  DecompositionTable table;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (trim(line).empty())
      continue;
    if (!header) {
      if (trim(line) != "t,eda,tonic,phasic,peak")
        throw DataError(where(path.string(), line_no) + "expected header `t,eda,tonic,phasic,peak`");
      header = true;
      continue;
    }
    const auto row = parse_row(line, 5, path.string(), line_no);
    table.t.push_back(row[0]);
    table.eda.push_back(row[1]);
    table.tonic.push_back(row[2]);
    table.phasic.push_back(row[3]);
    table.peak.push_back(row[4] != 0.0 ? 1 : 0);
  }
  if (table.t.empty())
    throw DataError(path.string() + ": no rows");
  return table;
}

void write_truth_csv(std::ostream& out, const Frame& frame, const GroundTruth& truth) {
  out << "t,eda,tonic,phasic\n";
  for (std::size_t i = 0; i < frame.size(); ++i)
    out << format_double(Frame::time_of(i)) << ',' << format_double(frame[i]) << ','
        << format_double(truth.tonic[i]) << ',' << format_double(truth.phasic[i]) << '\n';
}

void write_events_csv(std::ostream& out, const GroundTruth& truth) {
  out << "onset_s,amplitude\n";
  for (const auto& e : truth.events)
    out << format_double(e.onset_s) << ',' << format_double(e.amplitude) << '\n';
}

} // namespace edadecomp

#include "edadecomp/plot.hpp"

#include "edadecomp/errors.hpp"
#include "edadecomp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace edadecomp {

namespace {

constexpr double kPanelW = 420, kPanelH = 260, kMarginL = 56, kMarginT = 36, kMarginB = 40, kGap = 40;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

struct Axes {
  double x0, y0; // top-left of the plotting area
  double t_max, lo, hi;

  double px(double t) const { return x0 + kPanelW * t / t_max; }
  double py(double v) const { return y0 + kPanelH * (hi - v) / (hi - lo); }
};

Axes make_axes(double x0, double t_max, std::initializer_list<std::span<const double>> series) {
  double lo = INFINITY, hi = -INFINITY;
  for (auto s : series)
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  // Flat data still gets a visible band around it.
  const double pad = hi > lo ? 0.05 * (hi - lo) : std::max(0.05, 0.05 * std::abs(hi));
  return {x0, kMarginT, t_max, lo - pad, hi + pad};
}

void frame_axes(std::ostringstream& o, const Axes& a, const std::string& y_label) {
  const double y1 = a.y0 + kPanelH;
  o << "<rect x=\"" << num(a.x0) << "\" y=\"" << num(a.y0) << "\" width=\"" << num(kPanelW) << "\" height=\""
    << num(kPanelH) << "\" fill=\"none\" stroke=\"#888\"/>\n";
  const double step = a.t_max > 60 ? 30.0 : 10.0;
  for (double t = 0; t <= a.t_max + 1e-9; t += step) {
    o << "<line x1=\"" << num(a.px(t)) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(a.px(t)) << "\" y2=\""
      << num(y1 + 4) << "\" stroke=\"#444\"/>"
      << "<text x=\"" << num(a.px(t)) << "\" y=\"" << num(y1 + 16)
      << "\" font-size=\"10\" text-anchor=\"middle\">" << label(t) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = a.lo + (a.hi - a.lo) * k / 4.0;
    o << "<text x=\"" << num(a.x0 - 4) << "\" y=\"" << num(a.py(v) + 3)
      << "\" font-size=\"10\" text-anchor=\"end\">" << label(v) << "</text>\n";
  }
  o << "<text x=\"" << num(a.x0 + kPanelW / 2) << "\" y=\"" << num(y1 + 32)
    << "\" font-size=\"11\" text-anchor=\"middle\">time (s)</text>\n";
  o << "<text x=\"" << num(a.x0 - 42) << "\" y=\"" << num(a.y0 + kPanelH / 2) << "\" font-size=\"11\" transform=\"rotate(-90 "
    << num(a.x0 - 42) << ' ' << num(a.y0 + kPanelH / 2) << ")\" text-anchor=\"middle\">" << escape(y_label)
    << "</text>\n";
}

void polyline(std::ostringstream& o, const Axes& a, std::span<const double> v, double fs, const char* colour,
              const char* cls) {
  o << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < v.size(); ++i)
    o << (i ? " " : "") << num(a.px(static_cast<double>(i) / fs)) << ',' << num(a.py(v[i]));
  o << "\"/>\n";
}

} // namespace

std::string render_plot(std::span<const double> eda, std::span<const double> tonic,
                        std::span<const double> phasic, const std::vector<std::size_t>& peaks,
                        const std::string& title, double fs) {
  const double t_max = std::max(1.0, static_cast<double>(std::max(eda.size(), phasic.size())) / fs);
  const double width = kMarginL + kPanelW + kGap + kMarginL + kPanelW + 20;
  const double height = kMarginT + kPanelH + kMarginB + 10;
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    o << "<text x=\"" << num(width / 2) << "\" y=\"16\" font-size=\"13\" text-anchor=\"middle\">" << escape(title)
      << "</text>\n";

  const Axes left = make_axes(kMarginL, t_max, {eda, tonic});
  o << "<g class=\"panel\" id=\"signal\">\n";
  frame_axes(o, left, "EDA (uS)");
  polyline(o, left, eda, fs, "black", "eda");
  polyline(o, left, tonic, fs, "green", "tonic");
  o << "</g>\n";

  const Axes right = make_axes(kMarginL + kPanelW + kGap + kMarginL, t_max, {phasic});
  o << "<g class=\"panel\" id=\"phasic\">\n";
  frame_axes(o, right, "phasic (uS)");
  polyline(o, right, phasic, fs, "#1f4e9c", "phasic");
  for (std::size_t p : peaks) {
    if (p >= phasic.size())
      continue;
    o << "<circle class=\"peak\" cx=\"" << num(right.px(static_cast<double>(p) / fs)) << "\" cy=\""
      << num(right.py(phasic[p])) << "\" r=\"3\" fill=\"red\"/>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

void emit_plot(const Frame& frame, const Decomposition& d, const std::vector<std::size_t>& peaks,
               const std::filesystem::path& path, const std::string& title) {
  auto out = open_output(path);
  out << render_plot(frame.samples(), d.tonic, d.phasic, peaks, title);
  if (!out)
    throw IoError("failed writing '" + path.string() + "'");
}

} // namespace edadecomp

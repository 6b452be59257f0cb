#include "edadecomp/harness.hpp"

#include "edadecomp/checkpoint.hpp"
#include "edadecomp/detrend.hpp"
#include "edadecomp/errors.hpp"
#include "edadecomp/io.hpp"
#include "edadecomp/plot.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace edadecomp {

namespace {

SynthSpec fixed_spec(TonicKind kind, std::vector<double> tonic, std::vector<ScrEvent> events, double sigma,
                     std::uint64_t seed) {
  SynthSpec s;
  s.tonic_kind = kind;
  s.tonic_params = std::move(tonic);
  s.events = std::move(events);
  s.noise_sigma = sigma;
  s.seed = seed;
  return s;
}

SynthSpec named_spec(const std::string& name, std::uint64_t seed) {
  const std::vector<ScrEvent> four{{20, 0.2}, {70, 0.35}, {120, 0.15}, {160, 0.25}};
  if (name == "constant")
    return fixed_spec(TonicKind::constant, {2.0}, {}, 0.0, seed);
  if (name == "single-scr")
    return fixed_spec(TonicKind::constant, {1.0}, {{60, 0.5}}, 0.0, seed);
  if (name == "rising")
    return fixed_spec(TonicKind::linear, {1.5, 0.003}, four, 0.001, seed);
  if (name == "falling")
    return fixed_spec(TonicKind::linear, {4.0, -0.003}, four, 0.001, seed);
  if (name == "spline")
    return fixed_spec(TonicKind::spline, {2.0, 2.3, 2.1, 2.4, 2.2}, {{40, 0.3}, {100, 0.2}, {140, 0.4}}, 0.001,
                      seed);
  if (name == "burst") {
    std::vector<ScrEvent> ev;
    const double amps[] = {0.05, 0.12, 0.25};
    for (int k = 0; 5.0 + 6.0 * k <= 173.0; ++k)
      ev.push_back({5.0 + 6.0 * k, amps[k % 3]});
    return fixed_spec(TonicKind::constant, {1.5}, std::move(ev), 0.001, seed);
  }
  if (name == "step-scl")
    return step_scl_spec(seed);
  throw ConfigError("unknown scenario '" + name + "'");
}

std::size_t parse_count(const std::string& name, const std::string& text) {
  const auto v = parse_double(text);
  if (!v || *v < 1 || *v != std::floor(*v) || *v > 100000)
    throw ConfigError("scenario '" + name + "' needs a positive frame count");
  return static_cast<std::size_t>(*v);
}

ScenarioFrame realise(std::string source, SynthSpec spec) {
  auto [frame, truth] = generate_frame(spec);
  return {std::move(source), std::move(spec), std::move(frame), std::move(truth)};
}

} // namespace

const std::vector<std::string>& suite_scenarios() {
  static const std::vector<std::string> names{"constant", "single-scr", "rising", "falling",
                                              "spline",   "burst",      "step-scl"};
  return names;
}

std::vector<ScenarioFrame> expand_scenario(const std::string& name, std::uint64_t seed) {
  std::vector<ScenarioFrame> out;
  if (name == "suite") {
    for (const auto& n : suite_scenarios())
      out.push_back(realise(n, named_spec(n, seed)));
    return out;
  }
  if (name.starts_with("random:")) {
    const std::size_t n = parse_count(name, name.substr(7));
    for (std::size_t i = 0; i < n; ++i) {
      auto spec = random_spec(seed + i, CorpusOptions{});
      spec.frame_index = i;
      out.push_back(realise("random", std::move(spec)));
    }
    return out;
  }
  if (name.starts_with("balanced:")) {
    const std::size_t n = parse_count(name, name.substr(9));
    for (std::size_t i = 0; i < n; ++i) {
      CorpusOptions opt;
      switch (i % 3) {
      case 0: opt.slope_min = -0.004, opt.slope_max = -0.002; break;
      case 1: opt.slope_min = -0.0003, opt.slope_max = 0.0003; break;
      default: opt.slope_min = 0.002, opt.slope_max = 0.004; break;
      }
      auto spec = random_spec(seed + i, opt);
      spec.frame_index = i;
      out.push_back(realise("balanced", std::move(spec)));
    }
    return out;
  }
  out.push_back(realise(name, named_spec(name, seed)));
  return out;
}

CorpusOptions training_corpus_options() {
  CorpusOptions opt;
  opt.noise_sigma = 0.002;
  return opt;
}

std::vector<Frame> synthetic_corpus(std::size_t count, std::uint64_t seed, const CorpusOptions& options) {
  std::vector<Frame> frames;
  for (std::size_t i = 0; i < count; ++i) {
    auto spec = random_spec(seed + i, options);
    spec.frame_index = i;
    frames.push_back(generate_frame(spec).first);
  }
  return frames;
}

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"detrend", "deconv", "feel-1", "feel-2", "feel-3"};
  return m;
}

int feel_variant(const std::string& method) {
  if (method == "feel-1")
    return 1;
  if (method == "feel-2")
    return 2;
  if (method == "feel-3")
    return 3;
  return 0;
}

void RunConfig::validate() const {
  if (methods.empty())
    throw ConfigError("no methods given (choose from detrend, deconv, feel-1, feel-2, feel-3)");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
      throw ConfigError("unknown method '" + m + "'");
    if (!seen.insert(m).second)
      throw ConfigError("method '" + m + "' listed twice");
    if (feel_variant(m)) {
      const auto it = checkpoints.find(m);
      if (it == checkpoints.end() || it->second.empty())
        throw ConfigError("method '" + m + "' needs checkpoint_feel" + std::to_string(feel_variant(m)));
      if (!std::filesystem::exists(it->second))
        throw ConfigError("checkpoint '" + it->second + "' does not exist");
    }
  }
  if (inputs.empty() && scenarios.empty())
    throw ConfigError("no inputs or scenarios given");
  for (const auto& p : inputs)
    if (!std::filesystem::exists(p))
      throw ConfigError("input '" + p + "' does not exist");
  if (out_dir.empty())
    throw ConfigError("output directory is empty");
  if (!(filter_spec.cutoff_hz > 0.0) || filter_spec.cutoff_hz >= kFrameRateHz / 2.0)
    throw ConfigError("filter_cutoff_hz must lie in (0, 4) Hz for 8 Hz frames");
  if (filter_spec.order < 1)
    throw ConfigError("filter_order must be positive");
  if (flag_window && !(flag_window->first < flag_window->second))
    throw ConfigError("flag_window needs start < end");
}

const std::vector<KeyHelp>& run_config_keys() {
  static const std::vector<KeyHelp> keys{
      {"inputs", "", "comma-separated session CSV files"},
      {"scenarios", "", "comma-separated scenarios: suite, random:N, balanced:N or a suite member"},
      {"methods", "", "comma-separated subset of detrend,deconv,feel-1,feel-2,feel-3"},
      {"out", "out", "output directory"},
      {"seed", "0", "seed for synthetic scenarios"},
      {"filter", "on", "low-pass filter frames before decomposition (on|off)"},
      {"filter_cutoff_hz", "3", "Butterworth cutoff"},
      {"filter_order", "4", "Butterworth order"},
      {"checkpoint_feel1", "", "model checkpoint for feel-1"},
      {"checkpoint_feel2", "", "model checkpoint for feel-2"},
      {"checkpoint_feel3", "", "model checkpoint for feel-3"},
      {"deconv_lambda", "auto", "sparsity weight; auto = 1e-3 * max|x|"},
      {"deconv_max_iter", "5000", "FISTA iteration cap"},
      {"deconv_tol", "1e-8", "relative objective decrease for convergence"},
      {"flag_window", "auto", "start,end seconds for the in-window peak count; auto uses 105,130 when "
                              "step-scl is run, none disables"},
      {"plots", "off", "write an SVG per frame and method (on|off)"},
  };
  return keys;
}

namespace {

std::vector<std::string> list_value(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& part : split(v, ',')) {
    const auto t = std::string(trim(part));
    if (!t.empty())
      out.push_back(t);
  }
  return out;
}

double number_value(const std::string& key, const std::string& v) {
  const auto d = parse_double(trim(v));
  if (!d || !std::isfinite(*d))
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return *d;
}

std::size_t count_value(const std::string& key, const std::string& v) {
  const double d = number_value(key, v);
  if (d < 0 || d != std::floor(d))
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(d);
}

bool bool_value(const std::string& key, const std::string& v) {
  const auto t = std::string(trim(v));
  if (t == "on" || t == "true" || t == "1" || t == "yes")
    return true;
  if (t == "off" || t == "false" || t == "0" || t == "no")
    return false;
  throw ConfigError("key '" + key + "': expected on or off, got '" + v + "'");
}

} // namespace

RunConfig run_config_from_key_values(const KeyValues& kv) {
  KeyValues merged;
  for (const auto& k : run_config_keys())
    merged[k.key] = k.default_value;
  for (const auto& [k, v] : kv) {
    if (!merged.contains(k))
      throw ConfigError("unknown key '" + k + "'");
    merged[k] = v;
  }

  RunConfig c;
  c.inputs = list_value(merged["inputs"]);
  c.scenarios = list_value(merged["scenarios"]);
  c.methods = list_value(merged["methods"]);
  c.out_dir = std::string(trim(merged["out"]));
  c.seed = count_value("seed", merged["seed"]);
  c.filter = bool_value("filter", merged["filter"]);
  c.filter_spec.cutoff_hz = number_value("filter_cutoff_hz", merged["filter_cutoff_hz"]);
  c.filter_spec.order = static_cast<int>(count_value("filter_order", merged["filter_order"]));
  for (int v = 1; v <= 3; ++v) {
    const auto path = std::string(trim(merged["checkpoint_feel" + std::to_string(v)]));
    if (!path.empty())
      c.checkpoints["feel-" + std::to_string(v)] = path;
  }
  if (trim(merged["deconv_lambda"]) != "auto") {
    const double l = number_value("deconv_lambda", merged["deconv_lambda"]);
    if (!(l > 0.0))
      throw ConfigError("deconv_lambda must be positive");
    c.solver.lambda = l;
  }
  c.solver.max_iterations = count_value("deconv_max_iter", merged["deconv_max_iter"]);
  c.solver.relative_tolerance = number_value("deconv_tol", merged["deconv_tol"]);

  const auto window = std::string(trim(merged["flag_window"]));
  if (window == "auto") {
    for (const auto& s : c.scenarios)
      if (s == "step-scl" || s == "suite")
        c.flag_window = std::pair{kStepSclWindowStart, kStepSclWindowEnd};
  } else if (window != "none") {
    const auto parts = split(window, ',');
    if (parts.size() != 2)
      throw ConfigError("flag_window must be start,end or none");
    c.flag_window = std::pair{number_value("flag_window", parts[0]), number_value("flag_window", parts[1])};
  }
  c.plots = bool_value("plots", merged["plots"]);
  return c;
}

std::vector<SourceFrame> prepare_frames(const RunConfig& config) {
  std::vector<SourceFrame> out;
  auto add_signal = [&](const std::string& source, EdaSignal sig) {
    if (config.filter)
      sig = butterworth_lowpass(sig, config.filter_spec);
    for (auto& f : frame(sig))
      out.push_back({source, std::move(f)});
  };
  for (const auto& path : config.inputs)
    add_signal(std::filesystem::path(path).stem().string(), load_csv(path));
  for (const auto& name : config.scenarios) {
    for (auto& s : expand_scenario(name, config.seed)) {
      EdaSignal sig{s.frame.values(), kFrameRateHz, std::nullopt};
      if (config.filter)
        sig = butterworth_lowpass(sig, config.filter_spec);
      out.push_back({s.source, Frame(std::move(sig.samples), s.spec.frame_index)});
    }
  }
  return out;
}

std::string frame_file_stem(const SourceFrame& f, const std::string& method) {
  std::string s = f.source + "_" + std::to_string(f.frame.index()) + "_" + method;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
      c = '_';
  return s;
}

MethodRunner::MethodRunner(const RunConfig& config)
    : solver_(config.solver), dict_(build_dictionary(BatemanParams{}, kFrameRateHz)), basis_(build_tonic_basis()) {
  for (const auto& m : config.methods) {
    if (const int v = feel_variant(m)) {
      auto params = load_checkpoint(config.checkpoints.at(m));
      const auto expected = feel_config(v);
      if (params.arch.pool_kernel != expected.pool_kernel || params.arch.seq_len != kFrameLength)
        throw ConfigError("checkpoint for " + m + " has pool kernel " + std::to_string(params.arch.pool_kernel) +
                          " and seq_len " + std::to_string(params.arch.seq_len) + ", expected " +
                          std::to_string(expected.pool_kernel) + " and " + std::to_string(kFrameLength));
      models_.emplace(m, std::move(params));
    }
  }
}

Decomposition MethodRunner::decompose(const std::string& method, const Frame& f) const {
  if (method == "detrend")
    return detrend_decompose(f);
  if (method == "deconv") {
    const auto sol = fit_sparse(f.samples(), dict_, basis_, solver_);
    return deconv_decompose(f, sol, dict_, basis_);
  }
  const auto it = models_.find(method);
  if (it == models_.end())
    throw ConfigError("method '" + method + "' is not configured");
  return transformer_decompose(f, it->second, method);
}

RunOutcome run_compare(const RunConfig& config) {
  config.validate();
  const auto frames = prepare_frames(config);
  if (frames.empty())
    throw DataError("inputs produced no complete 3-minute frames");

  const MethodRunner runner(config);

  RunOutcome outcome;
  MethodFeatures features;
  std::map<std::string, std::size_t> failed;
  const auto frame_dir = config.out_dir / "frames";
  const auto plot_dir = config.out_dir / "plots";
  for (const auto& m : config.methods) {
    std::vector<FrameFeatures> list;
    std::size_t in_window = 0;
    for (const auto& sf : frames) {
      try {
        auto d = runner.decompose(m, sf.frame);
        for (double v : d.tonic)
          if (!std::isfinite(v))
            throw NumericError("non-finite tonic");
        auto ff = frame_features(d);
        const auto stem = frame_file_stem(sf, m);
        auto out = open_output(frame_dir / (stem + ".csv"));
        write_decomposition_csv(out, sf.frame, d, ff.peak_indices);
        if (config.plots)
          emit_plot(sf.frame, d, ff.peak_indices, plot_dir / (stem + ".svg"),
                    sf.source + " frame " + std::to_string(sf.frame.index()) + " (" + m + ")");
        if (config.flag_window)
          for (std::size_t p : ff.peak_indices) {
            const double t = Frame::time_of(p);
            if (t >= config.flag_window->first && t <= config.flag_window->second)
              ++in_window;
          }
        list.push_back(std::move(ff));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        outcome.failures.push_back({m, sf.source, sf.frame.index(), e.what()});
        ++failed[m];
      }
    }
    if (config.flag_window)
      outcome.window_peaks.emplace_back(m, in_window);
    if (!list.empty())
      features.emplace_back(m, std::move(list));
  }

  if (!features.empty()) {
    outcome.report = aggregate(features);
    for (auto& s : outcome.report.methods)
      s.failed_frames = failed[s.method];
  }

  std::ostringstream tables, csv;
  tables << render_tables(outcome.report);
  csv << render_csv(outcome.report);
  if (config.flag_window) {
    const auto lo = format_double(config.flag_window->first), hi = format_double(config.flag_window->second);
    tables << "Peaks inside flagged window [" << lo << ", " << hi << "] s\n";
    for (const auto& [m, n] : outcome.window_peaks) {
      tables << "  " << m << ": " << n << '\n';
      csv << m << ",flagged_window,peaks_" << lo << '_' << hi << ',' << n << ',' << frames.size() << ",\n";
    }
    tables << '\n';
  }
  if (!outcome.failures.empty()) {
    tables << "Failed frames\n";
    for (const auto& f : outcome.failures) {
      tables << "  " << f.method << ' ' << f.source << '#' << f.frame_index << ": " << f.message << '\n';
      csv << f.method << ",failure," << f.source << '#' << f.frame_index << ",1,,\n";
    }
  }
  outcome.tables = tables.str();
  outcome.csv = csv.str();

  auto t = open_output(config.out_dir / "tables.txt");
  t << outcome.tables;
  auto r = open_output(config.out_dir / "report.csv");
  r << outcome.csv;
  if (!t || !r)
    throw IoError("failed writing report files under '" + config.out_dir.string() + "'");
  return outcome;
}

} // namespace edadecomp

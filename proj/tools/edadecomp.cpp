// Command-line front end. Every subcommand reads an optional flat key=value
// file via --config; each key can be overridden by a flag of the same name.
// Exit codes: 0 success, 1 failure or partial failure, 2 usage error.

#include "edadecomp/checkpoint.hpp"
#include "edadecomp/errors.hpp"
#include "edadecomp/features.hpp"
#include "edadecomp/harness.hpp"
#include "edadecomp/io.hpp"
#include "edadecomp/plot.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>

using namespace edadecomp;

namespace {

constexpr int kPartial = 1;
constexpr int kUsage = 2;

struct Command {
  std::string name;
  std::string description;
  std::vector<KeyHelp> keys;
  std::function<int(const KeyValues&)> run;
};

double number(const KeyValues& kv, const std::string& key) {
  const auto v = parse_double(trim(kv.at(key)));
  if (!v || !std::isfinite(*v))
    throw ConfigError("key '" + key + "': expected a number, got '" + kv.at(key) + "'");
  return *v;
}

std::size_t count(const KeyValues& kv, const std::string& key) {
  const double v = number(kv, key);
  if (v < 0 || v != std::floor(v))
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + kv.at(key) + "'");
  return static_cast<std::size_t>(v);
}

bool flag(const KeyValues& kv, const std::string& key) {
  const auto v = std::string(trim(kv.at(key)));
  if (v == "on" || v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "off" || v == "false" || v == "0" || v == "no")
    return false;
  throw ConfigError("key '" + key + "': expected on or off, got '" + v + "'");
}

std::string text(const KeyValues& kv, const std::string& key) { return std::string(trim(kv.at(key))); }

int cmd_synth(const KeyValues& kv) {
  const std::filesystem::path out = text(kv, "out");
  std::vector<ScenarioFrame> frames;
  if (const auto spec_path = text(kv, "spec"); !spec_path.empty()) {
    auto spec = synth_spec_from_key_values(read_key_values(spec_path));
    auto [frame, truth] = generate_frame(spec);
    frames.push_back({std::filesystem::path(spec_path).stem().string(), spec, std::move(frame), std::move(truth)});
  } else {
    frames = expand_scenario(text(kv, "scenario"), count(kv, "seed"));
  }
  for (const auto& s : frames) {
    const auto base = out / (s.source + "_" + std::to_string(s.spec.frame_index));
    write_session_csv(base.string() + ".csv", EdaSignal{s.frame.values(), kFrameRateHz, 0.0});
    auto truth = open_output(base.string() + "_truth.csv");
    write_truth_csv(truth, s.frame, s.truth);
    auto events = open_output(base.string() + "_events.csv");
    write_events_csv(events, s.truth);
    auto spec = open_output(base.string() + "_spec.txt");
    write_key_values(spec, to_key_values(s.spec));
    std::cout << base.string() << ".csv\n";
  }
  return 0;
}

KeyValues run_keys_from(const KeyValues& kv, const std::vector<std::string>& copy) {
  KeyValues r;
  for (const auto& k : copy)
    r[k] = kv.at(k);
  return r;
}

int cmd_decompose(const KeyValues& kv) {
  auto rk = run_keys_from(kv, {"out", "seed", "filter", "filter_cutoff_hz", "filter_order", "deconv_lambda",
                               "deconv_max_iter", "deconv_tol", "plots"});
  const auto method = text(kv, "method");
  rk["inputs"] = kv.at("input");
  rk["scenarios"] = kv.at("scenario");
  rk["methods"] = method;
  if (const int v = feel_variant(method))
    rk["checkpoint_feel" + std::to_string(v)] = kv.at("checkpoint");
  const auto config = run_config_from_key_values(rk);
  config.validate();
  const MethodRunner runner(config);
  int status = 0;
  for (const auto& sf : prepare_frames(config)) {
    const auto stem = frame_file_stem(sf, method);
    try {
      const auto d = runner.decompose(method, sf.frame);
      const auto f = frame_features(d);
      auto out = open_output(config.out_dir / "frames" / (stem + ".csv"));
      write_decomposition_csv(out, sf.frame, d, f.peak_indices);
      if (config.plots)
        emit_plot(sf.frame, d, f.peak_indices, config.out_dir / "plots" / (stem + ".svg"), stem);
      std::cout << stem << " peaks=" << f.peak_count << " slope=" << format_double(f.slope) << " ("
                << to_string(f.slope_class) << ") range=" << format_double(f.phasic_range) << '\n';
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      std::cerr << stem << ": " << e.what() << '\n';
      status = kPartial;
    }
  }
  return status;
}

int cmd_features(const KeyValues& kv) {
  const auto files = split(kv.at("inputs"), ',');
  std::vector<FrameFeatures> list;
  std::size_t index = 0;
  for (const auto& raw : files) {
    const auto path = std::string(trim(raw));
    if (path.empty())
      continue;
    const auto table = read_decomposition_csv(path);
    Decomposition d{table.tonic, table.phasic, index++, text(kv, "method")};
    const auto f = frame_features(d);
    double mean_amp = 0.0;
    for (double a : f.amplitudes)
      mean_amp += a / static_cast<double>(f.amplitudes.size());
    std::cout << path << " slope=" << format_double(f.slope) << " class=" << to_string(f.slope_class)
              << " peaks=" << f.peak_count << " mean_amplitude=" << format_double(mean_amp)
              << " range=" << format_double(f.phasic_range) << '\n';
    list.push_back(f);
  }
  if (list.empty())
    throw ConfigError("features needs at least one decomposition CSV in inputs");
  const auto report = aggregate({{text(kv, "method"), list}});
  std::cout << '\n' << render_tables(report);
  if (const auto out = text(kv, "out"); !out.empty()) {
    auto t = open_output(std::filesystem::path(out) / "tables.txt");
    t << render_tables(report);
    auto r = open_output(std::filesystem::path(out) / "report.csv");
    r << render_csv(report);
  }
  return 0;
}

int cmd_compare(const KeyValues& kv) {
  const auto outcome = run_compare(run_config_from_key_values(kv));
  std::cout << outcome.tables;
  return outcome.failures.empty() ? 0 : kPartial;
}

int cmd_train(const KeyValues& kv) {
  const auto variant = static_cast<int>(count(kv, "variant"));
  const auto arch = feel_config(variant);
  TrainConfig cfg;
  cfg.epochs = count(kv, "epochs");
  cfg.batch = count(kv, "batch");
  cfg.lr = number(kv, "lr");
  cfg.seed = count(kv, "seed");
  if (cfg.batch == 0 || !(cfg.lr > 0.0))
    throw ConfigError("batch and lr must be positive");
  cfg.on_epoch = [](std::size_t e, double loss) {
    std::cout << "epoch " << e + 1 << " loss " << format_double(loss) << std::endl;
  };

  std::vector<Frame> data;
  if (!text(kv, "inputs").empty() || !text(kv, "scenarios").empty()) {
    RunConfig rc = run_config_from_key_values(run_keys_from(kv, {"inputs", "scenarios", "seed"}));
    for (auto& sf : prepare_frames(rc))
      data.push_back(std::move(sf.frame));
  } else {
    data = synthetic_corpus(count(kv, "frames"), cfg.seed);
  }
  if (data.empty())
    throw DataError("training set is empty");

  const auto result = train(data, arch, cfg);
  save_checkpoint(result.params, std::filesystem::path(text(kv, "out")));
  if (const auto curve = text(kv, "loss_csv"); !curve.empty()) {
    auto out = open_output(curve);
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
      out << i + 1 << ',' << format_double(result.loss_curve[i]) << '\n';
  }
  std::cout << "saved " << text(kv, "out") << " (" << result.params.parameter_count() << " parameters)\n";
  if (result.status == TrainStatus::diverged) {
    std::cerr << result.report << '\n';
    return kPartial;
  }
  return 0;
}

int cmd_gradcheck(const KeyValues& kv) {
  const auto seed = count(kv, "seed");
  ForwardOptions opt;
  opt.linear_only = flag(kv, "linear_only");
  const auto route = text(kv, "route");
  if (route == "direct")
    opt.route = ad::CorrelationRoute::direct;
  else if (route != "fft")
    throw ConfigError("route must be fft or direct");
  const auto arch = toy_config();
  const auto params = init_params(arch, seed);
  const auto input = toy_sequence(arch.seq_len, seed);
  const auto r = gradcheck(params, input, count(kv, "coords"), seed, opt);
  const double threshold = number(kv, "threshold");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", r.max_relative_error);
  std::cout << "max relative error " << buf << " over " << r.coordinates << " coordinates (worst "
            << r.worst_parameter << ")\n";
  return r.max_relative_error < threshold ? 0 : kPartial;
}

int cmd_plot(const KeyValues& kv) {
  const auto in = text(kv, "input");
  if (in.empty())
    throw ConfigError("plot needs input");
  const auto table = read_decomposition_csv(in);
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < table.peak.size(); ++i)
    if (table.peak[i])
      peaks.push_back(i);
  auto out_path = text(kv, "out");
  if (out_path.empty())
    out_path = std::filesystem::path(in).replace_extension(".svg").string();
  double fs = kFrameRateHz;
  if (table.t.size() > 1 && table.t[1] > table.t[0])
    fs = 1.0 / (table.t[1] - table.t[0]);
  auto out = open_output(out_path);
  out << render_plot(table.eda, table.tonic, table.phasic, peaks, text(kv, "title"), fs);
  if (!out)
    throw IoError("failed writing '" + out_path + "'");
  std::cout << out_path << '\n';
  return 0;
}

std::vector<Command> commands() {
  std::vector<KeyHelp> filter_keys;
  std::vector<KeyHelp> deconv_keys;
  for (const auto& k : run_config_keys()) {
    if (k.key.starts_with("filter"))
      filter_keys.push_back(k);
    if (k.key.starts_with("deconv_"))
      deconv_keys.push_back(k);
  }
  auto join = [](std::vector<KeyHelp> a, const std::vector<KeyHelp>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };

  return {
      {"synth", "Generate synthetic frames with ground truth",
       {{"scenario", "step-scl", "suite, random:N, balanced:N or a suite member"},
        {"spec", "", "key=value synthetic spec file (overrides scenario)"},
        {"seed", "0", "noise seed"},
        {"out", ".", "output directory"}},
       cmd_synth},
      {"decompose", "Split frames into tonic and phasic parts with one method",
       join(join({{"input", "", "session CSV file(s), comma-separated"},
                  {"scenario", "", "synthetic scenario instead of (or besides) input"},
                  {"method", "detrend", "detrend, deconv, feel-1, feel-2 or feel-3"},
                  {"checkpoint", "", "model checkpoint for feel methods"},
                  {"out", "out", "output directory"},
                  {"seed", "0", "seed for synthetic scenarios"},
                  {"plots", "off", "also write SVG plots (on|off)"}},
                 filter_keys),
            deconv_keys),
       cmd_decompose},
      {"features", "Extract features from decomposition CSVs",
       {{"inputs", "", "decomposition CSV files, comma-separated"},
        {"method", "input", "label used in the tables"},
        {"out", "", "directory for tables.txt and report.csv (optional)"}},
       cmd_features},
      {"compare", "Run several methods and write tables.txt, report.csv and per-frame CSVs", run_config_keys(),
       cmd_compare},
      {"train", "Train a transformer decomposer and save a checkpoint",
       {{"variant", "1", "1 (pool 481), 2 (pool 241) or 3 (pool 9)"},
        {"epochs", "200", "training epochs"},
        {"batch", "4", "frames per optimiser step"},
        {"lr", "0.001", "Adam learning rate"},
        {"seed", "0", "initialisation, shuffling and corpus seed"},
        {"frames", "32", "synthetic corpus size when no inputs or scenarios are given"},
        {"inputs", "", "session CSV files to train on"},
        {"scenarios", "", "synthetic scenarios to train on"},
        {"out", "model.ckpt", "checkpoint path"},
        {"loss_csv", "", "optional per-epoch loss CSV"}},
       cmd_train},
      {"gradcheck", "Compare reverse-mode gradients with central differences on the toy model",
       {{"seed", "0", "parameter, input and coordinate seed"},
        {"coords", "200", "number of parameter coordinates"},
        {"linear_only", "off", "check only embedding -> projection (on|off)"},
        {"route", "fft", "lag score route: fft or direct"},
        {"threshold", "1e-4", "exit 0 iff the max relative error is below this"}},
       cmd_gradcheck},
      {"plot", "Render a decomposition CSV as a two-panel SVG",
       {{"input", "", "decomposition CSV"},
        {"out", "", "SVG path (default: input with .svg)"},
        {"title", "", "plot title"}},
       cmd_plot},
  };
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"EDA tonic/phasic decomposition toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  struct Bound {
    CLI::App* app;
    std::string config;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  const auto cmds = commands();
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& c : cmds) {
    auto b = std::make_unique<Bound>();
    b->app = app.add_subcommand(c.name, c.description);
    b->app->add_option("--config", b->config, "flat key=value file; flags override its entries");
    for (const auto& k : c.keys) {
      auto help = k.help;
      if (!k.default_value.empty())
        help += " [default: " + k.default_value + "]";
      b->options[k.key] = b->app->add_option("--" + k.key, b->values[k.key], help);
    }
    bound.push_back(std::move(b));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  for (std::size_t i = 0; i < cmds.size(); ++i) {
    const auto& b = *bound[i];
    if (!b.app->parsed())
      continue;
    try {
      KeyValues kv;
      for (const auto& k : cmds[i].keys)
        kv[k.key] = k.default_value;
      if (!b.config.empty()) {
        for (const auto& [key, value] : read_key_values(b.config)) {
          if (!kv.contains(key))
            throw ConfigError("unknown key '" + key + "' in " + b.config);
          kv[key] = value;
        }
      }
      for (const auto& [key, opt] : b.options)
        if (opt->count() > 0)
          kv[key] = b.values.at(key);
      return cmds[i].run(kv);
    } catch (const ConfigError& e) {
      std::cerr << "usage error: " << e.what() << "\nRun with " << cmds[i].name << " --help for options.\n";
      return kUsage;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kPartial;
    }
  }
  return kUsage;
}

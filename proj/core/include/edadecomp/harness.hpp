#pragma once

#include "edadecomp/deconv.hpp"
#include "edadecomp/features.hpp"
#include "edadecomp/feel_transformer.hpp"
#include "edadecomp/signal.hpp"
#include "edadecomp/synth.hpp"
#include "edadecomp/text.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace edadecomp {

// --- scenarios -------------------------------------------------------------

// Named single-frame scenarios making up the bundled suite, in suite order.
const std::vector<std::string>& suite_scenarios();

struct ScenarioFrame {
  std::string source; // e.g. "step-scl" or "random-3"
  SynthSpec spec;
  Frame frame;
  GroundTruth truth;
};

// Expands one scenario name into frames. Accepted names: the suite members,
// "suite", "random:N" (N corpus frames) and "balanced:N" (equal thirds of
// falling, stable and rising linear tonics). Throws ConfigError otherwise.
std::vector<ScenarioFrame> expand_scenario(const std::string& name, std::uint64_t seed);

// Corpus ranges for training: the defaults with sensor-level noise
// (sigma 0.002 µS) instead of the 0.01 µS stress level.
CorpusOptions training_corpus_options();

// Random linear-tonic training corpus of `count` frames.
std::vector<Frame> synthetic_corpus(std::size_t count, std::uint64_t seed,
                                    const CorpusOptions& options = training_corpus_options());

// --- methods ---------------------------------------------------------------

const std::vector<std::string>& known_methods(); // detrend deconv feel-1 feel-2 feel-3
// 1, 2 or 3 for "feel-N" methods, 0 otherwise.
int feel_variant(const std::string& method);

// --- run configuration -----------------------------------------------------

struct RunConfig {
  std::vector<std::string> inputs;    // session CSV paths
  std::vector<std::string> scenarios; // scenario names
  std::vector<std::string> methods;
  std::map<std::string, std::string> checkpoints; // method -> path
  std::filesystem::path out_dir = "out";
  bool filter = true;
  FilterSpec filter_spec;
  std::uint64_t seed = 0;
  SolverOptions solver;
  std::optional<std::pair<double, double>> flag_window; // seconds within a frame
  bool plots = false;

  // ConfigError unless at least one method and one source are given, every
  // method is known, referenced files exist and feel methods have checkpoints.
  void validate() const;
};

// Accepted keys with their defaults and one-line help, in display order.
struct KeyHelp {
  std::string key;
  std::string default_value;
  std::string help;
};
const std::vector<KeyHelp>& run_config_keys();

// Throws ConfigError on unknown keys or malformed values.
RunConfig run_config_from_key_values(const KeyValues& kv);

struct SourceFrame {
  std::string source;
  Frame frame;
};

// Loads inputs (resampled to 8 Hz, optionally low-pass filtered, framed) and
// expands scenarios; scenario frames pass through the same filter.
std::vector<SourceFrame> prepare_frames(const RunConfig& config);

// Loads per-method resources once (dictionary, tonic basis, checkpoints) and
// decomposes frames with any configured method.
class MethodRunner {
public:
  explicit MethodRunner(const RunConfig& config);
  Decomposition decompose(const std::string& method, const Frame& frame) const;

private:
  SolverOptions solver_;
  KernelDictionary dict_;
  TonicBasis basis_;
  std::map<std::string, ModelParams> models_;
};

// <source>_<index>_<method>, restricted to file-name-safe characters.
std::string frame_file_stem(const SourceFrame& frame, const std::string& method);

struct FrameFailure {
  std::string method;
  std::string source;
  std::size_t frame_index = 0;
  std::string message;
};

struct RunOutcome {
  HistogramReport report;
  std::vector<FrameFailure> failures;
  // Per method: peaks whose time falls inside the flag window.
  std::vector<std::pair<std::string, std::size_t>> window_peaks;
  std::string tables;
  std::string csv;
};

// Decomposes every frame with every method, writes per-frame CSVs (and SVGs
// when enabled) under out_dir/frames, tables.txt and report.csv. A failing
// method/frame pair is recorded and the run continues.
RunOutcome run_compare(const RunConfig& config);

} // namespace edadecomp

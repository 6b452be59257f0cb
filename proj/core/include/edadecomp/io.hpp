#pragma once

#include "edadecomp/decomposition.hpp"
#include "edadecomp/signal.hpp"
#include "edadecomp/synth.hpp"

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

namespace edadecomp {

// Session CSV: header line, then `timestamp_s,eda_us` rows. Irregular
// timestamps are interpolated onto a uniform grid at the median spacing, then
// the signal is resampled to 8 Hz. Errors name the offending line.
EdaSignal parse_session_csv(std::istream& in, const std::string& source = "<stream>");
EdaSignal load_csv(const std::filesystem::path& path);

// Writes timestamps origin + i / fs (origin defaults to 0) at full precision.
void write_session_csv(std::ostream& out, const EdaSignal& signal);
void write_session_csv(const std::filesystem::path& path, const EdaSignal& signal);

// Per-frame decomposition: `t,eda,tonic,phasic,peak` with peak in {0, 1}.
struct DecompositionTable {
  std::vector<double> t, eda, tonic, phasic;
  std::vector<int> peak;
};
void write_decomposition_csv(std::ostream& out, const Frame& frame, const Decomposition& d,
                             const std::vector<std::size_t>& peak_indices);
DecompositionTable read_decomposition_csv(const std::filesystem::path& path);

// Synthetic ground truth: `t,eda,tonic,phasic` and `onset_s,amplitude`.
void write_truth_csv(std::ostream& out, const Frame& frame, const GroundTruth& truth);
void write_events_csv(std::ostream& out, const GroundTruth& truth);

// Opens a file for writing or throws IoError.
std::ofstream open_output(const std::filesystem::path& path);

} // namespace edadecomp

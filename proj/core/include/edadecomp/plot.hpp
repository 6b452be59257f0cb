#pragma once

#include "edadecomp/decomposition.hpp"
#include "edadecomp/signal.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace edadecomp {

// Two-panel static SVG: EDA (black) with tonic (green) on the left, phasic
// with red peak markers on the right. Axes in seconds and µS.
std::string render_plot(std::span<const double> eda, std::span<const double> tonic,
                        std::span<const double> phasic, const std::vector<std::size_t>& peaks,
                        const std::string& title, double fs = kFrameRateHz);

// Throws IoError when the file cannot be written.
void emit_plot(const Frame& frame, const Decomposition& d, const std::vector<std::size_t>& peaks,
               const std::filesystem::path& path, const std::string& title = "");

} // namespace edadecomp

#pragma once

#include "edadecomp/signal.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace edadecomp {

// Tonic/phasic split of one frame. Every method in this library uses the
// residual convention phasic = frame - tonic, so the pair reconstructs the
// frame up to rounding.
struct Decomposition {
  std::vector<double> tonic;
  std::vector<double> phasic;
  std::size_t frame_index = 0;
  std::string method;
};

Decomposition residual_decomposition(const Frame& frame, std::vector<double> tonic,
                                     std::string method);

// max |frame - tonic - phasic|
double reconstruction_error(const Frame& frame, const Decomposition& d);

} // namespace edadecomp

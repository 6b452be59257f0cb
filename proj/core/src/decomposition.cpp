#include "edadecomp/decomposition.hpp"

#include "edadecomp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace edadecomp {

Decomposition residual_decomposition(const Frame& frame, std::vector<double> tonic,
                                     std::string method) {
  if (tonic.size() != frame.size())
    throw InternalError("tonic length does not match frame");
  Decomposition d;
  d.phasic.resize(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i)
    d.phasic[i] = frame[i] - tonic[i];
  d.tonic = std::move(tonic);
  d.frame_index = frame.index();
  d.method = std::move(method);
  return d;
}

double reconstruction_error(const Frame& frame, const Decomposition& d) {
  double worst = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i)
    worst = std::max(worst, std::abs(frame[i] - d.tonic[i] - d.phasic[i]));
  return worst;
}

} // namespace edadecomp

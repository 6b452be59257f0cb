#pragma once

#include "edadecomp/autodiff.hpp"
#include "edadecomp/decomposition.hpp"
#include "edadecomp/signal.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace edadecomp {

// Architecture of the autocorrelation transformer decomposer. The SCL branch
// is a parameter-free centred average pool; the SCR branch is value embedding
// -> encoder blocks -> decoder blocks -> projection to one channel.
struct ArchConfig {
  std::size_t d_model = 32;
  std::size_t n_heads = 4;
  std::size_t ff_dim = 16;
  std::size_t n_encoder = 1;
  std::size_t n_decoder = 2;
  std::size_t pool_kernel = 481; // 8*60+1, 8*30+1 or 8*1+1 in the reference models
  std::size_t seq_len = kFrameLength;
  double autocorr_factor = 1.0;
  std::size_t decomp_kernel = 25;

  // max(1, floor(autocorr_factor * ln(seq_len)))
  std::size_t top_k() const;
  // Throws ConfigError on an even/oversized kernel or d_model % n_heads != 0.
  void validate() const;

  bool operator==(const ArchConfig&) const = default;
};

ArchConfig feel_config(int variant); // 1: kernel 481, 2: 241, 3: 9

// Centred moving average with replicate padding of (kernel - 1) / 2 samples.
std::vector<double> avg_pool_scl(std::span<const double> values, std::size_t kernel);

// Named learnable tensors; std::map keeps a stable iteration order, which
// fixes the optimiser update order and the checkpoint layout.
struct ModelParams {
  ArchConfig arch;
  std::map<std::string, ad::Tensor> tensors;

  std::size_t parameter_count() const;
  void zero_grad();
  bool all_finite() const;
  ModelParams clone() const;
};

// Uniform(+-1/sqrt(fan_in)) initialisation from a fixed seed.
ModelParams init_params(const ArchConfig& arch, std::uint64_t seed);

// Expected tensor shapes for an architecture, keyed by parameter name.
std::map<std::string, std::vector<std::size_t>> parameter_shapes(const ArchConfig& arch);

struct DecomposedOutput {
  std::vector<double> scl;
  std::vector<double> scr;
  std::vector<double> recon;
};

struct ForwardOptions {
  // Skips attention, feed-forward, decomposition and normalisation inside the
  // SCR branch, leaving embedding -> projection (a purely linear network).
  bool linear_only = false;
  ad::CorrelationRoute route = ad::CorrelationRoute::fft;
};

// Graph-level forward on an already normalised sequence; used by training
// and gradient checking.
struct ForwardGraph {
  std::vector<double> scl;
  ad::Tensor scr;   // [seq_len, 1]
  ad::Tensor recon; // [seq_len, 1]
};
ForwardGraph forward_graph(std::span<const double> normalized, const ModelParams& params,
                           const ForwardOptions& options = {});

// Per-frame standardisation; the standard deviation is floored at 1e-6.
struct Normalization {
  double mean = 0.0;
  double scale = 1.0;
};
Normalization normalization_of(std::span<const double> values);

// Normalises, runs the network, and maps scl/scr back to µS.
// Throws NumericError naming the block on a non-finite activation.
DecomposedOutput forward(std::span<const double> values, const ModelParams& params,
                         const ForwardOptions& options = {});
DecomposedOutput forward(const Frame& frame, const ModelParams& params);

double mse_loss(std::span<const double> frame, std::span<const double> recon);

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
};

// Central differences (step 1e-5) on randomly chosen coordinates of the
// reconstruction MSE against reverse-mode gradients. Coordinates are drawn
// uniformly over all parameters.
GradcheckResult gradcheck(const ModelParams& params, std::span<const double> input,
                          std::size_t coordinates, std::uint64_t seed,
                          const ForwardOptions& options = {});

ArchConfig toy_config();
// Smooth random test sequence of the given length (sum of sinusoids + bumps).
std::vector<double> toy_sequence(std::size_t len, std::uint64_t seed);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Called after every epoch with (epoch, mean loss) when set.
  std::function<void(std::size_t, double)> on_epoch;
};

enum class TrainStatus { completed, diverged };

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_curve; // mean per-frame MSE for each epoch
  TrainStatus status = TrainStatus::completed;
  std::string report;
};

// Adam on the normalised-frame reconstruction MSE. Frames are shuffled each
// epoch with a generator seeded from config.seed. Aborts (status diverged)
// when the epoch loss exceeds 10x the first epoch loss three epochs in a row.
TrainResult train(const std::vector<std::vector<double>>& dataset, const ModelParams& initial,
                  const TrainConfig& config);
TrainResult train(const std::vector<Frame>& dataset, const ArchConfig& arch, const TrainConfig& config);

// tonic = scl, phasic = frame - tonic.
Decomposition transformer_decompose(const Frame& frame, const ModelParams& params,
                                    const std::string& method = "feel");

} // namespace edadecomp

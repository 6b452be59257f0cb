#pragma once

#include "edadecomp/decomposition.hpp"
#include "edadecomp/signal.hpp"
#include "edadecomp/synth.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace edadecomp {

// Square dictionary of onset-shifted, peak-normalised Bateman kernels:
// column j holds the kernel starting at sample j, truncated at the frame end.
// Stored implicitly as the single sampled kernel (the matrix is Toeplitz).
class KernelDictionary {
public:
  KernelDictionary(const BatemanParams& bateman, double fs, std::size_t length = kFrameLength);

  std::size_t size() const { return length_; }
  const BatemanParams& bateman() const { return bateman_; }
  double fs() const { return fs_; }
  const std::vector<double>& kernel() const { return kernel_; }

  double at(std::size_t row, std::size_t col) const;
  std::vector<double> column(std::size_t col) const;

  // out = D * d
  void apply(std::span<const double> d, std::span<double> out) const;
  // out = D^T * r
  void apply_transpose(std::span<const double> r, std::span<double> out) const;

private:
  BatemanParams bateman_;
  double fs_;
  std::size_t length_;
  std::vector<double> kernel_;
};

KernelDictionary build_dictionary(const BatemanParams& bateman, double fs);

// Smooth tonic model: uniform cubic B-splines centred every knot_spacing
// seconds from 0 to the frame end (7 columns for 180 s / 30 s) plus a
// constant column. The edge columns absorb one phantom spline beyond each
// end so the fit is a natural cubic spline: the spline columns sum to one
// and reproduce straight lines over the whole frame.
class TonicBasis {
public:
  TonicBasis(std::size_t length, double fs, double knot_spacing_s);

  const Eigen::MatrixXd& matrix() const { return columns_; }
  std::size_t rows() const { return static_cast<std::size_t>(columns_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(columns_.cols()); }
  std::size_t spline_columns() const { return cols() - 1; }
  double knot_spacing() const { return spacing_; }

  std::vector<double> evaluate(std::span<const double> coeffs) const;

private:
  Eigen::MatrixXd columns_;
  double spacing_;
};

TonicBasis build_tonic_basis(double knot_spacing_s = 30.0, double fs = kFrameRateHz,
                             std::size_t length = kFrameLength);

// Centred cubic B-spline with unit knot spacing, support [-2, 2].
double cubic_bspline(double u);

enum class SolverStatus {
  converged,     // relative decrease fell below the tolerance
  iteration_cap, // cap hit but last decrease <= 1e-6
  not_converged, // cap hit with a larger decrease
};

struct DeconvSolution {
  std::vector<double> driver; // nonnegative activations, one per onset sample
  std::vector<double> tonic_coeffs;
  double lambda = 0.0;
  std::size_t iterations = 0;
  std::size_t restarts = 0;
  double final_objective = 0.0;
  double lipschitz = 0.0;
  SolverStatus status = SolverStatus::not_converged;
  std::vector<double> objective_history; // after each outer iteration
};

struct SolverOptions {
  std::optional<double> lambda; // default 1e-3 * max|x|
  std::size_t max_iterations = 5000;
  double relative_tolerance = 1e-8;
  std::size_t power_iterations = 50;
};

double default_lambda(std::span<const double> x);

// Approximately minimises 0.5 ||x - D d - B c||^2 + lambda * sum(d), d >= 0,
// with FISTA on d (adaptive restart keeps the objective monotone) and an exact
// least-squares tonic refit at every evaluation.
DeconvSolution fit_sparse(std::span<const double> x, const KernelDictionary& dict,
                          const TonicBasis& basis, const SolverOptions& options = {});
DeconvSolution fit_sparse(const Frame& frame, const KernelDictionary& dict,
                          const TonicBasis& basis, double lambda);

// 0.5 ||x - D d - B c||^2 + lambda * sum(d)
double deconv_objective(std::span<const double> x, std::span<const double> driver,
                        std::span<const double> coeffs, double lambda,
                        const KernelDictionary& dict, const TonicBasis& basis);

// Largest KKT violation of the driver at the solution: |g + lambda| on active
// entries and max(0, -(g + lambda)) on inactive ones, g = -D^T residual.
double kkt_violation(std::span<const double> x, const DeconvSolution& solution,
                     const KernelDictionary& dict, const TonicBasis& basis);

// tonic = B c, phasic = frame - tonic.
Decomposition deconv_decompose(const Frame& frame, const DeconvSolution& solution,
                               const KernelDictionary& dict, const TonicBasis& basis);

} // namespace edadecomp

#include "edadecomp/deconv.hpp"

#include "edadecomp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace edadecomp {

KernelDictionary::KernelDictionary(const BatemanParams& bateman, double fs, std::size_t length)
    : bateman_(bateman), fs_(fs), length_(length), kernel_(sampled_kernel(bateman, fs)) {
  if (kernel_.size() > length_)
    kernel_.resize(length_);
}

double KernelDictionary::at(std::size_t row, std::size_t col) const {
  if (row < col || row - col >= kernel_.size())
    return 0.0;
  return kernel_[row - col];
}

std::vector<double> KernelDictionary::column(std::size_t col) const {
  std::vector<double> c(length_, 0.0);
  for (std::size_t k = 0; k < kernel_.size() && col + k < length_; ++k)
    c[col + k] = kernel_[k];
  return c;
}

void KernelDictionary::apply(std::span<const double> d, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t klen = kernel_.size();
  for (std::size_t j = 0; j < length_; ++j) {
    const double w = d[j];
    if (w == 0.0)
      continue;
    const std::size_t end = std::min(klen, length_ - j);
    double* o = out.data() + j;
    for (std::size_t k = 0; k < end; ++k)
      o[k] += w * kernel_[k];
  }
}

void KernelDictionary::apply_transpose(std::span<const double> r, std::span<double> out) const {
  const std::size_t klen = kernel_.size();
  for (std::size_t j = 0; j < length_; ++j) {
    const std::size_t end = std::min(klen, length_ - j);
    const double* ri = r.data() + j;
    double acc = 0.0;
    for (std::size_t k = 0; k < end; ++k)
      acc += kernel_[k] * ri[k];
    out[j] = acc;
  }
}

KernelDictionary build_dictionary(const BatemanParams& bateman, double fs) {
  return KernelDictionary(bateman, fs, kFrameLength);
}

double cubic_bspline(double u) {
  const double a = std::abs(u);
  if (a >= 2.0)
    return 0.0;
  if (a >= 1.0) {
    const double b = 2.0 - a;
    return b * b * b / 6.0;
  }
  return (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0;
}

TonicBasis::TonicBasis(std::size_t length, double fs, double knot_spacing_s) : spacing_(knot_spacing_s) {
  if (!(knot_spacing_s > 0.0) || !(fs > 0.0) || length < 2)
    throw ConfigError("invalid tonic basis parameters");
  const double duration = static_cast<double>(length) / fs;
  const auto centres = static_cast<std::size_t>(std::floor(duration / knot_spacing_s + 1e-9)) + 1;
  columns_.resize(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(centres + 1));
  if (centres < 2)
    throw ConfigError("tonic basis needs at least two knot centres");
  const auto last = static_cast<Eigen::Index>(centres - 1);
  for (std::size_t i = 0; i < length; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double u = static_cast<double>(i) / fs / knot_spacing_s;
    for (std::size_t k = 0; k < centres; ++k)
      columns_(row, static_cast<Eigen::Index>(k)) = cubic_bspline(u - static_cast<double>(k));
    // Phantom splines one spacing outside the frame, with coefficients
    // extrapolated linearly (c[-1] = 2 c[0] - c[1]): zero curvature at both ends.
    const double before = cubic_bspline(u + 1.0), after = cubic_bspline(u - static_cast<double>(centres));
    columns_(row, 0) += 2.0 * before;
    columns_(row, 1) -= before;
    columns_(row, last) += 2.0 * after;
    columns_(row, last - 1) -= after;
    columns_(row, last + 1) = 1.0;
  }
}

std::vector<double> TonicBasis::evaluate(std::span<const double> coeffs) const {
  if (coeffs.size() != cols())
    throw InternalError("tonic coefficient count mismatch");
  const Eigen::Map<const Eigen::VectorXd> c(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
  const Eigen::VectorXd v = columns_ * c;
  return {v.data(), v.data() + v.size()};
}

TonicBasis build_tonic_basis(double knot_spacing_s, double fs, std::size_t length) {
  return TonicBasis(length, fs, knot_spacing_s);
}

double default_lambda(std::span<const double> x) {
  double m = 0.0;
  for (double v : x)
    m = std::max(m, std::abs(v));
  return 1e-3 * m;
}

namespace {

using Vec = std::vector<double>;

// Evaluates the reduced objective: for a given D d, refits the tonic exactly.
struct TonicSolver {
  const TonicBasis& basis;
  // The constant column duplicates the splines' partition of unity, so the
  // Gram matrix is singular; the complete orthogonal decomposition returns
  // the minimum-norm coefficients.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> gram;

  explicit TonicSolver(const TonicBasis& b) : basis(b), gram(b.matrix().transpose() * b.matrix()) {}

  // Fills coeffs and residual = x - Dd - B c; returns 0.5 ||residual||^2.
  double refit(std::span<const double> x, const Vec& dd, Eigen::VectorXd& coeffs, Vec& residual) const {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::Map<Eigen::VectorXd> r(residual.data(), n);
    for (Eigen::Index i = 0; i < n; ++i)
      r[i] = x[static_cast<std::size_t>(i)] - dd[static_cast<std::size_t>(i)];
    coeffs = gram.solve(basis.matrix().transpose() * r);
    r.noalias() -= basis.matrix() * coeffs;
    return 0.5 * r.squaredNorm();
  }
};

double l1_sum(const Vec& d) { return std::accumulate(d.begin(), d.end(), 0.0); }

// Largest eigenvalue of [D B]^T [D B] by power iteration from a fixed start.
double estimate_lipschitz(const KernelDictionary& dict, const TonicBasis& basis, std::size_t steps) {
  const std::size_t n = dict.size();
  const auto m = static_cast<Eigen::Index>(basis.cols());
  Vec vd(n, 1.0), tmp(n), back(n);
  Eigen::VectorXd vc = Eigen::VectorXd::Ones(m);
  double lambda = 0.0;
  for (std::size_t it = 0; it < std::max<std::size_t>(steps, 1); ++it) {
    double norm = std::sqrt(std::inner_product(vd.begin(), vd.end(), vd.begin(), 0.0) + vc.squaredNorm());
    for (double& v : vd)
      v /= norm;
    vc /= norm;
    // w = D vd + B vc
    dict.apply(vd, tmp);
    Eigen::Map<Eigen::VectorXd> w(tmp.data(), static_cast<Eigen::Index>(n));
    w.noalias() += basis.matrix() * vc;
    // back-projection
    dict.apply_transpose(tmp, back);
    const Eigen::VectorXd bc = basis.matrix().transpose() * w;
    lambda = std::inner_product(back.begin(), back.end(), vd.begin(), 0.0) + bc.dot(vc);
    vd = back;
    vc = bc;
  }
  return lambda;
}

} // namespace

double deconv_objective(std::span<const double> x, std::span<const double> driver,
                        std::span<const double> coeffs, double lambda,
                        const KernelDictionary& dict, const TonicBasis& basis) {
  Vec dd(x.size());
  dict.apply(driver, dd);
  const auto tonic = basis.evaluate(coeffs);
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - dd[i] - tonic[i];
    sq += r * r;
  }
  double l1 = 0.0;
  for (double v : driver)
    l1 += v;
  return 0.5 * sq + lambda * l1;
}

DeconvSolution fit_sparse(std::span<const double> x, const KernelDictionary& dict,
                          const TonicBasis& basis, const SolverOptions& options) {
  const std::size_t n = dict.size();
  if (x.size() != n || basis.rows() != n)
    throw DataError("signal length does not match the dictionary");
  for (double v : x)
    if (!std::isfinite(v))
      throw DataError("non-finite sample in deconvolution input");
  const double lambda = options.lambda.value_or(default_lambda(x));
  if (!(lambda >= 0.0))
    throw ConfigError("lambda must be >= 0");

  const TonicSolver tonic(basis);
  double lip = 1.01 * estimate_lipschitz(dict, basis, options.power_iterations);
  if (!(lip > 0.0))
    throw NumericError("Lipschitz estimate is not positive");

  DeconvSolution sol;
  sol.lambda = lambda;

  Vec d(n, 0.0), dd(n, 0.0);      // current iterate and D d
  Vec y(n, 0.0), dy(n, 0.0);      // momentum point and D y
  Vec z(n), dz(n), grad(n), res(n), res_y(n);
  Eigen::VectorXd coeffs, coeffs_z;
  double f_d = tonic.refit(x, dd, coeffs, res) + lambda * l1_sum(d);
  double t = 1.0;
  double last_decrease = std::numeric_limits<double>::infinity();

  auto prox_step = [&](const Vec& from, const Vec& d_from) {
    Eigen::VectorXd c;
    tonic.refit(x, d_from, c, res_y);
    dict.apply_transpose(res_y, grad); // grad of smooth part is -grad
    for (std::size_t i = 0; i < n; ++i)
      z[i] = std::max(0.0, from[i] + (grad[i] - lambda) / lip);
    dict.apply(z, dz);
    return tonic.refit(x, dz, coeffs_z, res) + lambda * l1_sum(z);
  };

  std::size_t it = 0;
  for (; it < options.max_iterations; ++it) {
    double f_z = prox_step(y, dy);
    if (f_z > f_d) {
      // Adaptive restart: drop momentum and take a plain proximal step, which
      // cannot increase the objective for a valid step size.
      ++sol.restarts;
      t = 1.0;
      y = d;
      dy = dd;
      f_z = prox_step(y, dy);
      for (int grow = 0; f_z > f_d && grow < 30; ++grow) {
        lip *= 2.0;
        f_z = prox_step(y, dy);
      }
      if (f_z > f_d) {
        sol.objective_history.push_back(f_d);
        last_decrease = 0.0;
        break;
      }
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = z[i] + beta * (z[i] - d[i]);
      dy[i] = dz[i] + beta * (dz[i] - dd[i]);
    }
    t = t_next;
    last_decrease = (f_d - f_z) / std::max(std::abs(f_d), 1e-300);
    d.swap(z);
    dd.swap(dz);
    coeffs = coeffs_z;
    f_d = f_z;
    sol.objective_history.push_back(f_d);
    if (!std::isfinite(f_d))
      throw NumericError("deconvolution objective became non-finite");
    if (last_decrease < options.relative_tolerance) {
      ++it;
      break;
    }
  }

  sol.iterations = it;
  sol.lipschitz = lip;
  sol.driver = std::move(d);
  if (coeffs.size() == 0)
    tonic.refit(x, dd, coeffs, res);
  sol.tonic_coeffs.assign(coeffs.data(), coeffs.data() + coeffs.size());
  sol.final_objective = f_d;
  if (last_decrease < options.relative_tolerance)
    sol.status = SolverStatus::converged;
  else if (last_decrease <= 1e-6)
    sol.status = SolverStatus::iteration_cap;
  else
    sol.status = SolverStatus::not_converged;
  return sol;
}

DeconvSolution fit_sparse(const Frame& frame, const KernelDictionary& dict, const TonicBasis& basis,
                          double lambda) {
  SolverOptions opt;
  opt.lambda = lambda;
  return fit_sparse(frame.samples(), dict, basis, opt);
}

double kkt_violation(std::span<const double> x, const DeconvSolution& solution,
                     const KernelDictionary& dict, const TonicBasis& basis) {
  const std::size_t n = dict.size();
  Vec dd(n), r(n), g(n);
  dict.apply(solution.driver, dd);
  const auto tonic = basis.evaluate(solution.tonic_coeffs);
  for (std::size_t i = 0; i < n; ++i)
    r[i] = x[i] - dd[i] - tonic[i];
  dict.apply_transpose(r, g);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = -g[i] + solution.lambda;
    if (solution.driver[i] > 0.0)
      worst = std::max(worst, std::abs(s));
    else
      worst = std::max(worst, -s);
  }
  return worst;
}

Decomposition deconv_decompose(const Frame& frame, const DeconvSolution& solution,
                               const KernelDictionary& dict, const TonicBasis& basis) {
  if (dict.size() != frame.size())
    throw DataError("dictionary does not match the frame length");
  return residual_decomposition(frame, basis.evaluate(solution.tonic_coeffs), "deconv");
}

} // namespace edadecomp

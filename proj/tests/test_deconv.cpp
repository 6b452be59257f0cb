#include "edadecomp/deconv.hpp"
#include "edadecomp/features.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace edadecomp;

namespace {

const KernelDictionary& dict() {
  static const KernelDictionary d = build_dictionary(BatemanParams{}, kFrameRateHz);
  return d;
}

const TonicBasis& basis() {
  static const TonicBasis b = build_tonic_basis();
  return b;
}

double residual_norm(std::span<const double> x, const DeconvSolution& s) {
  std::vector<double> dd(x.size());
  dict().apply(s.driver, dd);
  const auto tonic = basis().evaluate(s.tonic_coeffs);
  double r = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    r += std::pow(x[i] - dd[i] - tonic[i], 2);
  return std::sqrt(r);
}

double norm(std::span<const double> x) {
  double s = 0;
  for (double v : x)
    s += v * v;
  return std::sqrt(s);
}

void check_monotone(const DeconvSolution& s) {
  for (std::size_t i = 1; i < s.objective_history.size(); ++i)
    REQUIRE(s.objective_history[i] <= s.objective_history[i - 1]);
}

} // namespace

TEST_SUITE("deconv") {

TEST_CASE("dictionary structure") {
  const auto& d = dict();
  CHECK(d.at(0, 0) == 0.0);
  const auto c0 = d.column(0);
  CHECK(*std::max_element(c0.begin(), c0.end()) == doctest::Approx(1.0).epsilon(1e-9));
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const std::size_t j = rng() % d.size();
    const auto cj = d.column(j);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(cj[i] >= 0.0);
      CHECK(cj[i] == (i >= j ? c0[i - j] : 0.0));
    }
  }
}

TEST_CASE("implicit products match the dense matrix") {
  const auto& d = dict();
  const std::size_t n = d.size();
  Eigen::MatrixXd dense(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d.at(i, j);
  auto v = testing::uniform_noise(n, 2);
  for (std::size_t i = 0; i < n; i += 3)
    v[i] = 0.0;
  const Eigen::Map<const Eigen::VectorXd> ve(v.data(), static_cast<Eigen::Index>(n));
  std::vector<double> out(n), outt(n);
  d.apply(v, out);
  d.apply_transpose(v, outt);
  const Eigen::VectorXd ref = dense * ve, reft = dense.transpose() * ve;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(out[i] == doctest::Approx(ref(static_cast<Eigen::Index>(i))).epsilon(1e-12).scale(1.0));
    CHECK(outt[i] == doctest::Approx(reft(static_cast<Eigen::Index>(i))).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("tonic basis: 8 columns and partition of unity") {
  const auto& b = basis();
  CHECK(b.cols() == 8);
  CHECK(b.rows() == kFrameLength);
  for (std::size_t i = 0; i < b.rows(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < b.spline_columns(); ++j)
      s += b.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  CHECK(cubic_bspline(0.0) == doctest::Approx(2.0 / 3.0));
  CHECK(cubic_bspline(2.0) == 0.0);
}

TEST_CASE("tonic basis reproduces straight lines up to the frame edges") {
  const auto& b = basis();
  std::vector<double> c(b.cols(), 0.0);
  for (std::size_t k = 0; k < b.spline_columns(); ++k)
    c[k] = 2.0 - 0.003 * 30.0 * static_cast<double>(k);
  const auto y = b.evaluate(c);
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(std::abs(y[i] - (2.0 - 0.003 * Frame::time_of(i))) < 1e-9);
}

TEST_CASE("single clean kernel is located and the tonic recovered") {
  const std::size_t j = 400;
  std::vector<double> x(kFrameLength, 1.0);
  const auto& k = dict().kernel();
  for (std::size_t i = 0; i < k.size() && j + i < x.size(); ++i)
    x[j + i] += 0.5 * k[i];
  SolverOptions opt;
  opt.lambda = 1e-4;
  const auto s = fit_sparse(x, dict(), basis(), opt);
  check_monotone(s);
  const auto top = std::max_element(s.driver.begin(), s.driver.end()) - s.driver.begin();
  CHECK(std::abs(static_cast<long>(top) - static_cast<long>(j)) <= 4);
  for (double v : basis().evaluate(s.tonic_coeffs))
    CHECK(std::abs(v - 1.0) < 0.01);
  for (double v : s.driver)
    CHECK(v >= 0.0);
}

TEST_CASE("event-free spline tonic gives an almost empty driver") {
  SynthSpec spec;
  spec.tonic_kind = TonicKind::spline;
  spec.tonic_params = {2.0, 2.2, 2.1, 2.3};
  const auto [f, gt] = generate_frame(spec);
  const auto s = fit_sparse(f, dict(), basis(), default_lambda(f.samples()));
  double sum = 0;
  for (double v : s.driver)
    sum += v;
  CHECK(sum < 1e-3);
}

TEST_CASE("noisy event-free frame has a small phasic part") {
  // The default lambda suits low noise; at sigma = 0.01 it is scaled to 3 sigma,
  // below which the driver starts fitting noise bursts.
  for (const auto& [sigma, lambda] : {std::pair{0.002, 0.0}, std::pair{0.01, 0.03}}) {
    for (std::uint64_t seed : {5u, 6u}) {
      SynthSpec spec;
      spec.tonic_kind = TonicKind::linear;
      spec.tonic_params = {3.0, -0.002};
      spec.noise_sigma = sigma;
      spec.seed = seed;
      const auto [f, gt] = generate_frame(spec);
      const auto s = fit_sparse(f, dict(), basis(), lambda > 0 ? lambda : default_lambda(f.samples()));
      const auto d = deconv_decompose(f, s, dict(), basis());
      double worst = 0, recon = 0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        worst = std::max(worst, std::abs(d.phasic[i]));
        recon = std::max(recon, std::abs(d.tonic[i] + d.phasic[i] - f[i]));
      }
      CAPTURE(sigma);
      CHECK(worst < 3 * sigma + 0.01);
      CHECK(recon < 1e-12);
    }
  }
}

TEST_CASE("lambda = 0 fits at least as well as lambda > 0") {
  const auto [f, gt] = generate_frame(random_spec(3, CorpusOptions{}));
  SolverOptions zero;
  zero.lambda = 0.0;
  const auto s0 = fit_sparse(f.samples(), dict(), basis(), zero);
  const auto s1 = fit_sparse(f, dict(), basis(), 0.01);
  check_monotone(s0);
  check_monotone(s1);
  CHECK(residual_norm(f.samples(), s0) <= residual_norm(f.samples(), s1) + 1e-9);
}

TEST_CASE("five clean events are recovered") {
  SynthSpec spec;
  spec.tonic_kind = TonicKind::linear;
  spec.tonic_params = {2.0, 0.001};
  spec.events = {{15, 0.2}, {42, 0.35}, {80, 0.15}, {110, 0.5}, {150, 0.25}};
  const auto [f, gt] = generate_frame(spec);
  const auto s = fit_sparse(f, dict(), basis(), default_lambda(f.samples()));
  const auto d = deconv_decompose(f, s, dict(), basis());
  const auto peaks = detect_peaks(d.phasic);
  const double t_star = spec.bateman.peak_time();
  std::size_t hits = 0;
  for (const auto& e : gt.events)
    for (const auto& p : peaks)
      if (std::abs(Frame::time_of(p.index) - t_star - e.onset_s) <= 0.5) {
        ++hits;
        break;
      }
  CHECK(hits >= 4);
  CHECK(peaks.size() <= gt.events.size() + 1);
}

TEST_CASE("KKT conditions and determinism at convergence") {
  const auto [f, gt] = generate_frame(random_spec(8, CorpusOptions{}));
  const auto s = fit_sparse(f, dict(), basis(), default_lambda(f.samples()));
  check_monotone(s);
  CHECK(s.status != SolverStatus::not_converged);
  CHECK(kkt_violation(f.samples(), s, dict(), basis()) < 1e-4 * norm(f.samples()));
  const auto again = fit_sparse(f, dict(), basis(), default_lambda(f.samples()));
  CHECK(again.driver == s.driver);
  CHECK(again.final_objective == s.final_objective);
  CHECK(s.final_objective ==
        doctest::Approx(deconv_objective(f.samples(), s.driver, s.tonic_coeffs, s.lambda, dict(), basis())));
}

}

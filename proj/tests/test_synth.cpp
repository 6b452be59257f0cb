#include "edadecomp/errors.hpp"
#include "edadecomp/synth.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace edadecomp;

TEST_SUITE("synth") {

TEST_CASE("bateman closed form") {
  const BatemanParams p;
  CHECK(bateman(0.0, p) == 0.0);
  CHECK(bateman(-1.0, p) == 0.0);
  CHECK(bateman(1.0, p) == doctest::Approx(std::exp(-0.5) - std::exp(-1.0 / 0.7)).epsilon(1e-15));
  CHECK(bateman(1.0, p) == doctest::Approx(0.3668).epsilon(1e-3));
}

TEST_CASE("bateman argmax matches the analytic peak time") {
  const BatemanParams p{0.7, 2.0};
  const double step = 1e-5;
  double best_t = 0, best = -1;
  for (double t = 0; t < 10; t += step)
    if (bateman(t, p) > best)
      best = bateman(t, p), best_t = t;
  const double t_star = p.tau_rise * p.tau_decay / (p.tau_decay - p.tau_rise) * std::log(p.tau_decay / p.tau_rise);
  CHECK(std::abs(best_t - t_star) <= step);
  CHECK(p.peak_time() == doctest::Approx(t_star).epsilon(1e-14));
}

TEST_CASE("invalid time constants are rejected") {
  CHECK_THROWS_AS(BatemanParams({2.0, 0.7}).validate(), SpecError);
  CHECK_THROWS_AS(BatemanParams({0.0, 2.0}).validate(), SpecError);
}

TEST_CASE("constant frame without events") {
  SynthSpec s;
  const auto [f, gt] = generate_frame(s);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f[i] == 1.0);
    CHECK(gt.phasic[i] == 0.0);
  }
}

TEST_CASE("single event peaks at its amplitude at onset + t*") {
  SynthSpec s;
  s.events = {{30.0, 0.5}};
  const auto [f, gt] = generate_frame(s);
  const auto it = std::max_element(gt.phasic.begin(), gt.phasic.end());
  CHECK(std::abs(*it - 0.5) < 1e-9);
  const double t_peak = Frame::time_of(static_cast<std::size_t>(it - gt.phasic.begin()));
  CHECK(std::abs(t_peak - (30.0 + s.bateman.peak_time())) <= 0.5 / kFrameRateHz + 1e-12);
}

TEST_CASE("overlapping events superpose") {
  SynthSpec a, b, both;
  a.events = {{50.0, 0.3}};
  b.events = {{52.0, 0.4}};
  both.events = {{50.0, 0.3}, {52.0, 0.4}};
  const auto pa = generate_frame(a).second.phasic, pb = generate_frame(b).second.phasic;
  const auto pab = generate_frame(both).second.phasic;
  for (std::size_t i = 0; i < pab.size(); ++i)
    CHECK(std::abs(pab[i] - (pa[i] + pb[i])) < 1e-15);
}

TEST_CASE("noise is the exact residual and is seeded") {
  SynthSpec s;
  s.tonic_kind = TonicKind::linear;
  s.tonic_params = {2.0, 0.001};
  s.events = {{20, 0.2}, {90, 0.3}};
  s.noise_sigma = 0.01;
  s.seed = 42;
  const auto [f1, g1] = generate_frame(s);
  const auto [f2, g2] = generate_frame(s);
  CHECK(f1.values() == f2.values());
  std::vector<double> noise(f1.size());
  double var = 0;
  for (std::size_t i = 0; i < f1.size(); ++i) {
    noise[i] = f1[i] - g1.tonic[i] - g1.phasic[i];
    var += noise[i] * noise[i];
  }
  CHECK(std::sqrt(var / f1.size()) == doctest::Approx(0.01).epsilon(0.1));
  s.seed = 43;
  CHECK(generate_frame(s).first.values() != f1.values());
}

TEST_CASE("negative conductance is rejected, not clamped") {
  SynthSpec s;
  s.tonic_kind = TonicKind::linear;
  s.tonic_params = {0.1, -0.01};
  CHECK_THROWS_AS(generate_frame(s), SpecError);
}

TEST_CASE("step scenario by construction") {
  const auto spec = step_scl_spec(7);
  const auto [f, gt] = generate_frame(spec);
  CHECK(tonic_at(spec, 100.0) - tonic_at(spec, 130.0) == doctest::Approx(kStepSclHeight).epsilon(1e-12));
  CHECK(gt.events.size() == 3);
  for (const auto& e : gt.events)
    CHECK((e.onset_s < kStepSclWindowStart || e.onset_s > kStepSclWindowEnd));
  CHECK(spec.noise_sigma == 0.005);
}

TEST_CASE("spline tonic passes through its knots") {
  SynthSpec s;
  s.tonic_kind = TonicKind::spline;
  s.tonic_params = {2.0, 2.5, 1.8, 2.2};
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(tonic_at(s, kFrameSeconds * k / 3.0) == doctest::Approx(s.tonic_params[k]).epsilon(1e-12));
}

TEST_CASE("specs round-trip through key=value") {
  const auto spec = random_spec(11, CorpusOptions{});
  const auto back = synth_spec_from_key_values(to_key_values(spec));
  CHECK(generate_frame(back).first.values() == generate_frame(spec).first.values());
  KeyValues bad = to_key_values(spec);
  bad["colour"] = "blue";
  CHECK_THROWS_AS(synth_spec_from_key_values(bad), ConfigError);
}

TEST_CASE("random specs respect spacing and range") {
  CorpusOptions opt;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = random_spec(seed, opt);
    CHECK(s.events.size() <= opt.max_events);
    for (std::size_t i = 0; i < s.events.size(); ++i) {
      CHECK(s.events[i].amplitude >= opt.amplitude_min);
      CHECK(s.events[i].amplitude <= opt.amplitude_max);
      if (i)
        CHECK(s.events[i].onset_s - s.events[i - 1].onset_s >= opt.min_spacing_s);
    }
  }
}

}

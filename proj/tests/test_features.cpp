#include "edadecomp/errors.hpp"
#include "edadecomp/features.hpp"
#include "edadecomp/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numeric>

using namespace edadecomp;

namespace {

std::vector<double> kernel_train(const std::vector<ScrEvent>& events) {
  SynthSpec s;
  s.tonic_params = {0.0};
  s.events = events;
  return generate_frame(s).second.phasic;
}

FrameFeatures features_with(std::size_t peaks, std::vector<double> amps, double range, double slope) {
  FrameFeatures f;
  f.peak_count = peaks;
  f.amplitudes = std::move(amps);
  f.phasic_range = range;
  f.slope = slope;
  f.slope_class = classify_slope(slope);
  return f;
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("slope classes and boundaries") {
  CHECK(classify_slope(-0.002) == SlopeClass::falling);
  CHECK(classify_slope(0.0) == SlopeClass::stable);
  CHECK(classify_slope(0.001) == SlopeClass::stable);
  CHECK(classify_slope(-0.001) == SlopeClass::stable);
  CHECK(classify_slope(0.0010001) == SlopeClass::rising);
  double prev = -1;
  for (double s = -0.01; s <= 0.01; s += 1e-5) {
    const double c = static_cast<double>(classify_slope(s));
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("tonic slope is end-to-end over the frame duration") {
  std::vector<double> t(kFrameLength, 1.0);
  t.back() = 1.18;
  CHECK(tonic_slope(t) == doctest::Approx(0.001));
}

TEST_CASE("monotone phasic has no peaks") {
  std::vector<double> x(kFrameLength);
  std::iota(x.begin(), x.end(), 0.0);
  CHECK(detect_peaks(x).empty());
  std::reverse(x.begin(), x.end());
  CHECK(detect_peaks(x).empty());
}

TEST_CASE("single kernel gives one peak of its amplitude") {
  const auto p = detect_peaks(kernel_train({{60, 0.5}}));
  REQUIRE(p.size() == 1);
  CHECK(std::abs(p[0].amplitude - 0.5) <= 0.02);
}

TEST_CASE("two kernels 0.5 s apart merge into one peak") {
  CHECK(detect_peaks(kernel_train({{60, 0.5}, {60.5, 0.4}})).size() == 1);
}

TEST_CASE("plateau resolves to its midpoint") {
  std::vector<double> x(40, 0.0);
  for (std::size_t i = 10; i <= 14; ++i)
    x[i] = 1.0;
  const auto p = detect_peaks(x);
  REQUIRE(p.size() == 1);
  CHECK(p[0].index == 12);
}

TEST_CASE("distance conflicts keep the higher peak") {
  std::vector<double> x(60, 0.0);
  x[20] = 0.3;
  x[25] = 0.6;
  x[40] = 0.2;
  const auto p = detect_peaks(x);
  REQUIRE(p.size() == 2);
  CHECK(p[0].index == 25);
  CHECK(p[1].index == 40);
}

TEST_CASE("peak invariants on noisy data") {
  auto x = testing::uniform_noise(kFrameLength, 4, 0.0, 0.1);
  const auto p = detect_peaks(x);
  for (std::size_t i = 1; i < p.size(); ++i)
    CHECK(p[i].index >= p[i - 1].index + kMinPeakDistance);
  for (const auto& q : p)
    CHECK(q.amplitude >= kMinPeakAmplitude);
  for (auto& v : x)
    v += 3.0;
  const auto shifted = detect_peaks(x);
  REQUIRE(shifted.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(shifted[i].index == p[i].index);
    CHECK(shifted[i].amplitude == doctest::Approx(p[i].amplitude).epsilon(1e-12));
  }
}

TEST_CASE("frame features on simple inputs") {
  Decomposition flat{std::vector<double>(kFrameLength, 2.0), std::vector<double>(kFrameLength, 0.0), 0, "x"};
  const auto f = frame_features(flat);
  CHECK(f.peak_count == 0);
  CHECK(f.phasic_range == 0.0);
  CHECK(f.slope_class == SlopeClass::stable);

  std::vector<ScrEvent> ev;
  for (double t : {20.0, 50.0, 80.0, 110.0, 140.0})
    ev.push_back({t, 0.3});
  Decomposition five{std::vector<double>(kFrameLength, 1.0), kernel_train(ev), 1, "x"};
  const auto g = frame_features(five);
  CHECK(g.peak_count == 5);
  CHECK(g.peak_count == g.amplitudes.size());
  const double mean = std::accumulate(g.amplitudes.begin(), g.amplitudes.end(), 0.0) / 5.0;
  CHECK(std::abs(mean - 0.3) <= 0.05);
}

TEST_CASE("histogram bins are half-open") {
  CHECK(bin_index(amplitude_histogram(), 0.0049) == 0);
  CHECK(bin_index(amplitude_histogram(), 0.005) == 1);
  CHECK(bin_index(amplitude_histogram(), 0.25) == 3);
  CHECK(bin_index(amplitude_histogram(), 0.40) == 4);
  CHECK(bin_index(peak_count_histogram(), 11) == 2);
  CHECK(bin_index(peak_count_histogram(), 30) == 6);
  CHECK(bin_index(phasic_range_histogram(), 0.0199) == 0);
  CHECK(bin_index(phasic_range_histogram(), 10.0) == 6);
}

TEST_CASE("aggregation examples") {
  const auto r1 = aggregate({{"m", {features_with(11, std::vector<double>(11, 0.25), 0.3, 0.0)}}});
  const auto& m = r1.methods[0];
  CHECK(m.peak_count.counts[2] == 1);
  CHECK(m.peak_count.display_percent()[2] == 100);
  CHECK(m.amplitude.counts[3] == 11);
  CHECK(m.amplitude.display_percent()[3] == 100);
  CHECK(m.mean_peaks == 11.0);
  CHECK(m.mean_amplitude == doctest::Approx(0.25));
}

TEST_CASE("display percentages sum to 100 and aggregation is permutation invariant") {
  std::vector<FrameFeatures> frames;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 7; ++i) {
    std::vector<double> amps;
    const std::size_t n = rng() % 40;
    for (std::size_t k = 0; k < n; ++k)
      amps.push_back(static_cast<double>(rng() % 1000) / 1500.0);
    frames.push_back(features_with(n, amps, static_cast<double>(rng() % 1000) / 400.0,
                                   (static_cast<double>(rng() % 100) - 50.0) / 10000.0));
  }
  const auto r = aggregate({{"a", frames}});
  for (const auto* h : {&r.methods[0].slope, &r.methods[0].peak_count, &r.methods[0].amplitude,
                        &r.methods[0].phasic_range}) {
    const auto p = h->display_percent();
    CHECK(std::accumulate(p.begin(), p.end(), 0) == 100);
  }
  auto shuffled = frames;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(render_csv(aggregate({{"a", shuffled}})) == render_csv(r));
}

TEST_CASE("empty aggregation is an error") {
  CHECK_THROWS_AS(aggregate({}), DataError);
  CHECK_THROWS_AS(aggregate({{"m", {}}}), DataError);
}

TEST_CASE("rendered outputs") {
  const auto r = aggregate({{"detrend", {features_with(3, {0.1, 0.2, 0.3}, 0.4, 0.002)}},
                            {"deconv", {features_with(0, {}, 0.01, -0.002)}}});
  const auto t = render_tables(r);
  CHECK(t.find("Tonic slope classes") != std::string::npos);
  CHECK(t.find("Phasic range max-min") != std::string::npos);
  CHECK(t.find("detrend") != std::string::npos);
  const auto csv = render_csv(r);
  CHECK(csv.rfind("method,histogram,bin,count,total,value\n", 0) == 0);
  CHECK(csv.find("deconv,tonic_slope,Falling,1,1,100") != std::string::npos);
}

}

#include "edadecomp/deconv.hpp"
#include "edadecomp/detrend.hpp"
#include "edadecomp/features.hpp"
#include "edadecomp/feel_transformer.hpp"
#include "edadecomp/synth.hpp"

#include <benchmark/benchmark.h>

using namespace edadecomp;

namespace {

Frame corpus_frame(std::uint64_t seed) { return generate_frame(random_spec(seed, CorpusOptions{})).first; }

void BM_TheilSen(benchmark::State& state) {
  const auto f = corpus_frame(1);
  for (auto _ : state)
    benchmark::DoNotOptimize(theil_sen(f));
}
BENCHMARK(BM_TheilSen)->Unit(benchmark::kMillisecond);

void BM_FitSparse(benchmark::State& state) {
  const auto dict = build_dictionary(BatemanParams{}, kFrameRateHz);
  const auto basis = build_tonic_basis();
  const auto f = corpus_frame(2);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_sparse(f, dict, basis, default_lambda(f.samples())));
}
BENCHMARK(BM_FitSparse)->Unit(benchmark::kMillisecond);

void BM_FeelForward(benchmark::State& state) {
  const auto params = init_params(feel_config(1), 0);
  const auto f = corpus_frame(3);
  for (auto _ : state)
    benchmark::DoNotOptimize(forward(f, params));
}
BENCHMARK(BM_FeelForward)->Unit(benchmark::kMillisecond);

// One forward plus backward pass, the unit of training cost.
void BM_FeelTrainStep(benchmark::State& state) {
  const auto params = init_params(feel_config(1), 0);
  const auto f = corpus_frame(4);
  const auto n = normalization_of(f.samples());
  std::vector<double> z(f.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = (f[i] - n.mean) / n.scale;
  for (auto _ : state) {
    const auto g = forward_graph(z, params);
    ad::backward(ad::mse(g.recon, z));
  }
}
BENCHMARK(BM_FeelTrainStep)->Unit(benchmark::kMillisecond);

void BM_LagScores(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 8;
  std::vector<double> q(len * d), k(len * d);
  NormalSource rng(5);
  for (auto& v : q)
    v = rng.normal();
  for (auto& v : k)
    v = rng.normal();
  const bool fft = state.range(1) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(fft ? ad::lag_scores_fft(q, k, len, d) : ad::lag_scores_direct(q, k, len, d));
}
BENCHMARK(BM_LagScores)->Args({1440, 0})->Args({1440, 1})->ArgNames({"len", "fft"});

void BM_DetectPeaks(benchmark::State& state) {
  const auto [f, truth] = generate_frame(random_spec(6, CorpusOptions{}));
  for (auto _ : state)
    benchmark::DoNotOptimize(detect_peaks(truth.phasic));
}
BENCHMARK(BM_DetectPeaks);

} // namespace

BENCHMARK_MAIN();

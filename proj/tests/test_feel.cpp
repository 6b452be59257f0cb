#include "edadecomp/errors.hpp"
#include "edadecomp/features.hpp"
#include "edadecomp/feel_transformer.hpp"
#include "edadecomp/synth.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace edadecomp;

namespace {

std::vector<double> brute_pool(std::span<const double> x, std::size_t kernel) {
  const long n = static_cast<long>(x.size()), h = static_cast<long>(kernel / 2);
  std::vector<double> out(x.size());
  for (long i = 0; i < n; ++i) {
    double s = 0;
    for (long k = -h; k <= h; ++k)
      s += x[static_cast<std::size_t>(std::clamp(i + k, 0L, n - 1))];
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(kernel);
  }
  return out;
}

std::vector<std::vector<double>> toy_dataset(std::size_t n, std::uint64_t seed) {
  std::vector<std::vector<double>> d;
  for (std::size_t i = 0; i < n; ++i)
    d.push_back(toy_sequence(toy_config().seq_len, seed + i));
  return d;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  if (a.tensors.size() != b.tensors.size())
    return false;
  for (const auto& [name, t] : a.tensors) {
    const auto it = b.tensors.find(name);
    if (it == b.tensors.end())
      return false;
    const auto x = t.values(), y = it->second.values();
    if (!std::equal(x.begin(), x.end(), y.begin(), y.end()))
      return false;
  }
  return true;
}

} // namespace

TEST_SUITE("feel") {

TEST_CASE("configurations") {
  CHECK(feel_config(1).pool_kernel == 481);
  CHECK(feel_config(2).pool_kernel == 241);
  CHECK(feel_config(3).pool_kernel == 9);
  CHECK_THROWS_AS(feel_config(4), ConfigError);
  CHECK(feel_config(1).top_k() == 7); // floor(ln 1440)
  CHECK(toy_config().top_k() == 4);   // floor(ln 64)
  auto a = feel_config(1);
  a.pool_kernel = 480;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  a = feel_config(1);
  a.n_heads = 3;
  CHECK_THROWS_AS(a.validate(), ConfigError);
}

TEST_CASE("average pool matches the brute-force window") {
  const auto x = testing::uniform_noise(kFrameLength, 1, 0.5, 5.0);
  for (std::size_t k : {9u, 241u, 481u})
    CHECK(testing::max_abs_diff(avg_pool_scl(x, k), brute_pool(x, k)) < 1e-9);
}

TEST_CASE("average pool: impulse, ramp, constant, even kernel") {
  std::vector<double> imp(kFrameLength, 0.0);
  imp[700] = 1.0;
  const auto y = avg_pool_scl(imp, 9);
  for (std::size_t i = 0; i < kFrameLength; ++i)
    CHECK(y[i] == doctest::Approx((i >= 696 && i <= 704) ? 1.0 / 9 : 0.0).epsilon(1e-12));

  std::vector<double> ramp(kFrameLength);
  for (std::size_t i = 0; i < kFrameLength; ++i)
    ramp[i] = 0.01 * static_cast<double>(i);
  const auto r = avg_pool_scl(ramp, 481);
  for (std::size_t i = 240; i + 240 < kFrameLength; ++i)
    CHECK(std::abs(r[i] - ramp[i]) < 1e-9);

  const std::vector<double> c(kFrameLength, 3.7);
  const auto p = avg_pool_scl(c, 481);
  CHECK(std::equal(p.begin(), p.end(), c.begin()));
  CHECK_THROWS_AS(avg_pool_scl(c, 480), ConfigError);
}

TEST_CASE("parameter shapes and counts") {
  const auto p = init_params(feel_config(1), 0);
  const auto shapes = parameter_shapes(feel_config(1));
  CHECK(p.tensors.size() == shapes.size());
  for (const auto& [name, shape] : shapes)
    CHECK(p.tensors.at(name).shape() == shape);
  // The pool kernel is parameter-free.
  CHECK(parameter_shapes(feel_config(3)) == shapes);
  CHECK(p.parameter_count() == init_params(feel_config(3), 0).parameter_count());
  CHECK(same_params(init_params(toy_config(), 5), init_params(toy_config(), 5)));
  CHECK_FALSE(same_params(init_params(toy_config(), 5), init_params(toy_config(), 6)));
}

TEST_CASE("forward shapes and reconstruction identity") {
  const auto p = init_params(feel_config(1), 0);
  const auto x = toy_sequence(kFrameLength, 3);
  std::vector<double> shifted(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    shifted[i] = 4.0 + x[i];
  const auto out = forward(shifted, p);
  REQUIRE(out.scl.size() == kFrameLength);
  REQUIRE(out.scr.size() == kFrameLength);
  REQUIRE(out.recon.size() == kFrameLength);
  for (std::size_t i = 0; i < kFrameLength; ++i)
    CHECK(std::abs(out.recon[i] - (out.scl[i] + out.scr[i])) < 1e-9);
  CHECK(testing::max_abs_diff(out.scl, avg_pool_scl(shifted, 481)) < 1e-12);
  CHECK_THROWS_AS(forward(std::vector<double>(100, 1.0), p), DataError);
}

TEST_CASE("constant frame: scl reproduces it and phasic is zero") {
  const auto p = init_params(feel_config(1), 0);
  const Frame f(std::vector<double>(kFrameLength, 2.5), 0);
  const auto d = transformer_decompose(f, p);
  for (std::size_t i = 0; i < kFrameLength; ++i) {
    CHECK(d.tonic[i] == 2.5);
    CHECK(std::abs(d.phasic[i]) < 1e-9);
  }
}

TEST_CASE("kernel 481 tonic follows the sign of the true slope") {
  // The tonic is the pooled frame, so untrained weights suffice.
  const auto p = init_params(feel_config(1), 0);
  CorpusOptions opt;
  opt.max_events = 3;
  std::size_t agree = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto spec = random_spec(300 + seed, opt);
    const auto [frame, truth] = generate_frame(spec);
    const double got = tonic_slope(transformer_decompose(frame, p).tonic);
    agree += (got > 0) == (spec.tonic_params[1] > 0);
    ++total;
  }
  CHECK(static_cast<double>(agree) >= 0.9 * static_cast<double>(total));
}

TEST_CASE("normalisation floors the deviation") {
  const auto n = normalization_of(std::vector<double>(10, 1.0));
  CHECK(n.mean == 1.0);
  CHECK(n.scale == 1e-6);
  const auto m = normalization_of(std::vector<double>{0.0, 2.0});
  CHECK(m.mean == 1.0);
  CHECK(m.scale == doctest::Approx(1.0));
}

TEST_CASE("mse loss") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(a, std::vector<double>{2, 3, 4, 5}) == 1.0);
  const auto x = testing::uniform_noise(50, 2), y = testing::uniform_noise(50, 3);
  double ref = 0;
  for (std::size_t i = 0; i < 50; ++i)
    ref += (x[i] - y[i]) * (x[i] - y[i]);
  CHECK(std::abs(mse_loss(x, y) - ref / 50) < 1e-12);
  CHECK_THROWS_AS(mse_loss(a, std::vector<double>{1}), DataError);
}

TEST_CASE("gradient check on the toy configuration") {
  const auto x = toy_sequence(toy_config().seq_len, 11);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto p = init_params(toy_config(), seed);
    const auto r = gradcheck(p, x, 256, seed);
    CAPTURE(r.worst_parameter);
    CHECK(r.coordinates == 256);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("gradient check on the purely linear network") {
  const auto x = toy_sequence(toy_config().seq_len, 12);
  const auto p = init_params(toy_config(), 0);
  ForwardOptions opt;
  opt.linear_only = true;
  const auto r = gradcheck(p, x, 128, 0, opt);
  CHECK(r.max_relative_error < 1e-7);
}

TEST_CASE("direct and FFT lag routes give the same forward pass") {
  const auto x = toy_sequence(toy_config().seq_len, 13);
  const auto p = init_params(toy_config(), 0);
  ForwardOptions direct;
  direct.route = ad::CorrelationRoute::direct;
  CHECK(testing::max_abs_diff(forward(x, p).recon, forward(x, p, direct).recon) < 1e-9);
}

TEST_CASE("non-finite weights raise a numeric error naming a block") {
  auto p = init_params(toy_config(), 0);
  p.tensors.at("embed.w").mutable_values()[0] = std::numeric_limits<double>::infinity();
  try {
    forward(toy_sequence(toy_config().seq_len, 1), p);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("embedding") != std::string::npos);
  }
}

TEST_CASE("zero epochs leave the parameters untouched") {
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto init = init_params(toy_config(), 0);
  const auto r = train(toy_dataset(4, 0), init, cfg);
  CHECK(r.loss_curve.empty());
  CHECK(r.status == TrainStatus::completed);
  CHECK(same_params(r.params, init));
}

TEST_CASE("training is bitwise reproducible and reduces the loss") {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr = 3e-3;
  cfg.batch = 2;
  const auto data = toy_dataset(6, 40);
  const auto init = init_params(toy_config(), 1);
  const auto a = train(data, init, cfg), b = train(data, init, cfg);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(same_params(a.params, b.params));
  CHECK(a.loss_curve.back() < a.loss_curve.front());
  cfg.seed = 9;
  CHECK(train(data, init, cfg).loss_curve != a.loss_curve);
}

TEST_CASE("training on constant frames drives scr to zero") {
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch = 1;
  const std::vector<std::vector<double>> data(1, std::vector<double>(toy_config().seq_len, 1.5));
  const auto r = train(data, init_params(toy_config(), 0), cfg);
  const auto out = forward(data[0], r.params);
  for (double s : out.scr)
    CHECK(std::abs(s) < 1e-3);
}

TEST_CASE("an exploding learning rate is reported as divergence") {
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.lr = 1e3;
  cfg.batch = 1;
  bool flagged = false;
  try {
    const auto r = train(toy_dataset(4, 7), init_params(toy_config(), 0), cfg);
    flagged = r.status == TrainStatus::diverged;
    if (flagged)
      CHECK(r.report.find("diverged") != std::string::npos);
  } catch (const NumericError&) {
    flagged = true;
  }
  CHECK(flagged);
}

TEST_CASE("training input errors") {
  TrainConfig cfg;
  CHECK_THROWS_AS(train(std::vector<std::vector<double>>{}, init_params(toy_config(), 0), cfg), DataError);
  CHECK_THROWS_AS(train(toy_dataset(1, 0), init_params(feel_config(1), 0), cfg), DataError);
  cfg.batch = 0;
  CHECK_THROWS_AS(train(toy_dataset(1, 0), init_params(toy_config(), 0), cfg), ConfigError);
}

}

#include "edadecomp/feel_transformer.hpp"

#include "edadecomp/errors.hpp"
#include "edadecomp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace edadecomp {

using ad::Tensor;

std::size_t ArchConfig::top_k() const {
  const double k = std::floor(autocorr_factor * std::log(static_cast<double>(seq_len)));
  return std::max<std::size_t>(1, k > 0.0 ? static_cast<std::size_t>(k) : 0);
}

void ArchConfig::validate() const {
  if (seq_len < 2)
    throw ConfigError("seq_len must be at least 2");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw ConfigError("d_model must be a positive multiple of n_heads");
  if (ff_dim == 0)
    throw ConfigError("ff_dim must be positive");
  if (pool_kernel % 2 == 0 || pool_kernel > seq_len)
    throw ConfigError("pool_kernel must be odd and no longer than seq_len");
  if (decomp_kernel % 2 == 0 || decomp_kernel > seq_len)
    throw ConfigError("decomp_kernel must be odd and no longer than seq_len");
  if (!(autocorr_factor > 0.0))
    throw ConfigError("autocorr_factor must be positive");
  if (top_k() > seq_len)
    throw ConfigError("top_k exceeds seq_len");
}

ArchConfig feel_config(int variant) {
  ArchConfig a;
  switch (variant) {
  case 1: a.pool_kernel = 8 * 60 + 1; break;
  case 2: a.pool_kernel = 8 * 30 + 1; break;
  case 3: a.pool_kernel = 8 * 1 + 1; break;
  default: throw ConfigError("feel variant must be 1, 2 or 3");
  }
  return a;
}

std::vector<double> avg_pool_scl(std::span<const double> values, std::size_t kernel) {
  if (kernel % 2 == 0)
    throw ConfigError("pooling kernel must be odd, got " + std::to_string(kernel));
  const std::size_t n = values.size();
  if (n == 0)
    return {};
  const std::size_t h = kernel / 2;
  // Sums are taken relative to the first sample so constant input is
  // reproduced bit-for-bit.
  const double ref = values[0];
  std::vector<double> prefix(n + 2 * h + 1, 0.0);
  for (std::size_t p = 0; p < n + 2 * h; ++p) {
    const std::size_t src = p < h ? 0 : std::min(p - h, n - 1);
    prefix[p + 1] = prefix[p] + (values[src] - ref);
  }
  std::vector<double> out(n);
  const double inv = 1.0 / static_cast<double>(kernel);
  for (std::size_t t = 0; t < n; ++t)
    out[t] = ref + (prefix[t + kernel] - prefix[t]) * inv;
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors)
    n += t.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : tensors)
    t.zero_grad();
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : tensors)
    for (double v : t.values())
      if (!std::isfinite(v))
        return false;
  return true;
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  p.arch = arch;
  for (const auto& [name, t] : tensors)
    p.tensors.emplace(name, ad::parameter(t.shape(), {t.values().begin(), t.values().end()}, name));
  return p;
}

namespace {

// Attention projections carry no bias: every attention output is followed by
// a series decomposition that removes constants, and lag scores are invariant
// to constant shifts of q and k, so biases there would get zero gradient.
void attention_shapes(std::map<std::string, std::vector<std::size_t>>& s, const std::string& prefix,
                      std::size_t d) {
  for (const char* proj : {"q", "k", "v", "o"})
    s[prefix + "." + proj + ".w"] = {d, d};
}

void ff_shapes(std::map<std::string, std::vector<std::size_t>>& s, const std::string& prefix, std::size_t d,
               std::size_t ff) {
  s[prefix + ".ff1.w"] = {d, ff};
  s[prefix + ".ff2.w"] = {ff, d};
}

std::string enc_name(std::size_t i) { return "enc" + std::to_string(i); }
std::string dec_name(std::size_t i) { return "dec" + std::to_string(i); }

constexpr std::size_t kEmbedWidth = 3;

} // namespace

std::map<std::string, std::vector<std::size_t>> parameter_shapes(const ArchConfig& arch) {
  std::map<std::string, std::vector<std::size_t>> s;
  const std::size_t d = arch.d_model;
  s["embed.w"] = {kEmbedWidth, d};
  for (std::size_t i = 0; i < arch.n_encoder; ++i) {
    attention_shapes(s, enc_name(i) + ".attn", d);
    ff_shapes(s, enc_name(i), d, arch.ff_dim);
    s[enc_name(i) + ".norm.gamma"] = {d};
  }
  for (std::size_t i = 0; i < arch.n_decoder; ++i) {
    attention_shapes(s, dec_name(i) + ".self", d);
    attention_shapes(s, dec_name(i) + ".cross", d);
    ff_shapes(s, dec_name(i), d, arch.ff_dim);
    s[dec_name(i) + ".norm.gamma"] = {d};
    s[dec_name(i) + ".trend.w"] = {kEmbedWidth * d, 1};
  }
  s["out.w"] = {d, 1};
  s["out.b"] = {1};
  return s;
}

ModelParams init_params(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  NormalSource rng(seed);
  for (const auto& [name, shape] : parameter_shapes(arch)) {
    const std::size_t n = ad::shape_numel(shape);
    std::vector<double> v(n);
    if (name.ends_with(".gamma")) {
      std::fill(v.begin(), v.end(), 1.0);
    } else {
      // out.b shares the fan-in of out.w.
      const std::size_t fan_in = shape.size() == 1 ? arch.d_model : shape[0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& x : v)
        x = bound * (2.0 * rng.uniform() - 1.0);
    }
    p.tensors.emplace(name, ad::parameter(shape, std::move(v), name));
  }
  return p;
}

namespace {

std::vector<double> positional_encoding(std::size_t len, std::size_t d) {
  std::vector<double> pe(len * d);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double rate = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(d));
      pe[t * d + i] = std::sin(static_cast<double>(t) * rate);
      if (i + 1 < d)
        pe[t * d + i + 1] = std::cos(static_cast<double>(t) * rate);
    }
  }
  return pe;
}

class Network {
public:
  Network(const ModelParams& params, const ForwardOptions& options)
      : p_(params), arch_(params.arch), opt_(options) {}

  Tensor param(const std::string& name) const {
    auto it = p_.tensors.find(name);
    if (it == p_.tensors.end())
      throw InternalError("missing parameter '" + name + "'");
    return it->second;
  }

  Tensor attention(const std::string& prefix, const Tensor& xq, const Tensor& xkv) const {
    const Tensor q = ad::matmul(xq, param(prefix + ".q.w"));
    const Tensor k = ad::matmul(xkv, param(prefix + ".k.w"));
    const Tensor v = ad::matmul(xkv, param(prefix + ".v.w"));
    const Tensor a = ad::autocorrelation(q, k, v, arch_.n_heads, arch_.top_k(), opt_.route);
    return ad::matmul(a, param(prefix + ".o.w"));
  }

  Tensor feed_forward(const std::string& prefix, const Tensor& x) const {
    return ad::matmul(ad::gelu(ad::matmul(x, param(prefix + ".ff1.w"))), param(prefix + ".ff2.w"));
  }

  Tensor encoder_block(std::size_t i, const Tensor& x) const {
    const auto name = enc_name(i);
    const std::size_t w = arch_.decomp_kernel;
    Tensor s = ad::seasonal_part(ad::add(x, attention(name + ".attn", x, x)), w);
    s = ad::seasonal_part(ad::add(s, feed_forward(name, s)), w);
    return checked(ad::series_norm(s, param(name + ".norm.gamma")), "encoder[" + std::to_string(i) + "]");
  }

  struct DecoderOut {
    Tensor seasonal;
    Tensor trend; // [len, 1]
  };

  // The three trends split off inside a block are summed and projected to one
  // channel, so slow content removed from the seasonal stream still reaches
  // the output.
  DecoderOut decoder_block(std::size_t i, const Tensor& x, const Tensor& cross) const {
    const auto name = dec_name(i);
    const std::size_t w = arch_.decomp_kernel;
    Tensor y = ad::add(x, attention(name + ".self", x, x));
    Tensor trend = ad::moving_average(y, w);
    Tensor s = ad::sub(y, trend);
    y = ad::add(s, attention(name + ".cross", s, cross));
    Tensor m = ad::moving_average(y, w);
    trend = ad::add(trend, m);
    s = ad::sub(y, m);
    y = ad::add(s, feed_forward(name, s));
    m = ad::moving_average(y, w);
    trend = ad::add(trend, m);
    s = ad::series_norm(ad::sub(y, m), param(name + ".norm.gamma"));
    const auto where = "decoder[" + std::to_string(i) + "]";
    return {checked(s, where), checked(ad::conv1d_circular(trend, param(name + ".trend.w"), kEmbedWidth), where)};
  }

  static Tensor checked(Tensor t, const std::string& where) {
    for (double v : t.values())
      if (!std::isfinite(v))
        throw NumericError(where + ": non-finite activation");
    return t;
  }

  Tensor scr_branch(const Tensor& z) const {
    const std::size_t len = arch_.seq_len, d = arch_.d_model;
    const Tensor pe = ad::constant({len, d}, positional_encoding(len, d));
    const Tensor embedded = checked(ad::add(ad::conv1d_circular(z, param("embed.w"), kEmbedWidth), pe), "embedding");
    if (opt_.linear_only)
      return checked(ad::linear(embedded, param("out.w"), param("out.b")), "projection");
    // Encoder output feeds the first decoder's self path; every decoder
    // attends to the embedded input as its cross sequence.
    Tensor h = embedded;
    for (std::size_t i = 0; i < arch_.n_encoder; ++i)
      h = encoder_block(i, h);
    Tensor trend = ad::zeros({len, 1});
    for (std::size_t i = 0; i < arch_.n_decoder; ++i) {
      auto out = decoder_block(i, h, embedded);
      h = out.seasonal;
      trend = ad::add(trend, out.trend);
    }
    return checked(ad::add(ad::linear(h, param("out.w"), param("out.b")), trend), "projection");
  }

private:
  const ModelParams& p_;
  const ArchConfig& arch_;
  ForwardOptions opt_;
};

} // namespace

ForwardGraph forward_graph(std::span<const double> normalized, const ModelParams& params,
                           const ForwardOptions& options) {
  const auto& arch = params.arch;
  if (normalized.size() != arch.seq_len)
    throw DataError("input length " + std::to_string(normalized.size()) + " does not match seq_len " +
                    std::to_string(arch.seq_len));
  ForwardGraph g;
  g.scl = avg_pool_scl(normalized, arch.pool_kernel);
  const Tensor z = ad::constant({arch.seq_len, 1}, {normalized.begin(), normalized.end()});
  Network net(params, options);
  g.scr = net.scr_branch(z);
  g.recon = ad::add(ad::constant({arch.seq_len, 1}, g.scl), g.scr);
  return g;
}

Normalization normalization_of(std::span<const double> values) {
  Normalization n;
  if (values.empty())
    return n;
  n.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values)
    var += (v - n.mean) * (v - n.mean);
  var /= static_cast<double>(values.size());
  n.scale = std::max(std::sqrt(var), 1e-6);
  return n;
}

namespace {

std::vector<double> normalize(std::span<const double> values, const Normalization& n) {
  std::vector<double> z(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    z[i] = (values[i] - n.mean) / n.scale;
  return z;
}

} // namespace

DecomposedOutput forward(std::span<const double> values, const ModelParams& params,
                         const ForwardOptions& options) {
  for (double v : values)
    if (!std::isfinite(v))
      throw DataError("non-finite input sample");
  const auto norm = normalization_of(values);
  const auto z = normalize(values, norm);
  const auto g = forward_graph(z, params, options);
  DecomposedOutput out;
  // The pool commutes with the affine normalisation, so it runs on raw µS.
  out.scl = avg_pool_scl(values, params.arch.pool_kernel);
  out.scr.resize(values.size());
  out.recon.resize(values.size());
  const auto scr = g.scr.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.scr[i] = scr[i] * norm.scale;
    out.recon[i] = out.scl[i] + out.scr[i];
  }
  return out;
}

DecomposedOutput forward(const Frame& frame, const ModelParams& params) {
  return forward(frame.samples(), params);
}

double mse_loss(std::span<const double> frame, std::span<const double> recon) {
  if (frame.size() != recon.size())
    throw DataError("mse_loss: length mismatch");
  if (frame.empty())
    return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double d = frame[i] - recon[i];
    acc += d * d;
  }
  return acc / static_cast<double>(frame.size());
}

ArchConfig toy_config() {
  ArchConfig a;
  a.seq_len = 64;
  a.d_model = 8;
  a.n_heads = 2;
  a.ff_dim = 8;
  a.pool_kernel = 9;
  a.decomp_kernel = 25;
  return a;
}

std::vector<double> toy_sequence(std::size_t len, std::uint64_t seed) {
  NormalSource rng(seed + 0x5151);
  std::vector<double> x(len, 0.0);
  for (int s = 0; s < 3; ++s) {
    const double amp = 0.2 + rng.uniform();
    const double period = 4.0 + 30.0 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    for (std::size_t t = 0; t < len; ++t)
      x[t] += amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
  }
  for (std::size_t t = 0; t < len; ++t)
    x[t] += 0.05 * rng.normal();
  return x;
}

GradcheckResult gradcheck(const ModelParams& params, std::span<const double> input, std::size_t coordinates,
                          std::uint64_t seed, const ForwardOptions& options) {
  ModelParams p = params.clone();
  const auto z = normalize(input, normalization_of(input));

  auto recon = [&]() {
    const auto g = forward_graph(z, p, options);
    const auto v = g.recon.values();
    return std::vector<double>(v.begin(), v.end());
  };
  // MSE(up) - MSE(down) summed as (ru - rd)(ru + rd) per sample, which avoids
  // cancelling two nearly equal losses.
  auto loss_difference = [&](const std::vector<double>& up, const std::vector<double>& down) {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double ru = z[i] - up[i], rd = z[i] - down[i];
      acc += (ru - rd) * (ru + rd);
    }
    return acc / static_cast<double>(z.size());
  };

  p.zero_grad();
  {
    const auto g = forward_graph(z, p, options);
    ad::backward(ad::mse(g.recon, z));
  }

  // Flat index -> (tensor, offset); coordinates drawn without replacement.
  std::vector<std::pair<std::string, std::size_t>> flat;
  for (const auto& [name, t] : p.tensors)
    for (std::size_t i = 0; i < t.numel(); ++i)
      flat.emplace_back(name, i);
  NormalSource rng(seed);
  std::set<std::size_t> chosen;
  const std::size_t want = std::min(coordinates, flat.size());
  while (chosen.size() < want)
    chosen.insert(static_cast<std::size_t>(rng.next_u64() % flat.size()));

  constexpr double h = 1e-5;
  GradcheckResult res;
  for (std::size_t idx : chosen) {
    const auto& [name, off] = flat[idx];
    Tensor t = p.tensors.at(name);
    const double analytic = t.grad()[off];
    const double orig = t.values()[off];
    t.mutable_values()[off] = orig + h;
    const auto up = recon();
    t.mutable_values()[off] = orig - h;
    const auto down = recon();
    t.mutable_values()[off] = orig;
    const double numeric = loss_difference(up, down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > res.max_relative_error) {
      res.max_relative_error = rel;
      res.worst_parameter = name + "[" + std::to_string(off) + "]";
    }
    ++res.coordinates;
  }
  return res;
}

TrainResult train(const std::vector<std::vector<double>>& dataset, const ModelParams& initial,
                  const TrainConfig& config) {
  if (dataset.empty())
    throw DataError("training dataset is empty");
  if (config.batch == 0)
    throw ConfigError("batch size must be positive");
  TrainResult result;
  result.params = initial.clone();
  auto& params = result.params;

  std::vector<std::vector<double>> normalized;
  normalized.reserve(dataset.size());
  for (const auto& x : dataset) {
    if (x.size() != params.arch.seq_len)
      throw DataError("training frame length does not match seq_len");
    normalized.push_back(normalize(x, normalization_of(x)));
  }

  struct Moments {
    std::vector<double> m, v;
  };
  std::map<std::string, Moments> adam;
  for (const auto& [name, t] : params.tensors)
    adam[name] = {std::vector<double>(t.numel(), 0.0), std::vector<double>(t.numel(), 0.0)};

  std::vector<std::size_t> order(normalized.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  NormalSource shuffler(config.seed);
  std::size_t step = 0;
  double first_loss = 0.0;
  int over = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffler.next_u64() % i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const auto& z = normalized[order[b]];
        const auto g = forward_graph(z, params);
        const Tensor loss = ad::mse(g.recon, z);
        epoch_loss += loss.item();
        ad::backward(loss, inv_b);
      }
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (auto& [name, t] : params.tensors) {
        auto& mo = adam[name];
        auto w = t.mutable_values();
        const auto g = t.grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
          mo.m[i] = config.beta1 * mo.m[i] + (1.0 - config.beta1) * g[i];
          mo.v[i] = config.beta2 * mo.v[i] + (1.0 - config.beta2) * g[i] * g[i];
          const double mhat = mo.m[i] / c1;
          const double vhat = mo.v[i] / c2;
          w[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
        }
      }
      if (!params.all_finite())
        throw NumericError("non-finite parameter after optimiser step " + std::to_string(step));
    }
    epoch_loss /= static_cast<double>(order.size());
    result.loss_curve.push_back(epoch_loss);
    if (config.on_epoch)
      config.on_epoch(epoch, epoch_loss);

    if (epoch == 0)
      first_loss = epoch_loss;
    over = epoch_loss > 10.0 * first_loss ? over + 1 : 0;
    if (over >= 3) {
      result.status = TrainStatus::diverged;
      result.report = "training diverged at epoch " + std::to_string(epoch) + ": loss " +
                      std::to_string(epoch_loss) + " vs initial " + std::to_string(first_loss);
      break;
    }
  }
  params.zero_grad();
  return result;
}

TrainResult train(const std::vector<Frame>& dataset, const ArchConfig& arch, const TrainConfig& config) {
  std::vector<std::vector<double>> data;
  for (const auto& f : dataset)
    data.push_back(f.values());
  return train(data, init_params(arch, config.seed), config);
}

Decomposition transformer_decompose(const Frame& frame, const ModelParams& params, const std::string& method) {
  auto out = forward(frame, params);
  return residual_decomposition(frame, std::move(out.scl), method);
}

} // namespace edadecomp

#include "edadecomp/autodiff.hpp"

#include "edadecomp/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <unordered_map>

namespace edadecomp::ad {

void Node::ensure_grad() {
  if (grad.size() != value.size())
    grad.assign(value.size(), 0.0);
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (node_->value.size() != 1)
    throw InternalError("item() on a non-scalar tensor");
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (node_)
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

std::shared_ptr<Node> make_leaf(std::vector<std::size_t> shape, std::vector<double> values, bool grad,
                                std::string label) {
  if (shape_numel(shape) != values.size())
    throw InternalError("tensor shape does not match value count");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = grad;
  n->label = std::move(label);
  if (grad)
    n->ensure_grad();
  return n;
}

// Creates an interior node. The backward closure is attached by the caller
// only if some parent needs a gradient.
std::shared_ptr<Node> make_op(std::vector<std::size_t> shape, std::vector<std::shared_ptr<Node>> parents,
                              const char* label) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value.assign(shape_numel(n->shape), 0.0);
  n->is_leaf = false;
  n->label = label;
  for (const auto& p : parents) {
    if (!p)
      throw InternalError(std::string(label) + ": missing input node");
    n->requires_grad = n->requires_grad || p->requires_grad;
  }
  n->parents = std::move(parents);
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw InternalError(std::string(op) + ": shape mismatch");
}

} // namespace

Tensor constant(std::vector<std::size_t> shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false, "const"));
}

Tensor parameter(std::vector<std::size_t> shape, std::vector<double> values, std::string label) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true, std::move(label)));
}

Tensor zeros(std::vector<std::size_t> shape) {
  const auto n = shape_numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

void backward(const Tensor& loss, double seed) {
  if (!loss.defined())
    throw InternalError("backward on an undefined tensor");
  if (loss.numel() != 1)
    throw InternalError("backward requires a scalar loss");

  // Iterative DFS producing a post-order; a grey node seen again is a cycle.
  enum class Mark : unsigned char { grey, black };
  std::unordered_map<Node*, Mark> marks;
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  marks[loss.node()] = Mark::grey;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (!p)
        throw InternalError("autodiff graph has a missing node under '" + node->label + "'");
      if (!p->requires_grad)
        continue;
      auto it = marks.find(p);
      if (it == marks.end()) {
        marks[p] = Mark::grey;
        stack.emplace_back(p, 0);
      } else if (it->second == Mark::grey) {
        throw InternalError("autodiff graph contains a cycle at '" + p->label + "'");
      }
    } else {
      marks[node] = Mark::black;
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->is_leaf)
      n->grad.assign(n->value.size(), 0.0);
  loss.node()->ensure_grad();
  loss.node()->grad[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn)
      n->backward_fn(*n);
  }
  // Interior gradients are no longer needed; release them.
  for (Node* n : order)
    if (!n->is_leaf)
      std::vector<double>().swap(n->grad);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto out = make_op(a.shape(), {a.shared(), b.shared()}, "add");
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out->value.size(); ++i)
    out->value[i] = av[i] + bv[i];
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad)
          continue;
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto out = make_op(a.shape(), {a.shared(), b.shared()}, "sub");
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out->value.size(); ++i)
    out->value[i] = av[i] - bv[i];
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      for (std::size_t k = 0; k < 2; ++k) {
        auto& p = self.parents[k];
        if (!p->requires_grad)
          continue;
        p->ensure_grad();
        const double sign = k == 0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += sign * self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, double s) {
  auto out = make_op(a.shape(), {a.shared()}, "scale");
  const auto av = a.values();
  for (std::size_t i = 0; i < out->value.size(); ++i)
    out->value[i] = s * av[i];
  if (out->requires_grad) {
    out->backward_fn = [s](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        p->grad[i] += s * self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor matmul(const Tensor& x, const Tensor& w) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || x.cols() != w.rows())
    throw InternalError("matmul: incompatible shapes");
  const std::size_t r = x.rows(), k = x.cols(), c = w.cols();
  auto out = make_op({r, c}, {x.shared(), w.shared()}, "matmul");
  const double* xv = x.values().data();
  const double* wv = w.values().data();
  double* yv = out->value.data();
  for (std::size_t i = 0; i < r; ++i) {
    double* yrow = yv + i * c;
    for (std::size_t m = 0; m < k; ++m) {
      const double a = xv[i * k + m];
      const double* wrow = wv + m * c;
      for (std::size_t j = 0; j < c; ++j)
        yrow[j] += a * wrow[j];
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [r, k, c](Node& self) {
      Node& xn = *self.parents[0];
      Node& wn = *self.parents[1];
      const double* g = self.grad.data();
      if (xn.requires_grad) {
        xn.ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
          const double* grow = g + i * c;
          for (std::size_t m = 0; m < k; ++m) {
            const double* wrow = wn.value.data() + m * c;
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j)
              acc += grow[j] * wrow[j];
            xn.grad[i * k + m] += acc;
          }
        }
      }
      if (wn.requires_grad) {
        wn.ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
          const double* grow = g + i * c;
          for (std::size_t m = 0; m < k; ++m) {
            const double a = xn.value[i * k + m];
            double* wg = wn.grad.data() + m * c;
            for (std::size_t j = 0; j < c; ++j)
              wg[j] += a * grow[j];
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.numel() != c)
    throw InternalError("add_row_bias: bias length mismatch");
  auto out = make_op(x.shape(), {x.shared(), bias.shared()}, "bias");
  const auto xv = x.values(), bv = bias.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out->value[i * c + j] = xv[i * c + j] + bv[j];
  if (out->requires_grad) {
    out->backward_fn = [r, c](Node& self) {
      Node& xn = *self.parents[0];
      Node& bn = *self.parents[1];
      if (xn.requires_grad) {
        xn.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          xn.grad[i] += self.grad[i];
      }
      if (bn.requires_grad) {
        bn.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            bn.grad[j] += self.grad[i * c + j];
      }
    };
  }
  return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  return add_row_bias(matmul(x, w), bias);
}

Tensor gelu(const Tensor& x) {
  auto out = make_op(x.shape(), {x.shared()}, "gelu");
  const auto xv = x.values();
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (std::size_t i = 0; i < xv.size(); ++i)
    out->value[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * inv_sqrt2));
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      Node& xn = *self.parents[0];
      xn.ensure_grad();
      constexpr double inv_sqrt2pi = 0.39894228040143267794;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double v = xn.value[i];
        const double d = 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
        xn.grad[i] += self.grad[i] * d;
      }
    };
  }
  return Tensor(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gamma.numel() != c || beta.numel() != c)
    throw InternalError("layer_norm: parameter length mismatch");
  constexpr double eps = 1e-5;
  auto out = make_op(x.shape(), {x.shared(), gamma.shared(), beta.shared()}, "layer_norm");
  auto xhat = std::make_shared<std::vector<double>>(r * c);
  auto inv = std::make_shared<std::vector<double>>(r);
  const auto xv = x.values(), gv = gamma.values(), bv = beta.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      mean += row[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(c);
    const double s = 1.0 / std::sqrt(var + eps);
    (*inv)[i] = s;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mean) * s;
      (*xhat)[i * c + j] = h;
      out->value[i * c + j] = gv[j] * h + bv[j];
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [r, c, xhat, inv](Node& self) {
      Node& xn = *self.parents[0];
      Node& gn = *self.parents[1];
      Node& bn = *self.parents[2];
      if (gn.requires_grad)
        gn.ensure_grad();
      if (bn.requires_grad)
        bn.ensure_grad();
      if (xn.requires_grad)
        xn.ensure_grad();
      std::vector<double> dh(c);
      for (std::size_t i = 0; i < r; ++i) {
        const double* g = self.grad.data() + i * c;
        const double* h = xhat->data() + i * c;
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          if (gn.requires_grad)
            gn.grad[j] += g[j] * h[j];
          if (bn.requires_grad)
            bn.grad[j] += g[j];
          dh[j] = g[j] * gn.value[j];
          mean_dh += dh[j];
          mean_dh_h += dh[j] * h[j];
        }
        if (!xn.requires_grad)
          continue;
        mean_dh /= static_cast<double>(c);
        mean_dh_h /= static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j)
          xn.grad[i * c + j] += (*inv)[i] * (dh[j] - mean_dh - h[j] * mean_dh_h);
      }
    };
  }
  return Tensor(out);
}

namespace {

// y[t] = mean of x over rows t-h..t+h with indices clamped to [0, r-1].
void moving_average_rows(const double* x, double* y, std::size_t r, std::size_t c, std::size_t window) {
  const std::size_t h = window / 2;
  const double inv = 1.0 / static_cast<double>(window);
  const std::size_t padded = r + 2 * h;
  // prefix[p] holds the sum of padded rows [0, p).
  std::vector<double> prefix((padded + 1) * c, 0.0);
  for (std::size_t p = 0; p < padded; ++p) {
    const std::size_t src = p < h ? 0 : std::min(p - h, r - 1);
    for (std::size_t j = 0; j < c; ++j)
      prefix[(p + 1) * c + j] = prefix[p * c + j] + x[src * c + j];
  }
  for (std::size_t t = 0; t < r; ++t)
    for (std::size_t j = 0; j < c; ++j)
      y[t * c + j] = (prefix[(t + window) * c + j] - prefix[t * c + j]) * inv;
}

// Adjoint of moving_average_rows.
void moving_average_rows_adjoint(const double* g, double* dx, std::size_t r, std::size_t c,
                                 std::size_t window) {
  const std::size_t h = window / 2;
  const double inv = 1.0 / static_cast<double>(window);
  const std::size_t padded = r + 2 * h;
  // Padded position p is covered by outputs t with p - 2h <= t <= p.
  std::vector<double> prefix((r + 1) * c, 0.0);
  for (std::size_t t = 0; t < r; ++t)
    for (std::size_t j = 0; j < c; ++j)
      prefix[(t + 1) * c + j] = prefix[t * c + j] + g[t * c + j];
  for (std::size_t p = 0; p < padded; ++p) {
    const std::size_t lo = p >= 2 * h ? p - 2 * h : 0;
    const std::size_t hi = std::min(p, r - 1);
    if (lo > hi)
      continue;
    const std::size_t src = p < h ? 0 : std::min(p - h, r - 1);
    for (std::size_t j = 0; j < c; ++j)
      dx[src * c + j] += (prefix[(hi + 1) * c + j] - prefix[lo * c + j]) * inv;
  }
}

} // namespace

Tensor moving_average(const Tensor& x, std::size_t window) {
  if (window % 2 == 0)
    throw ConfigError("moving average window must be odd");
  const std::size_t r = x.rows(), c = x.cols();
  auto out = make_op(x.shape(), {x.shared()}, "moving_average");
  moving_average_rows(x.values().data(), out->value.data(), r, c, window);
  if (out->requires_grad) {
    out->backward_fn = [r, c, window](Node& self) {
      Node& xn = *self.parents[0];
      xn.ensure_grad();
      moving_average_rows_adjoint(self.grad.data(), xn.grad.data(), r, c, window);
    };
  }
  return Tensor(out);
}

Tensor seasonal_part(const Tensor& x, std::size_t window) { return sub(x, moving_average(x, window)); }

Tensor center_columns(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  auto out = make_op(x.shape(), {x.shared()}, "center_columns");
  const auto xv = x.values();
  std::vector<double> mean(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      mean[j] += xv[i * c + j];
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out->value[i * c + j] = xv[i * c + j] - mean[j] / static_cast<double>(r);
  if (out->requires_grad) {
    out->backward_fn = [r, c](Node& self) {
      Node& xn = *self.parents[0];
      xn.ensure_grad();
      std::vector<double> gm(c, 0.0);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          gm[j] += self.grad[i * c + j];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          xn.grad[i * c + j] += self.grad[i * c + j] - gm[j] / static_cast<double>(r);
    };
  }
  return Tensor(out);
}

Tensor series_norm(const Tensor& x, const Tensor& gamma) {
  return center_columns(layer_norm(x, gamma, zeros({x.cols()})));
}

Tensor conv1d_circular(const Tensor& x, const Tensor& w, std::size_t width) {
  const std::size_t r = x.rows(), cin = x.cols();
  if (w.shape().size() != 2 || w.rows() != width * cin)
    throw InternalError("conv1d_circular: weight shape mismatch");
  const std::size_t cout = w.cols();
  const std::size_t half = width / 2;
  auto out = make_op({r, cout}, {x.shared(), w.shared()}, "conv1d");
  const double* xv = x.values().data();
  const double* wv = w.values().data();
  for (std::size_t t = 0; t < r; ++t) {
    double* y = out->value.data() + t * cout;
    for (std::size_t tap = 0; tap < width; ++tap) {
      const std::size_t src = (t + r + tap - half) % r;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double a = xv[src * cin + ci];
        const double* wrow = wv + (tap * cin + ci) * cout;
        for (std::size_t o = 0; o < cout; ++o)
          y[o] += a * wrow[o];
      }
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [r, cin, cout, width, half](Node& self) {
      Node& xn = *self.parents[0];
      Node& wn = *self.parents[1];
      if (xn.requires_grad)
        xn.ensure_grad();
      if (wn.requires_grad)
        wn.ensure_grad();
      for (std::size_t t = 0; t < r; ++t) {
        const double* g = self.grad.data() + t * cout;
        for (std::size_t tap = 0; tap < width; ++tap) {
          const std::size_t src = (t + r + tap - half) % r;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const std::size_t wr = (tap * cin + ci) * cout;
            if (xn.requires_grad) {
              double acc = 0.0;
              for (std::size_t o = 0; o < cout; ++o)
                acc += g[o] * wn.value[wr + o];
              xn.grad[src * cin + ci] += acc;
            }
            if (wn.requires_grad) {
              const double a = xn.value[src * cin + ci];
              for (std::size_t o = 0; o < cout; ++o)
                wn.grad[wr + o] += a * g[o];
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor mse(const Tensor& x, std::span<const double> target) {
  if (target.size() != x.numel())
    throw InternalError("mse: target length mismatch");
  auto out = make_op({1}, {x.shared()}, "mse");
  const auto xv = x.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double d = xv[i] - target[i];
    acc += d * d;
  }
  const double n = static_cast<double>(xv.size());
  out->value[0] = acc / n;
  if (out->requires_grad) {
    std::vector<double> t(target.begin(), target.end());
    out->backward_fn = [t = std::move(t), n](Node& self) {
      Node& xn = *self.parents[0];
      xn.ensure_grad();
      const double g = self.grad[0] * 2.0 / n;
      for (std::size_t i = 0; i < t.size(); ++i)
        xn.grad[i] += g * (xn.value[i] - t[i]);
    };
  }
  return Tensor(out);
}

// --- autocorrelation -------------------------------------------------------

namespace {

struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// Plans are created once per length under a lock; executing them with the
// new-array interface on fftw_malloc buffers is thread-safe.
const FftPlans& plans_for(std::size_t len) {
  static std::mutex mutex;
  static std::map<std::size_t, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(len);
  if (it != cache.end())
    return it->second;
  const int n = static_cast<int>(len);
  double* in = fftw_alloc_real(len);
  fftw_complex* spec = fftw_alloc_complex(len / 2 + 1);
  FftPlans p;
  p.forward = fftw_plan_dft_r2c_1d(n, in, spec, FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(n, spec, in, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(spec);
  if (!p.forward || !p.inverse)
    throw InternalError("FFTW planning failed");
  return cache.emplace(len, p).first->second;
}

struct FftBuffers {
  std::size_t len;
  double* real;
  fftw_complex* a;
  fftw_complex* b;
  fftw_complex* acc;
  explicit FftBuffers(std::size_t n)
      : len(n), real(fftw_alloc_real(n)), a(fftw_alloc_complex(n / 2 + 1)),
        b(fftw_alloc_complex(n / 2 + 1)), acc(fftw_alloc_complex(n / 2 + 1)) {}
  ~FftBuffers() {
    fftw_free(real);
    fftw_free(a);
    fftw_free(b);
    fftw_free(acc);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;
};

// Scores for channels [c0, c0 + d) of row-major [len, stride] blocks.
std::vector<double> scores_fft_strided(const double* q, const double* k, std::size_t len, std::size_t stride,
                                       std::size_t c0, std::size_t d) {
  const auto& plans = plans_for(len);
  FftBuffers buf(len);
  const std::size_t bins = len / 2 + 1;
  for (std::size_t f = 0; f < bins; ++f)
    buf.acc[f][0] = buf.acc[f][1] = 0.0;
  for (std::size_t c = c0; c < c0 + d; ++c) {
    for (std::size_t t = 0; t < len; ++t)
      buf.real[t] = q[t * stride + c];
    fftw_execute_dft_r2c(plans.forward, buf.real, buf.a);
    for (std::size_t t = 0; t < len; ++t)
      buf.real[t] = k[t * stride + c];
    fftw_execute_dft_r2c(plans.forward, buf.real, buf.b);
    for (std::size_t f = 0; f < bins; ++f) {
      // a * conj(b)
      buf.acc[f][0] += buf.a[f][0] * buf.b[f][0] + buf.a[f][1] * buf.b[f][1];
      buf.acc[f][1] += buf.a[f][1] * buf.b[f][0] - buf.a[f][0] * buf.b[f][1];
    }
  }
  fftw_execute_dft_c2r(plans.inverse, buf.acc, buf.real);
  const double norm = 1.0 / (static_cast<double>(len) * static_cast<double>(len) * static_cast<double>(d));
  std::vector<double> r(len);
  for (std::size_t t = 0; t < len; ++t)
    r[t] = buf.real[t] * norm;
  return r;
}

std::vector<double> scores_direct_strided(const double* q, const double* k, std::size_t len,
                                          std::size_t stride, std::size_t c0, std::size_t d) {
  std::vector<double> r(len, 0.0);
  const double norm = 1.0 / (static_cast<double>(len) * static_cast<double>(d));
  for (std::size_t tau = 0; tau < len; ++tau) {
    double acc = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double* qr = q + ((t + tau) % len) * stride;
      const double* kr = k + t * stride;
      for (std::size_t c = c0; c < c0 + d; ++c)
        acc += qr[c] * kr[c];
    }
    r[tau] = acc * norm;
  }
  return r;
}

struct HeadSelection {
  std::vector<std::size_t> lags;
  std::vector<double> weights;
};

HeadSelection select_lags(const std::vector<double>& scores, std::size_t top_k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top_k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  HeadSelection sel;
  sel.lags.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top_k));
  double mx = -std::numeric_limits<double>::infinity();
  for (auto l : sel.lags)
    mx = std::max(mx, scores[l]);
  double z = 0.0;
  for (auto l : sel.lags) {
    sel.weights.push_back(std::exp(scores[l] - mx));
    z += sel.weights.back();
  }
  for (double& w : sel.weights)
    w /= z;
  return sel;
}

} // namespace

std::vector<double> lag_scores_direct(std::span<const double> q, std::span<const double> k, std::size_t len,
                                      std::size_t d) {
  return scores_direct_strided(q.data(), k.data(), len, d, 0, d);
}

std::vector<double> lag_scores_fft(std::span<const double> q, std::span<const double> k, std::size_t len,
                                   std::size_t d) {
  return scores_fft_strided(q.data(), k.data(), len, d, 0, d);
}

Tensor autocorrelation(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                       std::size_t top_k, CorrelationRoute route) {
  if (q.shape() != k.shape() || q.shape() != v.shape() || q.shape().size() != 2)
    throw InternalError("autocorrelation: q, k, v must share a [len, channels] shape");
  const std::size_t len = q.rows(), width = q.cols();
  if (heads == 0 || width % heads != 0)
    throw ConfigError("channel count must be divisible by the number of heads");
  if (top_k < 1 || top_k > len)
    throw ConfigError("top_k must lie in [1, sequence length]");
  const std::size_t dh = width / heads;

  auto out = make_op({len, width}, {q.shared(), k.shared(), v.shared()}, "autocorrelation");
  auto selections = std::make_shared<std::vector<HeadSelection>>();
  const double* qv = q.values().data();
  const double* kv = k.values().data();
  const double* vv = v.values().data();
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * dh;
    const auto scores = route == CorrelationRoute::fft ? scores_fft_strided(qv, kv, len, width, c0, dh)
                                                       : scores_direct_strided(qv, kv, len, width, c0, dh);
    auto sel = select_lags(scores, top_k);
    for (std::size_t i = 0; i < sel.lags.size(); ++i) {
      const std::size_t lag = sel.lags[i];
      const double w = sel.weights[i];
      for (std::size_t t = 0; t < len; ++t) {
        const double* src = vv + ((t + lag) % len) * width + c0;
        double* dst = out->value.data() + t * width + c0;
        for (std::size_t c = 0; c < dh; ++c)
          dst[c] += w * src[c];
      }
    }
    selections->push_back(std::move(sel));
  }

  if (out->requires_grad) {
    out->backward_fn = [len, width, dh, heads, selections](Node& self) {
      Node& qn = *self.parents[0];
      Node& kn = *self.parents[1];
      Node& vn = *self.parents[2];
      if (qn.requires_grad)
        qn.ensure_grad();
      if (kn.requires_grad)
        kn.ensure_grad();
      if (vn.requires_grad)
        vn.ensure_grad();
      const double norm = 1.0 / (static_cast<double>(len) * static_cast<double>(dh));
      const double* g = self.grad.data();
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t c0 = h * dh;
        const auto& sel = (*selections)[h];
        const std::size_t kk = sel.lags.size();
        std::vector<double> dw(kk, 0.0);
        for (std::size_t i = 0; i < kk; ++i) {
          const std::size_t lag = sel.lags[i];
          const double w = sel.weights[i];
          double acc = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t src = ((t + lag) % len) * width + c0;
            const double* gr = g + t * width + c0;
            for (std::size_t c = 0; c < dh; ++c) {
              acc += gr[c] * vn.value[src + c];
              if (vn.requires_grad)
                vn.grad[src + c] += w * gr[c];
            }
          }
          dw[i] = acc;
        }
        double mean = 0.0;
        for (std::size_t i = 0; i < kk; ++i)
          mean += sel.weights[i] * dw[i];
        for (std::size_t i = 0; i < kk; ++i) {
          const double dscore = sel.weights[i] * (dw[i] - mean) * norm;
          if (dscore == 0.0)
            continue;
          const std::size_t lag = sel.lags[i];
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t qi = ((t + lag) % len) * width + c0;
            const std::size_t ki = t * width + c0;
            for (std::size_t c = 0; c < dh; ++c) {
              if (qn.requires_grad)
                qn.grad[qi + c] += dscore * kn.value[ki + c];
              if (kn.requires_grad)
                kn.grad[ki + c] += dscore * qn.value[qi + c];
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

} // namespace edadecomp::ad

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// Tensors are rank-1 or rank-2 (rows = time steps, cols = channels), stored
// row-major. Every op records a node with a backward closure; backward()
// walks the graph in reverse topological order. Parameter gradients
// accumulate across backward() calls until zero_grad().
namespace edadecomp::ad {

struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  bool is_leaf = true;
  std::string label;

  std::size_t numel() const { return value.size(); }
  void ensure_grad();
};

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
  std::size_t cols() const { return node_->shape.size() < 2 ? 1 : node_->shape[1]; }
  std::size_t numel() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad();
  double item() const;

  const std::string& label() const { return node_->label; }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

  void zero_grad();

private:
  std::shared_ptr<Node> node_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

// Leaf constructors.
Tensor constant(std::vector<std::size_t> shape, std::vector<double> values);
Tensor parameter(std::vector<std::size_t> shape, std::vector<double> values, std::string label);
Tensor zeros(std::vector<std::size_t> shape);

// Reverse pass from a scalar; seeds d(loss)/d(loss) = seed. Throws
// InternalError on a cycle or a null parent.
void backward(const Tensor& loss, double seed = 1.0);

// --- ops -------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);            // same shape
Tensor sub(const Tensor& a, const Tensor& b);            // same shape
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& x, const Tensor& w);         // [r,k] x [k,c]
Tensor add_row_bias(const Tensor& x, const Tensor& bias); // [r,c] + [c]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor gelu(const Tensor& x);                            // erf form
// Row-wise normalisation over channels, eps = 1e-5.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);
// Centred moving average over rows with replicate padding, odd window.
Tensor moving_average(const Tensor& x, std::size_t window);
// x - moving_average(x): the seasonal part of a series decomposition.
Tensor seasonal_part(const Tensor& x, std::size_t window);
// Subtracts each column's mean over rows.
Tensor center_columns(const Tensor& x);
// layer_norm with a zero shift followed by center_columns. A learnable shift
// would be cancelled by the centring, so there is none.
Tensor series_norm(const Tensor& x, const Tensor& gamma);
// Circular 1-D convolution over rows; w is [width * cin, cout], tap-major.
Tensor conv1d_circular(const Tensor& x, const Tensor& w, std::size_t width);
// Mean squared error against a constant target of the same shape.
Tensor mse(const Tensor& x, std::span<const double> target);

enum class CorrelationRoute { fft, direct };

// Autocorrelation attention. q, k, v are [len, heads * d_head]. For each head
// the lag scores R(tau) = mean_{t,c} q[(t + tau) % len, c] * k[t, c] are
// computed for every lag, the top_k lags are kept (ties resolved towards the
// smaller lag) and the output is sum_i softmax(R)_i * roll(v, tau_i), with
// roll(v, tau)[t] = v[(t + tau) % len]. Lag selection is treated as constant
// in the backward pass.
Tensor autocorrelation(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                       std::size_t top_k, CorrelationRoute route = CorrelationRoute::fft);

// Lag scores for one head as used above, exposed for testing. q and k are
// [len, d] row-major blocks already restricted to the head's channels.
std::vector<double> lag_scores_direct(std::span<const double> q, std::span<const double> k,
                                      std::size_t len, std::size_t d);
std::vector<double> lag_scores_fft(std::span<const double> q, std::span<const double> k,
                                   std::size_t len, std::size_t d);

} // namespace edadecomp::ad

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace adares {

namespace detail {

struct Node {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // null for leaves

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense n-dimensional double tensor participating in a reverse-mode
// differentiation graph. Value-semantics handle: copies share the node.
// Graph recording and backward are single-threaded per graph; independent
// graphs carry no shared mutable state.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return node_->numel(); }

  const std::vector<double>& values() const { return node_->values; }
  // Direct write access; intended for leaf initialization and optimizer steps.
  std::vector<double>& mutable_values() { return node_->values; }

  // Scalar payload; throws unless numel() == 1.
  double value() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  // Gradient buffer, allocated (as zeros) on first access.
  const std::vector<double>& grad() const { return node_->ensure_grad(); }
  std::vector<double>& mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  }

  // Same values, no graph history, no gradient requirement.
  Tensor detach() const;

  // Reverse-mode sweep from a scalar output. Gradients accumulate into every
  // reachable requires_grad tensor; repeated calls keep accumulating until
  // zero_grad() is used.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {
// Builds a graph node. Parents and the backward rule are dropped when no
// parent requires grad, so inference-mode code records nothing.
Tensor make_op(std::vector<int> shape, std::vector<double> values,
               std::vector<Tensor> inputs, std::function<void(Node&)> backward);
}  // namespace detail

// ---- elementwise / reduction ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Element of a tensor as a scalar tensor (flat index); gradient scatters back.
Tensor select(const Tensor& a, std::int64_t index);
// Scalar tensor times arbitrary tensor.
Tensor scalar_mul(const Tensor& s, const Tensor& x);

// ---- linear algebra ----
// m: [rows, cols], v: [cols] -> [rows]
Tensor matvec(const Tensor& m, const Tensor& v);

// ---- softmax family (1-d logits, max-subtracted for stability) ----
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);
// -log softmax(logits)[label]
Tensor softmax_cross_entropy(const Tensor& logits, int label);

// ---- spatial ops (NCHW) ----
// input: [N, Cin, H, W], kernel: [Cout, Cin, K, K]; cross-correlation with
// zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding);
// Per-output-channel bias add on an NCHW tensor; bias: [C].
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);
// Non-overlapping factor x factor block means; spatial dims must divide evenly.
Tensor avg_pool2d(const Tensor& input, int factor);
// [1, C, H, W] -> [C], mean over the spatial extent.
Tensor global_avg_pool(const Tensor& input);
// Half-pixel-center bilinear resampling of a [N, C, H, W] tensor.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

// ---- recurrent cell ----
struct LstmParams {
  Tensor w_xi, w_hi, b_i;  // input gate
  Tensor w_xf, w_hf, b_f;  // forget gate
  Tensor w_xg, w_hg, b_g;  // candidate
  Tensor w_xo, w_ho, b_o;  // output gate

  std::vector<Tensor*> all() {
    return {&w_xi, &w_hi, &b_i, &w_xf, &w_hf, &b_f,
            &w_xg, &w_hg, &b_g, &w_xo, &w_ho, &b_o};
  }
};

// Standard LSTM cell: sigmoid gates, tanh candidate.
// x: [d], h/c: [k] -> (h', c'), each [k].
std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmParams& params);

}  // namespace adares

#include "adares/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace adares {

namespace {

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void accumulate(detail::Node& target, const std::vector<double>& contribution) {
  auto& g = target.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in " + shape_str(shape));
    n *= d;
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values.assign(static_cast<std::size_t>(n), value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in " + shape_str(shape));
    n *= d;
  }
  if (n != static_cast<std::int64_t>(values.size())) {
    throw std::invalid_argument("Tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

double Tensor::value() const {
  if (numel() != 1) {
    throw std::invalid_argument("Tensor::value: tensor of shape " + shape_str(shape()) +
                                " is not a scalar");
  }
  return node_->values[0];
}

Tensor Tensor::detach() const {
  return from_values(node_->shape, node_->values, false);
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw std::invalid_argument("backward: output of shape " + shape_str(shape()) +
                                " is not a scalar");
  }

  // Iterative post-order DFS for the topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      detail::Node* child = node->parents[next_child++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && node->requires_grad) {
      node->ensure_grad();
      node->backward(*node);
    }
  }
}

namespace detail {

Tensor make_op(std::vector<int> shape, std::vector<double> values,
               std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](detail::Node& n) {
    if (an->requires_grad) accumulate(*an, n.grad);
    if (bn->requires_grad) accumulate(*bn, n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](detail::Node& n) {
    if (an->requires_grad) accumulate(*an, n.grad);
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](detail::Node& n) {
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bn->values[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * an->values[i];
    }
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + s;
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an](detail::Node& n) {
    if (an->requires_grad) accumulate(*an, n.grad);
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * s;
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an, s](detail::Node& n) {
    if (!an->requires_grad) return;
    auto& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * s;
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an](detail::Node& n) {
    if (!an->requires_grad) return;
    auto& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (an->values[i] > 0.0) g[i] += n.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.values()[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an](detail::Node& n) {
    if (!an->requires_grad) return;
    auto& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = n.values[i];
      g[i] += n.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an](detail::Node& n) {
    if (!an->requires_grad) return;
    auto& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = n.values[i];
      g[i] += n.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.values()[i]);
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an](detail::Node& n) {
    if (!an->requires_grad) return;
    auto& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.values[i];
  });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.values()[i]);
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an](detail::Node& n) {
    if (!an->requires_grad) return;
    auto& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / an->values[i];
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  auto an = a.node();
  return detail::make_op({1}, {total}, {a}, [an](detail::Node& n) {
    if (!an->requires_grad) return;
    auto& g = an->ensure_grad();
    for (double& gi : g) gi += n.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor select(const Tensor& a, std::int64_t index) {
  if (index < 0 || index >= a.numel()) {
    throw std::out_of_range("select: index " + std::to_string(index) +
                            " out of range for " + std::to_string(a.numel()) + " elements");
  }
  auto an = a.node();
  const auto idx = static_cast<std::size_t>(index);
  return detail::make_op({1}, {a.values()[idx]}, {a}, [an, idx](detail::Node& n) {
    if (an->requires_grad) an->ensure_grad()[idx] += n.grad[0];
  });
}

Tensor scalar_mul(const Tensor& s, const Tensor& x) {
  if (s.numel() != 1) throw std::invalid_argument("scalar_mul: first argument must be scalar");
  const double sv = s.values()[0];
  std::vector<double> out(x.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * x.values()[i];
  auto sn = s.node(), xn = x.node();
  return detail::make_op(x.shape(), std::move(out), {s, x}, [sn, xn](detail::Node& n) {
    if (sn->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * xn->values[i];
      sn->ensure_grad()[0] += acc;
    }
    if (xn->requires_grad) {
      auto& g = xn->ensure_grad();
      const double sv = sn->values[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * sv;
    }
  });
}

// ---- linear algebra ----

Tensor matvec(const Tensor& m, const Tensor& v) {
  if (m.ndim() != 2 || v.ndim() != 1 || m.dim(1) != v.dim(0)) {
    throw std::invalid_argument("matvec: incompatible shapes " + shape_str(m.shape()) +
                                " x " + shape_str(v.shape()));
  }
  const int rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
  const double* mp = m.values().data();
  const double* vp = v.values().data();
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = mp + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += row[c] * vp[c];
    out[static_cast<std::size_t>(r)] = acc;
  }
  auto mn = m.node(), vn = v.node();
  return detail::make_op({rows}, std::move(out), {m, v}, [mn, vn, rows, cols](detail::Node& n) {
    if (mn->requires_grad) {
      auto& g = mn->ensure_grad();
      for (int r = 0; r < rows; ++r) {
        const double go = n.grad[static_cast<std::size_t>(r)];
        double* grow = g.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) grow[c] += go * vn->values[static_cast<std::size_t>(c)];
      }
    }
    if (vn->requires_grad) {
      auto& g = vn->ensure_grad();
      for (int r = 0; r < rows; ++r) {
        const double go = n.grad[static_cast<std::size_t>(r)];
        const double* row = mn->values.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) g[static_cast<std::size_t>(c)] += go * row[c];
      }
    }
  });
}

// ---- softmax family ----

namespace {

std::vector<double> stable_softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    denom += p[i];
  }
  for (double& pi : p) pi /= denom;
  return p;
}

void check_logits_1d(const Tensor& logits, const char* op) {
  if (logits.ndim() != 1 || logits.dim(0) < 1) {
    throw std::invalid_argument(std::string(op) + ": expected non-empty 1-d logits, got " +
                                shape_str(logits.shape()));
  }
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  check_logits_1d(logits, "softmax");
  auto p = stable_softmax(logits.values());
  auto ln = logits.node();
  return detail::make_op(logits.shape(), std::move(p), {logits}, [ln](detail::Node& n) {
    if (!ln->requires_grad) return;
    double dot = 0.0;
    for (std::size_t i = 0; i < n.grad.size(); ++i) dot += n.grad[i] * n.values[i];
    auto& g = ln->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.values[i] * (n.grad[i] - dot);
  });
}

Tensor log_softmax(const Tensor& logits) {
  check_logits_1d(logits, "log_softmax");
  const auto& z = logits.values();
  const double m = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (double zi : z) denom += std::exp(zi - m);
  const double lse = m + std::log(denom);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  auto ln = logits.node();
  return detail::make_op(logits.shape(), std::move(out), {logits}, [ln](detail::Node& n) {
    if (!ln->requires_grad) return;
    double gsum = 0.0;
    for (double gi : n.grad) gsum += gi;
    auto& g = ln->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] - std::exp(n.values[i]) * gsum;
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, int label) {
  check_logits_1d(logits, "softmax_cross_entropy");
  const int classes = logits.dim(0);
  if (classes < 2) {
    throw std::invalid_argument("softmax_cross_entropy: need at least 2 classes, got " +
                                std::to_string(classes));
  }
  if (label < 0 || label >= classes) {
    throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                            " out of range [0, " + std::to_string(classes) + ")");
  }
  const auto& z = logits.values();
  const double m = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (double zi : z) denom += std::exp(zi - m);
  const double loss = m + std::log(denom) - z[static_cast<std::size_t>(label)];
  auto ln = logits.node();
  return detail::make_op({1}, {loss}, {logits}, [ln, label](detail::Node& n) {
    if (!ln->requires_grad) return;
    auto p = stable_softmax(ln->values);
    auto& g = ln->ensure_grad();
    const double go = n.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * p[i];
    g[static_cast<std::size_t>(label)] -= go;
  });
}

// ---- spatial ops ----

namespace {

void check_nchw(const Tensor& t, const char* op) {
  if (t.ndim() != 4) {
    throw std::invalid_argument(std::string(op) + ": expected 4-d NCHW input, got " +
                                shape_str(t.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  check_nchw(input, "conv2d");
  if (kernel.ndim() != 4) {
    throw std::invalid_argument("conv2d: expected 4-d OIKK kernel, got " +
                                shape_str(kernel.shape()));
  }
  if (kernel.dim(2) != kernel.dim(3)) {
    throw std::invalid_argument("conv2d: only square kernels supported, got " +
                                shape_str(kernel.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  const int batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != cin) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(cin) +
                                " channels but kernel expects " + std::to_string(kernel.dim(1)));
  }
  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  if (h + 2 * padding < k || w + 2 * padding < k) {
    throw std::invalid_argument("conv2d: kernel size " + std::to_string(k) +
                                " exceeds padded input " + std::to_string(h + 2 * padding) +
                                "x" + std::to_string(w + 2 * padding));
  }

  std::vector<double> out(static_cast<std::size_t>(batch) * cout * oh * ow, 0.0);
  const double* in = input.values().data();
  const double* ker = kernel.values().data();
  for (int n = 0; n < batch; ++n) {
    for (int co = 0; co < cout; ++co) {
      double* outp = out.data() + (static_cast<std::size_t>(n) * cout + co) * oh * ow;
      for (int ci = 0; ci < cin; ++ci) {
        const double* inp = in + (static_cast<std::size_t>(n) * cin + ci) * h * w;
        const double* kp = ker + (static_cast<std::size_t>(co) * cin + ci) * k * k;
        for (int y = 0; y < oh; ++y) {
          for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            const int iy0 = y * stride - padding;
            const int ix0 = x * stride - padding;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= h) continue;
              const double* inrow = inp + static_cast<std::size_t>(iy) * w;
              const double* krow = kp + static_cast<std::size_t>(ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= w) continue;
                acc += inrow[ix] * krow[kx];
              }
            }
            outp[static_cast<std::size_t>(y) * ow + x] += acc;
          }
        }
      }
    }
  }

  auto in_node = input.node(), ker_node = kernel.node();
  auto bw = [in_node, ker_node, batch, cin, cout, h, w, k, oh, ow, stride,
             padding](detail::Node& node) {
    const double* g = node.grad.data();
    double* gin = in_node->requires_grad ? in_node->ensure_grad().data() : nullptr;
    double* gker = ker_node->requires_grad ? ker_node->ensure_grad().data() : nullptr;
    for (int n = 0; n < batch; ++n) {
      for (int co = 0; co < cout; ++co) {
        const double* gout = g + (static_cast<std::size_t>(n) * cout + co) * oh * ow;
        for (int ci = 0; ci < cin; ++ci) {
          const double* inp = in_node->values.data() + (static_cast<std::size_t>(n) * cin + ci) * h * w;
          const double* kp = ker_node->values.data() + (static_cast<std::size_t>(co) * cin + ci) * k * k;
          double* ginp = gin ? gin + (static_cast<std::size_t>(n) * cin + ci) * h * w : nullptr;
          double* gkp = gker ? gker + (static_cast<std::size_t>(co) * cin + ci) * k * k : nullptr;
          for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
              const double go = gout[static_cast<std::size_t>(y) * ow + x];
              if (go == 0.0) continue;
              const int iy0 = y * stride - padding;
              const int ix0 = x * stride - padding;
              for (int ky = 0; ky < k; ++ky) {
                const int iy = iy0 + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                  const int ix = ix0 + kx;
                  if (ix < 0 || ix >= w) continue;
                  const std::size_t ii = static_cast<std::size_t>(iy) * w + ix;
                  const std::size_t ki = static_cast<std::size_t>(ky) * k + kx;
                  if (ginp) ginp[ii] += go * kp[ki];
                  if (gkp) gkp[ki] += go * inp[ii];
                }
              }
            }
          }
        }
      }
    }
  };
  return detail::make_op({batch, cout, oh, ow}, std::move(out), {input, kernel}, std::move(bw));
}

Tensor add_channel_bias(const Tensor& input, const Tensor& bias) {
  check_nchw(input, "add_channel_bias");
  if (bias.ndim() != 1 || bias.dim(0) != input.dim(1)) {
    throw std::invalid_argument("add_channel_bias: bias " + shape_str(bias.shape()) +
                                " does not match " + std::to_string(input.dim(1)) + " channels");
  }
  const int batch = input.dim(0), c = input.dim(1);
  const std::size_t plane = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  std::vector<double> out(input.values());
  for (int n = 0; n < batch; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      double* p = out.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
      const double b = bias.values()[static_cast<std::size_t>(ch)];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  }
  auto in_node = input.node(), b_node = bias.node();
  return detail::make_op(input.shape(), std::move(out), {input, bias},
                         [in_node, b_node, batch, c, plane](detail::Node& n) {
    if (in_node->requires_grad) accumulate(*in_node, n.grad);
    if (b_node->requires_grad) {
      auto& g = b_node->ensure_grad();
      for (int nn = 0; nn < batch; ++nn) {
        for (int ch = 0; ch < c; ++ch) {
          const double* p = n.grad.data() + (static_cast<std::size_t>(nn) * c + ch) * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += p[i];
          g[static_cast<std::size_t>(ch)] += acc;
        }
      }
    }
  });
}

Tensor avg_pool2d(const Tensor& input, int factor) {
  check_nchw(input, "avg_pool2d");
  if (factor < 1) throw std::invalid_argument("avg_pool2d: factor must be >= 1");
  const int batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % factor != 0 || w % factor != 0) {
    throw std::invalid_argument("avg_pool2d: spatial dims " + std::to_string(h) + "x" +
                                std::to_string(w) + " not divisible by factor " +
                                std::to_string(factor));
  }
  const int oh = h / factor, ow = w / factor;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  std::vector<double> out(static_cast<std::size_t>(batch) * c * oh * ow);
  const double* in = input.values().data();
  for (int n = 0; n < batch; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      const double* inp = in + (static_cast<std::size_t>(n) * c + ch) * h * w;
      double* outp = out.data() + (static_cast<std::size_t>(n) * c + ch) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < factor; ++dy) {
            const double* row = inp + static_cast<std::size_t>(y * factor + dy) * w + x * factor;
            for (int dx = 0; dx < factor; ++dx) acc += row[dx];
          }
          outp[static_cast<std::size_t>(y) * ow + x] = acc * inv;
        }
      }
    }
  }
  auto in_node = input.node();
  return detail::make_op({batch, c, oh, ow}, std::move(out), {input},
                         [in_node, batch, c, h, w, oh, ow, factor, inv](detail::Node& n) {
    if (!in_node->requires_grad) return;
    auto& g = in_node->ensure_grad();
    for (int nn = 0; nn < batch; ++nn) {
      for (int ch = 0; ch < c; ++ch) {
        const double* gout = n.grad.data() + (static_cast<std::size_t>(nn) * c + ch) * oh * ow;
        double* gin = g.data() + (static_cast<std::size_t>(nn) * c + ch) * h * w;
        for (int y = 0; y < oh; ++y) {
          for (int x = 0; x < ow; ++x) {
            const double go = gout[static_cast<std::size_t>(y) * ow + x] * inv;
            for (int dy = 0; dy < factor; ++dy) {
              double* row = gin + static_cast<std::size_t>(y * factor + dy) * w + x * factor;
              for (int dx = 0; dx < factor; ++dx) row[dx] += go;
            }
          }
        }
      }
    }
  });
}

Tensor global_avg_pool(const Tensor& input) {
  check_nchw(input, "global_avg_pool");
  if (input.dim(0) != 1) {
    throw std::invalid_argument("global_avg_pool: expected batch of 1, got " +
                                std::to_string(input.dim(0)));
  }
  const int c = input.dim(1);
  const std::size_t plane = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  const double inv = 1.0 / static_cast<double>(plane);
  std::vector<double> out(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    const double* p = input.values().data() + static_cast<std::size_t>(ch) * plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    out[static_cast<std::size_t>(ch)] = acc * inv;
  }
  auto in_node = input.node();
  return detail::make_op({c}, std::move(out), {input}, [in_node, c, plane, inv](detail::Node& n) {
    if (!in_node->requires_grad) return;
    auto& g = in_node->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const double go = n.grad[static_cast<std::size_t>(ch)] * inv;
      double* p = g.data() + static_cast<std::size_t>(ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += go;
    }
  });
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  check_nchw(input, "bilinear_resize");
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: bad output size");
  const int batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (out_h == h && out_w == w) return scale(input, 1.0);

  // Half-pixel sample centers, clamped at the borders.
  struct Tap {
    int lo, hi;
    double w_hi;
  };
  auto make_taps = [](int in_size, int out_size) {
    std::vector<Tap> taps(static_cast<std::size_t>(out_size));
    const double ratio = static_cast<double>(in_size) / out_size;
    for (int i = 0; i < out_size; ++i) {
      double src = (i + 0.5) * ratio - 0.5;
      if (src < 0.0) src = 0.0;
      int lo = static_cast<int>(src);
      if (lo > in_size - 1) lo = in_size - 1;
      int hi = lo + 1 < in_size ? lo + 1 : in_size - 1;
      taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
    }
    return taps;
  };
  const auto ytaps = make_taps(h, out_h);
  const auto xtaps = make_taps(w, out_w);

  std::vector<double> out(static_cast<std::size_t>(batch) * c * out_h * out_w);
  for (int n = 0; n < batch; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      const double* inp = input.values().data() + (static_cast<std::size_t>(n) * c + ch) * h * w;
      double* outp = out.data() + (static_cast<std::size_t>(n) * c + ch) * out_h * out_w;
      for (int y = 0; y < out_h; ++y) {
        const Tap& ty = ytaps[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_w; ++x) {
          const Tap& tx = xtaps[static_cast<std::size_t>(x)];
          const double v00 = inp[static_cast<std::size_t>(ty.lo) * w + tx.lo];
          const double v01 = inp[static_cast<std::size_t>(ty.lo) * w + tx.hi];
          const double v10 = inp[static_cast<std::size_t>(ty.hi) * w + tx.lo];
          const double v11 = inp[static_cast<std::size_t>(ty.hi) * w + tx.hi];
          const double top = v00 + (v01 - v00) * tx.w_hi;
          const double bot = v10 + (v11 - v10) * tx.w_hi;
          outp[static_cast<std::size_t>(y) * out_w + x] = top + (bot - top) * ty.w_hi;
        }
      }
    }
  }
  auto in_node = input.node();
  return detail::make_op({batch, c, out_h, out_w}, std::move(out), {input},
                         [in_node, batch, c, h, w, out_h, out_w, ytaps, xtaps](detail::Node& n) {
    if (!in_node->requires_grad) return;
    auto& g = in_node->ensure_grad();
    for (int nn = 0; nn < batch; ++nn) {
      for (int ch = 0; ch < c; ++ch) {
        const double* gout = n.grad.data() + (static_cast<std::size_t>(nn) * c + ch) * out_h * out_w;
        double* gin = g.data() + (static_cast<std::size_t>(nn) * c + ch) * h * w;
        for (int y = 0; y < out_h; ++y) {
          const Tap& ty = ytaps[static_cast<std::size_t>(y)];
          for (int x = 0; x < out_w; ++x) {
            const Tap& tx = xtaps[static_cast<std::size_t>(x)];
            const double go = gout[static_cast<std::size_t>(y) * out_w + x];
            const double wy1 = ty.w_hi, wy0 = 1.0 - ty.w_hi;
            const double wx1 = tx.w_hi, wx0 = 1.0 - tx.w_hi;
            gin[static_cast<std::size_t>(ty.lo) * w + tx.lo] += go * wy0 * wx0;
            gin[static_cast<std::size_t>(ty.lo) * w + tx.hi] += go * wy0 * wx1;
            gin[static_cast<std::size_t>(ty.hi) * w + tx.lo] += go * wy1 * wx0;
            gin[static_cast<std::size_t>(ty.hi) * w + tx.hi] += go * wy1 * wx1;
          }
        }
      }
    }
  });
}

// ---- recurrent cell ----

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmParams& params) {
  if (x.ndim() != 1 || h_prev.ndim() != 1 || c_prev.ndim() != 1 ||
      h_prev.dim(0) != c_prev.dim(0)) {
    throw std::invalid_argument("lstm_step: expected 1-d x and matching 1-d h/c states");
  }
  const Tensor i = sigmoid(add(add(matvec(params.w_xi, x), matvec(params.w_hi, h_prev)), params.b_i));
  const Tensor f = sigmoid(add(add(matvec(params.w_xf, x), matvec(params.w_hf, h_prev)), params.b_f));
  const Tensor g = tanh(add(add(matvec(params.w_xg, x), matvec(params.w_hg, h_prev)), params.b_g));
  const Tensor o = sigmoid(add(add(matvec(params.w_xo, x), matvec(params.w_ho, h_prev)), params.b_o));
  const Tensor c = add(mul(f, c_prev), mul(i, g));
  const Tensor h = mul(o, tanh(c));
  return {h, c};
}

}  // namespace adares

#include "adares/gumbel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace adares {

double TemperatureSchedule::at(int epoch) const {
  if (epoch < 0) throw std::invalid_argument("TemperatureSchedule: epoch must be >= 0");
  return std::max(floor, tau0 * std::exp(decay * static_cast<double>(epoch)));
}

double gumbel_from_uniform(double u) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  u = std::clamp(u, eps, 1.0 - eps);
  return -std::log(-std::log(u));
}

std::vector<double> sample_gumbel(Rng& rng, int k) {
  if (k < 1) throw std::invalid_argument("sample_gumbel: k must be >= 1");
  std::vector<double> noise(static_cast<std::size_t>(k));
  for (double& g : noise) g = gumbel_from_uniform(rng.uniform());
  return noise;
}

int gumbel_max(const std::vector<double>& log_probs, const std::vector<double>& noise) {
  if (log_probs.empty() || log_probs.size() != noise.size()) {
    throw std::invalid_argument("gumbel_max: log_probs and noise must be non-empty and equal length");
  }
  int best = -1;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    if (std::isinf(log_probs[i]) && log_probs[i] < 0.0) continue;
    const double v = log_probs[i] + noise[i];
    if (best < 0 || v > best_val) {
      best = static_cast<int>(i);
      best_val = v;
    }
  }
  if (best < 0) throw std::invalid_argument("gumbel_max: all log-probabilities are -inf");
  return best;
}

Tensor gumbel_softmax(const Tensor& log_probs, const std::vector<double>& noise, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("gumbel_softmax: tau must be > 0");
  if (log_probs.ndim() != 1 ||
      static_cast<std::size_t>(log_probs.dim(0)) != noise.size()) {
    throw std::invalid_argument("gumbel_softmax: log_probs and noise must be 1-d of equal length");
  }
  const Tensor noise_t = Tensor::from_values(log_probs.shape(), noise);
  return softmax(scale(add(log_probs, noise_t), 1.0 / tau));
}

GumbelSample gumbel_sample(const Tensor& log_probs, const std::vector<double>& noise, double tau) {
  GumbelSample s;
  s.tau = tau;
  s.soft = gumbel_softmax(log_probs, noise, tau);
  s.hard_index = gumbel_max(log_probs.values(), noise);
  s.hard_onehot.assign(log_probs.values().size(), 0.0);
  s.hard_onehot[static_cast<std::size_t>(s.hard_index)] = 1.0;
  return s;
}

GumbelSample gumbel_sample(const Tensor& log_probs, Rng& rng, double tau) {
  return gumbel_sample(log_probs, sample_gumbel(rng, log_probs.dim(0)), tau);
}

Tensor straight_through(const GumbelSample& sample) {
  const Tensor& soft = sample.soft;
  auto soft_node = soft.node();
  return detail::make_op(soft.shape(), sample.hard_onehot, {soft}, [soft_node](detail::Node& n) {
    if (!soft_node->requires_grad) return;
    auto& g = soft_node->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

}  // namespace adares

#pragma once

#include <vector>

#include "adares/rng.hpp"
#include "adares/tensor.hpp"

namespace adares {

// One categorical draw together with its temperature-relaxed counterpart.
// Hard and soft parts share the same perturbed logits, so the hard index is
// always the argmax of the soft vector regardless of the temperature.
struct GumbelSample {
  int hard_index = 0;
  std::vector<double> hard_onehot;
  Tensor soft;  // differentiable w.r.t. the log-probabilities
  double tau = 1.0;
};

// tau(e) = max(floor, tau0 * exp(decay * e))
struct TemperatureSchedule {
  double tau0 = 5.0;
  double decay = -0.045;
  double floor = 0.1;

  double at(int epoch) const;
};

// G = -log(-log u) for u in (0, 1).
double gumbel_from_uniform(double u);

// K i.i.d. standard Gumbel draws; uniforms are clamped away from {0, 1} by
// machine epsilon so the transform stays finite.
std::vector<double> sample_gumbel(Rng& rng, int k);

// argmax_i(log_probs[i] + noise[i]); ties broken toward the lowest index.
// Entries with log_probs = -inf are never selected; throws if all are -inf.
int gumbel_max(const std::vector<double>& log_probs, const std::vector<double>& noise);

// Temperature-relaxed softmax over the perturbed logits; differentiable
// w.r.t. log_probs. Throws for tau <= 0.
Tensor gumbel_softmax(const Tensor& log_probs, const std::vector<double>& noise, double tau);

// Hard sample plus relaxation from one shared noise vector.
GumbelSample gumbel_sample(const Tensor& log_probs, const std::vector<double>& noise, double tau);
GumbelSample gumbel_sample(const Tensor& log_probs, Rng& rng, double tau);

// Forward value is the hard one-hot; backward gradient is that of the soft
// relaxation (straight-through estimator).
Tensor straight_through(const GumbelSample& sample);

}  // namespace adares

#include "adares/policy_net.hpp"

#include <cmath>
#include <stdexcept>

namespace adares {
namespace {

Tensor init_normal(std::vector<int> shape, double stddev, Rng& rng) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> values(static_cast<std::size_t>(n));
  for (auto& v : values) {
    v = rng.normal() * stddev;
  }
  return Tensor::from_values(std::move(shape), std::move(values), true);
}

}  // namespace

LstmParams init_lstm_params(int input_dim, int hidden_dim, Rng& rng) {
  double x_std = std::sqrt(1.0 / input_dim);
  double h_std = std::sqrt(1.0 / hidden_dim);
  auto gate = [&](double bias_value) {
    return std::tuple<Tensor, Tensor, Tensor>(
        init_normal({hidden_dim, input_dim}, x_std, rng),
        init_normal({hidden_dim, hidden_dim}, h_std, rng),
        Tensor::full({hidden_dim}, bias_value, true));
  };
  LstmParams params;
  // Forget bias starts at 1 so early training does not erase state.
  std::tie(params.w_xi, params.w_hi, params.b_i) = gate(0.0);
  std::tie(params.w_xf, params.w_hf, params.b_f) = gate(1.0);
  std::tie(params.w_xg, params.w_hg, params.b_g) = gate(0.0);
  std::tie(params.w_xo, params.w_ho, params.b_o) = gate(0.0);
  return params;
}

std::vector<std::pair<std::string, Tensor>> lstm_named(const LstmParams& params,
                                                       const std::string& prefix) {
  return {
      {prefix + ".w_xi", params.w_xi}, {prefix + ".w_hi", params.w_hi},
      {prefix + ".b_i", params.b_i},   {prefix + ".w_xf", params.w_xf},
      {prefix + ".w_hf", params.w_hf}, {prefix + ".b_f", params.b_f},
      {prefix + ".w_xg", params.w_xg}, {prefix + ".w_hg", params.w_hg},
      {prefix + ".b_g", params.b_g},   {prefix + ".w_xo", params.w_xo},
      {prefix + ".w_ho", params.w_ho}, {prefix + ".b_o", params.b_o},
  };
}

std::vector<std::pair<std::string, Tensor>> PolicyParams::named(
    const std::string& prefix) const {
  auto out = phi.named(prefix + ".phi");
  auto lstm_entries = lstm_named(lstm, prefix + ".lstm");
  out.insert(out.end(), lstm_entries.begin(), lstm_entries.end());
  out.emplace_back(prefix + ".action.weight", action_weight);
  out.emplace_back(prefix + ".action.bias", action_bias);
  return out;
}

PolicyParams init_policy_params(const PolicySpec& spec, int num_classes, Rng& rng) {
  PolicyParams params;
  params.phi = init_backbone_params(spec.phi, num_classes, rng);
  params.lstm = init_lstm_params(spec.feature_dim(), spec.hidden_dim, rng);
  double head_std = std::sqrt(1.0 / spec.hidden_dim);
  params.action_weight = init_normal({spec.num_actions, spec.hidden_dim}, head_std, rng);
  params.action_bias = Tensor::zeros({spec.num_actions}, true);
  return params;
}

PolicyState initial_policy_state(const PolicySpec& spec) {
  return {Tensor::zeros({spec.hidden_dim}), Tensor::zeros({spec.hidden_dim}), 0};
}

PolicyStepOutput policy_step(const PolicySpec& spec, const PolicyParams& params,
                             const Tensor& low_res_frame, const PolicyState& state) {
  if (state.pending_skips != 0) {
    throw std::logic_error("policy_step: frame is covered by a pending skip");
  }
  PolicyStepOutput out;
  out.features = backbone_features(spec.phi, params.phi, low_res_frame);
  auto [h, c] = lstm_step(out.features, state.h, state.c, params.lstm);
  out.logits = add(matvec(params.action_weight, h), params.action_bias);
  out.next_state = {h, c, 0};
  return out;
}

std::vector<LayerCost> policy_cost_layers(const PolicySpec& spec) {
  auto layers = backbone_cost_layers(spec.phi, /*num_classes=*/1, /*include_head=*/false);
  int d = spec.feature_dim();
  int k = spec.hidden_dim;
  for (int gate = 0; gate < 4; ++gate) {
    layers.push_back(LinearCost{d, k});  // input projection
    layers.push_back(LinearCost{k, k});  // recurrent projection
    layers.push_back(ElementwiseCost{2L * k});  // bias add + activation
  }
  // Cell/state updates: c = f*c + i*g (3 ops/element), tanh(c), h = o*tanh (2).
  layers.push_back(ElementwiseCost{6L * k});
  layers.push_back(LinearCost{k, spec.num_actions});
  return layers;
}

}  // namespace adares

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adares/actions.hpp"
#include "adares/backbones.hpp"
#include "adares/cost_model.hpp"
#include "adares/gumbel.hpp"
#include "adares/rng.hpp"
#include "adares/tensor.hpp"

namespace adares {

// Per-frame decision network: a small conv feature extractor over the
// lowest-resolution frame, an LSTM carrying temporal context, and a linear
// head producing logits over the action space. The feature extractor also
// backs the lowest-resolution classifier through its own head, so that
// prediction adds only a head's worth of compute.
struct PolicySpec {
  BackboneSpec phi{"phi", 8, 1, {{16, 2, false}, {32, 2, false}}};
  int hidden_dim = 64;
  int num_actions = 7;

  int feature_dim() const { return phi.feature_dim(); }
};

struct PolicyParams {
  BackboneParams phi;     // conv stack + shared lowest-resolution classifier head
  LstmParams lstm;
  Tensor action_weight;   // [num_actions, hidden_dim]
  Tensor action_bias;     // [num_actions]

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

PolicyParams init_policy_params(const PolicySpec& spec, int num_classes, Rng& rng);
LstmParams init_lstm_params(int input_dim, int hidden_dim, Rng& rng);
std::vector<std::pair<std::string, Tensor>> lstm_named(const LstmParams& params,
                                                       const std::string& prefix);

// Recurrent state threaded through a video. pending_skips > 0 means the
// current frame is covered by an earlier skip decision and must not be
// observed; h/c freeze across covered frames.
struct PolicyState {
  Tensor h;
  Tensor c;
  int pending_skips = 0;
};

PolicyState initial_policy_state(const PolicySpec& spec);

// One observed frame: features from the low-resolution view, one LSTM update,
// action logits. The caller decides how to turn logits into an action.
struct PolicyStepOutput {
  Tensor features;  // [feature_dim], input to the shared classifier head
  Tensor logits;    // [num_actions]
  PolicyState next_state;
};

PolicyStepOutput policy_step(const PolicySpec& spec, const PolicyParams& params,
                             const Tensor& low_res_frame, const PolicyState& state);

// Analytic cost of one observed-frame decision (features + LSTM + action head).
std::vector<LayerCost> policy_cost_layers(const PolicySpec& spec);

}  // namespace adares

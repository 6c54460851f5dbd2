#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adares/actions.hpp"
#include "adares/backbones.hpp"
#include "adares/cost_model.hpp"
#include "adares/policy_net.hpp"
#include "adares/rng.hpp"
#include "adares/tensor.hpp"

namespace adares {

struct ModelConfig {
  int num_classes = 6;
  int frames = 16;
  ResolutionLadder ladder;
  std::vector<int> skip_counts = {1, 2, 4};
  int policy_hidden = 64;
  int aggregator_hidden = 64;
  bool with_aggregator = false;  // recurrent label head used by one baseline

  ActionSpace action_space() const;
  PolicySpec policy_spec() const;
};

// All learnable state: one classifier per ladder level (the lowest level's
// classifier is the policy feature extractor plus a head) and the decision
// network. The optional aggregator replaces logit averaging with an LSTM for
// the corresponding baseline.
struct Model {
  ModelConfig config;
  std::vector<BackboneSpec> backbone_specs;  // levels 0 .. L-2
  std::vector<BackboneParams> backbones;
  PolicyParams policy;
  LstmParams aggregator;
  Tensor aggregator_head_weight;  // [num_classes, aggregator_hidden]
  Tensor aggregator_head_bias;

  static Model init(const ModelConfig& config, Rng& rng);

  // Stable order; checkpoint layout and optimizer slots depend on it.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;

  // Stage-freezing groups. Classifiers cover every level head and conv stack
  // except the policy's: the shared feature extractor belongs to the decision
  // pathway, its classifier head does not.
  std::vector<Tensor> classifier_parameters() const;
  std::vector<Tensor> policy_feature_parameters() const;  // shared conv stack
  std::vector<Tensor> policy_temporal_parameters() const;  // LSTM + action head
};

// Per-level costs computed from the layer shapes of this model family.
CostTable analytic_cost_table(const ModelConfig& config);

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace adares

#include "adares/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace adares {

ActionSpace ModelConfig::action_space() const {
  ActionSpace space;
  space.levels = ladder.levels();
  space.skip_counts = skip_counts;
  return space;
}

PolicySpec ModelConfig::policy_spec() const {
  PolicySpec spec;
  spec.phi.input_size = ladder.sizes.back();
  spec.hidden_dim = policy_hidden;
  spec.num_actions = action_space().size();
  return spec;
}

Model Model::init(const ModelConfig& config, Rng& rng) {
  Model model;
  model.config = config;
  model.backbone_specs = default_backbone_specs(config.ladder);
  for (const auto& spec : model.backbone_specs) {
    model.backbones.push_back(init_backbone_params(spec, config.num_classes, rng));
  }
  model.policy = init_policy_params(config.policy_spec(), config.num_classes, rng);
  if (config.with_aggregator) {
    int feat = model.backbone_specs.front().feature_dim();
    model.aggregator = init_lstm_params(feat, config.aggregator_hidden, rng);
    double head_std = std::sqrt(1.0 / config.aggregator_hidden);
    std::vector<double> w(static_cast<std::size_t>(config.num_classes) *
                          config.aggregator_hidden);
    for (auto& v : w) v = rng.normal() * head_std;
    model.aggregator_head_weight =
        Tensor::from_values({config.num_classes, config.aggregator_hidden}, std::move(w), true);
    model.aggregator_head_bias = Tensor::zeros({config.num_classes}, true);
  }
  return model;
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t level = 0; level < backbones.size(); ++level) {
    auto entries = backbones[level].named(backbone_specs[level].name);
    out.insert(out.end(), entries.begin(), entries.end());
  }
  auto policy_entries = policy.named("policy");
  out.insert(out.end(), policy_entries.begin(), policy_entries.end());
  if (config.with_aggregator) {
    auto agg = lstm_named(aggregator, "agg.lstm");
    out.insert(out.end(), agg.begin(), agg.end());
    out.emplace_back("agg.head.weight", aggregator_head_weight);
    out.emplace_back("agg.head.bias", aggregator_head_bias);
  }
  return out;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, tensor] : named_parameters()) {
    out.push_back(tensor);
  }
  return out;
}

std::vector<Tensor> Model::classifier_parameters() const {
  std::vector<Tensor> out;
  for (const auto& params : backbones) {
    for (const auto& stage : params.stages) {
      out.push_back(stage.weight);
      out.push_back(stage.bias);
    }
    out.push_back(params.head_weight);
    out.push_back(params.head_bias);
  }
  out.push_back(policy.phi.head_weight);
  out.push_back(policy.phi.head_bias);
  if (config.with_aggregator) {
    LstmParams copy = aggregator;
    for (Tensor* t : copy.all()) {
      out.push_back(*t);
    }
    out.push_back(aggregator_head_weight);
    out.push_back(aggregator_head_bias);
  }
  return out;
}

std::vector<Tensor> Model::policy_feature_parameters() const {
  std::vector<Tensor> out;
  for (const auto& stage : policy.phi.stages) {
    out.push_back(stage.weight);
    out.push_back(stage.bias);
  }
  return out;
}

std::vector<Tensor> Model::policy_temporal_parameters() const {
  std::vector<Tensor> out;
  LstmParams copy = policy.lstm;
  for (Tensor* t : copy.all()) {
    out.push_back(*t);
  }
  out.push_back(policy.action_weight);
  out.push_back(policy.action_bias);
  return out;
}

CostTable analytic_cost_table(const ModelConfig& config) {
  auto specs = default_backbone_specs(config.ladder);
  PolicySpec policy = config.policy_spec();
  std::vector<CostEntry> entries;
  std::vector<std::pair<std::string, int>> binding;
  for (const auto& spec : specs) {
    double gflops =
        analytic_flops(backbone_cost_layers(spec, config.num_classes, true)) * 1e-9;
    entries.push_back({spec.name, spec.input_size, gflops});
    binding.emplace_back(spec.name, spec.input_size);
  }
  // Lowest level: full feature extractor + classifier head, as a standalone net.
  auto shared_layers = backbone_cost_layers(policy.phi, config.num_classes, true);
  double shared_full = analytic_flops(shared_layers) * 1e-9;
  std::string shared_name = "psi" + std::to_string(config.ladder.levels() - 1);
  entries.push_back({shared_name, policy.phi.input_size, shared_full});
  binding.emplace_back(shared_name, policy.phi.input_size);

  double overhead = analytic_flops(policy_cost_layers(policy)) * 1e-9;
  double head_only =
      analytic_flops({LinearCost{policy.feature_dim(), config.num_classes}}) * 1e-9;
  return CostTable::from_entries(std::move(entries), std::move(binding),
                                 CostTable::Provenance::Analytic, overhead, head_only);
}

namespace {

using nlohmann::json;

json config_to_json(const ModelConfig& config) {
  return json{{"num_classes", config.num_classes},
              {"frames", config.frames},
              {"ladder", config.ladder.sizes},
              {"skip_counts", config.skip_counts},
              {"policy_hidden", config.policy_hidden},
              {"aggregator_hidden", config.aggregator_hidden},
              {"with_aggregator", config.with_aggregator}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig config;
  config.num_classes = j.at("num_classes").get<int>();
  config.frames = j.at("frames").get<int>();
  config.ladder.sizes = j.at("ladder").get<std::vector<int>>();
  config.skip_counts = j.at("skip_counts").get<std::vector<int>>();
  config.policy_hidden = j.at("policy_hidden").get<int>();
  config.aggregator_hidden = j.at("aggregator_hidden").get<int>();
  config.with_aggregator = j.at("with_aggregator").get<bool>();
  return config;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  json params = json::object();
  for (const auto& [name, tensor] : model.named_parameters()) {
    params[name] = json{{"shape", tensor.shape()}, {"values", tensor.values()}};
  }
  json doc{{"version", kCheckpointVersion},
           {"config", config_to_json(model.config)},
           {"params", params}};
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  }
  out << doc.dump() << "\n";
  if (!out) {
    throw std::runtime_error("checkpoint: write to " + path + " failed");
  }
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("checkpoint: cannot open " + path);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint: " + path + " is not valid JSON: " + e.what());
  }
  int version = doc.at("version").get<int>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelConfig config = config_from_json(doc.at("config"));
  Rng rng(0);  // all values are overwritten below
  Model model = Model::init(config, rng);

  const json& params = doc.at("params");
  auto named = model.named_parameters();
  if (params.size() != named.size()) {
    throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
  }
  for (auto& [name, tensor] : named) {
    if (!params.contains(name)) {
      throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
    }
    const json& entry = params.at(name);
    auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape != tensor.shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    }
    auto values = entry.at("values").get<std::vector<double>>();
    if (values.size() != tensor.values().size()) {
      throw std::runtime_error("checkpoint: value count mismatch for '" + name + "'");
    }
    tensor.mutable_values() = std::move(values);
  }
  return model;
}

}  // namespace adares

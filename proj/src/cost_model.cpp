#include "adares/cost_model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace adares {
namespace {

// Reserved CSV row names for the full-accounting constants.
constexpr const char* kPolicyRow = "policy";
constexpr const char* kSharedHeadRow = "shared-head";

bool is_reserved(const std::string& network) {
  return network == kPolicyRow || network == kSharedHeadRow;
}

}  // namespace

double analytic_flops(const std::vector<LayerCost>& layers) {
  double total = 0.0;
  for (const auto& layer : layers) {
    if (const auto* conv = std::get_if<ConvCost>(&layer)) {
      total += 2.0 * conv->kernel * conv->kernel * conv->in_ch * conv->out_ch *
               conv->out_h * conv->out_w;
    } else if (const auto* lin = std::get_if<LinearCost>(&layer)) {
      total += 2.0 * lin->d_in * lin->d_out;
    } else {
      total += static_cast<double>(std::get<ElementwiseCost>(layer).out_elems);
    }
  }
  return total;
}

CostTable CostTable::paper() {
  std::vector<CostEntry> entries = {
      {"ResNet-50", 224, 4.1103},      {"ResNet-34", 168, 2.2490},
      {"ResNet-18", 112, 0.4683},      {"MobileNet-v2", 84, 0.0529},
      {"EfficientNet-b0", 112, 0.0975}, {"EfficientNet-b1", 168, 0.3937},
      {"EfficientNet-b3", 224, 1.8000},
  };
  std::vector<std::pair<std::string, int>> binding = {
      {"ResNet-50", 224}, {"ResNet-34", 168}, {"ResNet-18", 112}, {"MobileNet-v2", 84}};
  // Decision pathway approximated by its dominant LSTM term over 1280-dim
  // features; shared head is one 1280 x 200 classification layer.
  const double policy_overhead = 1280.0 * 1280.0 * 1e-9;
  const double shared_head = 2.0 * 1280.0 * 200.0 * 1e-9;
  return from_entries(std::move(entries), std::move(binding), Provenance::Paper,
                      policy_overhead, shared_head);
}

CostTable CostTable::from_entries(std::vector<CostEntry> entries,
                                  std::vector<std::pair<std::string, int>> level_binding,
                                  Provenance provenance, double policy_overhead_gflops,
                                  double shared_head_gflops) {
  CostTable table;
  std::unordered_set<std::string> seen;
  for (const auto& entry : entries) {
    if (entry.network.empty() || is_reserved(entry.network)) {
      throw std::invalid_argument("cost table: invalid network name '" + entry.network + "'");
    }
    if (entry.resolution <= 0) {
      throw std::invalid_argument("cost table: non-positive resolution for " + entry.network);
    }
    if (entry.gflops < 0.0) {
      throw std::invalid_argument("cost table: negative cost for " + entry.network);
    }
    std::string key = entry.network + "@" + std::to_string(entry.resolution);
    if (!seen.insert(key).second) {
      throw std::invalid_argument("cost table: duplicate entry " + key);
    }
  }
  if (policy_overhead_gflops < 0.0 || shared_head_gflops < 0.0) {
    throw std::invalid_argument("cost table: negative overhead");
  }
  table.entries_ = std::move(entries);
  table.provenance_ = provenance;
  table.policy_overhead_ = policy_overhead_gflops;
  table.shared_head_ = shared_head_gflops;
  table.level_binding_ = std::move(level_binding);

  double prev = 0.0;
  for (std::size_t level = 0; level < table.level_binding_.size(); ++level) {
    const auto& [network, resolution] = table.level_binding_[level];
    double cost = table.lookup(network, resolution);
    if (level > 0 && cost >= prev) {
      throw std::invalid_argument("cost table: level costs must strictly decrease down the ladder");
    }
    if (level > 0 && resolution >= table.level_binding_[level - 1].second) {
      throw std::invalid_argument("cost table: level resolutions must strictly decrease");
    }
    prev = cost;
  }
  return table;
}

double CostTable::lookup(const std::string& network, int resolution) const {
  for (const auto& entry : entries_) {
    if (entry.network == network && entry.resolution == resolution) {
      return entry.gflops;
    }
  }
  throw std::out_of_range("cost table: no entry for " + network + "@" +
                          std::to_string(resolution));
}

double CostTable::level_cost(int level) const {
  if (level < 0 || level >= level_count()) {
    throw std::out_of_range("cost table: no binding for level " + std::to_string(level));
  }
  const auto& [network, resolution] = level_binding_[static_cast<std::size_t>(level)];
  return lookup(network, resolution);
}

void CostTable::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cost table: cannot open " + path + " for writing");
  }
  out << "# cost-table v1 "
      << (provenance_ == Provenance::Paper ? "paper" : "analytic") << "\n";
  out << "network,resolution,gflops\n";
  // Binding rows first, in level order; the loader relies on first-per-resolution.
  std::unordered_set<std::string> bound;
  for (const auto& [network, resolution] : level_binding_) {
    out << network << "," << resolution << "," << lookup(network, resolution) << "\n";
    bound.insert(network + "@" + std::to_string(resolution));
  }
  for (const auto& entry : entries_) {
    std::string key = entry.network + "@" + std::to_string(entry.resolution);
    if (!bound.count(key)) {
      out << entry.network << "," << entry.resolution << "," << entry.gflops << "\n";
    }
  }
  int lowest_res = level_binding_.empty() ? 0 : level_binding_.back().second;
  out << kPolicyRow << "," << lowest_res << "," << policy_overhead_ << "\n";
  out << kSharedHeadRow << "," << lowest_res << "," << shared_head_ << "\n";
  if (!out) {
    throw std::runtime_error("cost table: write to " + path + " failed");
  }
}

CostTable CostTable::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cost table: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line.rfind("# cost-table v1", 0) != 0) {
    throw std::runtime_error("cost table: " + path + " missing version line");
  }
  Provenance provenance = Provenance::Analytic;
  if (line.find("paper") != std::string::npos) {
    provenance = Provenance::Paper;
  }
  if (!std::getline(in, line) || line != "network,resolution,gflops") {
    throw std::runtime_error("cost table: " + path + " has unexpected header");
  }

  std::vector<CostEntry> entries;
  double policy_overhead = 0.0;
  double shared_head = 0.0;
  std::vector<std::pair<std::string, int>> binding;
  std::unordered_set<int> bound_resolutions;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::istringstream row(line);
    std::string network, res_str, gflops_str;
    if (!std::getline(row, network, ',') || !std::getline(row, res_str, ',') ||
        !std::getline(row, gflops_str)) {
      throw std::runtime_error("cost table: " + path + " line " + std::to_string(line_no) +
                               " is malformed");
    }
    int resolution = std::stoi(res_str);
    double gflops = std::stod(gflops_str);
    if (network == kPolicyRow) {
      policy_overhead = gflops;
    } else if (network == kSharedHeadRow) {
      shared_head = gflops;
    } else {
      entries.push_back({network, resolution, gflops});
      // First entry per resolution defines the ladder binding.
      if (bound_resolutions.insert(resolution).second) {
        binding.emplace_back(network, resolution);
      }
    }
  }
  return from_entries(std::move(entries), std::move(binding), provenance, policy_overhead,
                      shared_head);
}

double flops_of_action(const PolicyAction& action, const CostTable& table) {
  if (action.is_skip()) {
    return 0.0;
  }
  return table.level_cost(action.level);
}

Tensor expected_flops(const std::vector<Tensor>& soft_policies, const CostTable& table,
                      const ActionSpace& space, int total_frames) {
  if (total_frames <= 0) {
    throw std::invalid_argument("expected_flops: total_frames must be positive");
  }
  std::vector<double> costs(static_cast<std::size_t>(space.size()));
  for (int a = 0; a < space.size(); ++a) {
    costs[static_cast<std::size_t>(a)] = flops_of_action(space.decode(a), table);
  }
  Tensor cost_row = Tensor::from_values({1, space.size()}, costs);
  Tensor acc = Tensor::scalar(0.0);
  for (const auto& pi : soft_policies) {
    if (pi.numel() != space.size()) {
      throw std::invalid_argument("expected_flops: policy size does not match action space");
    }
    acc = add(acc, select(matvec(cost_row, pi), 0));
  }
  return scale(acc, 1.0 / static_cast<double>(total_frames));
}

}  // namespace adares

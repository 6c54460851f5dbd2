#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "adares/actions.hpp"
#include "adares/tensor.hpp"

namespace adares {

// ---- analytic per-layer accounting ----
// Multiply-accumulates count as 2 FLOPs; pooling and activations count as
// 1 op per output element.

struct ConvCost {
  int kernel = 0;
  int in_ch = 0;
  int out_ch = 0;
  int out_h = 0;
  int out_w = 0;
};

struct LinearCost {
  int d_in = 0;
  int d_out = 0;
};

struct ElementwiseCost {
  std::int64_t out_elems = 0;
};

using LayerCost = std::variant<ConvCost, LinearCost, ElementwiseCost>;

double analytic_flops(const std::vector<LayerCost>& layers);

// ---- cost lookup table ----

struct CostEntry {
  std::string network;
  int resolution = 0;
  double gflops = 0.0;
};

// Maps (network, resolution) to GFLOPs and binds one network to each
// resolution level. Skip actions are absent by definition and cost 0.
// Immutable after construction; never mix analytic and published entries.
class CostTable {
 public:
  enum class Provenance { Analytic, Paper };

  // The published lookup table, verbatim, with the ResNet-family binding:
  // levels 0..3 -> ResNet-50@224, ResNet-34@168, ResNet-18@112, MobileNet-v2@84.
  static CostTable paper();

  static CostTable from_entries(std::vector<CostEntry> entries,
                                std::vector<std::pair<std::string, int>> level_binding,
                                Provenance provenance,
                                double policy_overhead_gflops,
                                double shared_head_gflops);

  double lookup(const std::string& network, int resolution) const;
  // Cost of processing one frame at a resolution level.
  double level_cost(int level) const;
  int level_count() const { return static_cast<int>(level_binding_.size()); }

  Provenance provenance() const { return provenance_; }
  const std::vector<CostEntry>& entries() const { return entries_; }
  const std::vector<std::pair<std::string, int>>& level_binding() const { return level_binding_; }

  // Full-accounting constants: the decision pathway charged once per observed
  // frame, and the incremental head cost of the shared lowest-resolution
  // prediction (its feature extractor is already paid for by the policy).
  double policy_overhead_gflops() const { return policy_overhead_; }
  double shared_head_gflops() const { return shared_head_; }

  void save_csv(const std::string& path) const;
  // Parses the versioned CSV written by save_csv (or shipped in data/).
  // The level binding is reconstructed from the network names.
  static CostTable load_csv(const std::string& path);

 private:
  std::vector<CostEntry> entries_;
  std::vector<std::pair<std::string, int>> level_binding_;
  Provenance provenance_ = Provenance::Analytic;
  double policy_overhead_ = 0.0;
  double shared_head_ = 0.0;
};

// FLOPS over the action space: table cost for resolution choices, 0 for skips.
double flops_of_action(const PolicyAction& action, const CostTable& table);

enum class Accounting {
  Paper,  // backbone cost of executed actions only
  Full    // additionally charges the policy pathway per observed frame
};

struct CostReport {
  double gflops_per_video = 0.0;
  double gflops_per_frame = 0.0;  // per-video cost divided by T
  std::vector<double> usage;      // per-action frame attribution, sums to 1
};

// Differentiable per-frame cost expectation: sum_t <pi_t, costs> / total_frames.
// Soft distributions exist only for observed frames; skipped frames contribute 0.
Tensor expected_flops(const std::vector<Tensor>& soft_policies, const CostTable& table,
                      const ActionSpace& space, int total_frames);

}  // namespace adares

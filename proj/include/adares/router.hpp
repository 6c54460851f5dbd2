#pragma once

#include <string>
#include <vector>

#include "adares/cost_model.hpp"
#include "adares/gumbel.hpp"
#include "adares/model.hpp"
#include "adares/rng.hpp"
#include "adares/tensor.hpp"

namespace adares {

enum class RoutingMode {
  Learned,           // Gumbel-sampled actions, straight-through gated logits
  Greedy,            // argmax actions, no graph recording needed
  RandomResolution,  // uniform random level, never skips (warm-up routing)
  RandomAll,         // uniform random over the full action space
  Forced,            // caller-supplied action per decision point
  SampledStochastic  // actions drawn from the policy distribution, log-probs kept
};

struct RouteOptions {
  RoutingMode mode = RoutingMode::Greedy;
  double tau = 1.0;                          // Learned mode temperature
  Rng* rng = nullptr;                        // stochastic modes
  const std::vector<int>* forced = nullptr;  // Forced mode, indexed by decision count
  bool record_soft = true;                   // keep per-decision soft distributions
};

struct FrameRecord {
  int t = 0;
  bool observed = false;  // the policy ran on this frame
  int action = -1;        // chosen action index, observed frames only
  bool executed = false;  // a classifier produced logits for this frame
  int level = -1;         // executed resolution level
};

struct PolicyTrace {
  int video_id = -1;
  int label = -1;
  std::vector<FrameRecord> frames;
  int decisions = 0;  // observed frame count
  bool used_fallback = false;
  int predicted = -1;     // filled in by evaluation
  double gflops = 0.0;    // per-video cost under the active table and accounting
};

struct RouteResult {
  Tensor video_logits;                   // [num_classes]
  std::vector<Tensor> soft_policies;     // per decision; Learned with record_soft
  std::vector<Tensor> log_prob_actions;  // per decision; SampledStochastic only
  PolicyTrace trace;
  int executed_frames = 0;
};

// Runs the decision loop over one video (frames are [1,C,base,base] tensors).
// Observed frames update the recurrent state and choose an action; skip
// actions cover the current frame plus the following count-1 frames, which
// the policy never sees. Video logits average the executed frames'
// predictions; a video with no executed frame falls back to the shared
// lowest-resolution classifier on the first frame.
RouteResult run_video(const Model& model, const std::vector<Tensor>& frames,
                      const RouteOptions& options);

// Cost of one routed video under the given table. Paper accounting charges
// executed classifiers only. Full accounting additionally charges the
// decision pathway per observed frame, and replaces the lowest level's
// classifier cost by its head-only increment (its features are shared with
// the policy). Usage attributes every frame to the action that consumed it.
CostReport video_cost(const PolicyTrace& trace, const CostTable& table,
                      const ActionSpace& space, Accounting accounting);

// Human-readable action name, e.g. "res32" or "skip2".
std::string action_name(const PolicyAction& action, const ResolutionLadder& ladder);

// One JSON object per video: id, label, prediction, cost, per-frame records.
void write_trace_jsonl(const std::vector<PolicyTrace>& traces, const ActionSpace& space,
                       const ResolutionLadder& ladder, const std::string& path);

}  // namespace adares

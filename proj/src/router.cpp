#include "adares/router.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace adares {
namespace {

int argmax_values(const std::vector<double>& values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  return best;
}

// Classifier logits for one resolution level; the lowest level reuses the
// policy's features instead of re-running its conv stack.
Tensor level_logits(const Model& model, const Tensor& frame, int level,
                    const PolicyStepOutput& step) {
  const ResolutionLadder& ladder = model.config.ladder;
  if (level == ladder.levels() - 1) {
    return head_logits(model.policy.phi, step.features);
  }
  Tensor view = resize_frame(frame, ladder, level);
  return backbone_logits(model.backbone_specs[static_cast<std::size_t>(level)],
                         model.backbones[static_cast<std::size_t>(level)], view);
}

void check_options(const RouteOptions& options) {
  switch (options.mode) {
    case RoutingMode::Learned:
    case RoutingMode::RandomResolution:
    case RoutingMode::RandomAll:
    case RoutingMode::SampledStochastic:
      if (options.rng == nullptr) {
        throw std::invalid_argument("run_video: stochastic routing mode needs an rng");
      }
      break;
    case RoutingMode::Forced:
      if (options.forced == nullptr) {
        throw std::invalid_argument("run_video: forced routing needs an action sequence");
      }
      break;
    case RoutingMode::Greedy:
      break;
  }
}

}  // namespace

RouteResult run_video(const Model& model, const std::vector<Tensor>& frames,
                      const RouteOptions& options) {
  if (frames.empty()) {
    throw std::invalid_argument("run_video: empty video");
  }
  check_options(options);

  const ActionSpace space = model.config.action_space();
  const ResolutionLadder& ladder = model.config.ladder;
  const PolicySpec pspec = model.config.policy_spec();
  const int lowest = ladder.levels() - 1;
  const int total_frames = static_cast<int>(frames.size());

  RouteResult result;
  result.trace.frames.reserve(frames.size());
  PolicyState state = initial_policy_state(pspec);
  Tensor logits_sum;
  Tensor first_features;  // fallback input when every frame is skipped

  for (int t = 0; t < total_frames; ++t) {
    FrameRecord rec;
    rec.t = t;
    if (state.pending_skips > 0) {
      --state.pending_skips;
      result.trace.frames.push_back(rec);
      continue;
    }
    rec.observed = true;
    Tensor low = resize_frame(frames[static_cast<std::size_t>(t)], ladder, lowest);
    PolicyStepOutput step = policy_step(pspec, model.policy, low, state);
    state = step.next_state;
    int decision_index = result.trace.decisions++;
    if (decision_index == 0) {
      first_features = step.features;
    }

    int action_index = 0;
    Tensor st_gates;
    bool blended = false;
    switch (options.mode) {
      case RoutingMode::Learned: {
        Tensor log_probs = log_softmax(step.logits);
        GumbelSample sample = gumbel_sample(log_probs, *options.rng, options.tau);
        action_index = sample.hard_index;
        if (options.record_soft) {
          result.soft_policies.push_back(sample.soft);
        }
        st_gates = straight_through(sample);
        blended = true;
        break;
      }
      case RoutingMode::Greedy:
        action_index = argmax_values(step.logits.values());
        break;
      case RoutingMode::RandomResolution:
        action_index = options.rng->uniform_int(ladder.levels());
        break;
      case RoutingMode::RandomAll:
        action_index = options.rng->uniform_int(space.size());
        break;
      case RoutingMode::Forced: {
        if (decision_index >= static_cast<int>(options.forced->size())) {
          throw std::out_of_range("run_video: forced action sequence exhausted at decision " +
                                  std::to_string(decision_index));
        }
        action_index = (*options.forced)[static_cast<std::size_t>(decision_index)];
        break;
      }
      case RoutingMode::SampledStochastic: {
        Tensor log_probs = log_softmax(step.logits);
        const auto& lp = log_probs.values();
        double u = options.rng->uniform();
        double cum = 0.0;
        action_index = space.size() - 1;
        for (int i = 0; i < space.size(); ++i) {
          cum += std::exp(lp[static_cast<std::size_t>(i)]);
          if (u < cum) {
            action_index = i;
            break;
          }
        }
        result.log_prob_actions.push_back(select(log_probs, action_index));
        break;
      }
    }

    rec.action = action_index;
    PolicyAction action = space.decode(action_index);
    if (action.is_skip()) {
      state.pending_skips = action.skip_count - 1;
    } else {
      rec.executed = true;
      rec.level = action.level;
    }
    if (blended) {
      // Straight-through blend: forward equals the sampled branch alone (the
      // other gates are exactly zero), but the soft backward pass sees every
      // resolution's logits, so the policy gets per-action counterfactuals.
      for (int level = 0; level < ladder.levels(); ++level) {
        Tensor contribution = level_logits(model, frames[static_cast<std::size_t>(t)], level, step);
        contribution = scalar_mul(select(st_gates, level), contribution);
        logits_sum = logits_sum.defined() ? add(logits_sum, contribution) : contribution;
      }
      if (rec.executed) {
        ++result.executed_frames;
      }
    } else if (rec.executed) {
      Tensor contribution =
          level_logits(model, frames[static_cast<std::size_t>(t)], action.level, step);
      logits_sum = logits_sum.defined() ? add(logits_sum, contribution) : contribution;
      ++result.executed_frames;
    }
    result.trace.frames.push_back(rec);
  }

  if (result.executed_frames > 0) {
    result.video_logits = scale(logits_sum, 1.0 / result.executed_frames);
  } else {
    // All frames skipped: predict from the first frame's shared classifier.
    result.video_logits = head_logits(model.policy.phi, first_features);
    result.trace.used_fallback = true;
  }
  return result;
}

CostReport video_cost(const PolicyTrace& trace, const CostTable& table,
                      const ActionSpace& space, Accounting accounting) {
  const int total_frames = static_cast<int>(trace.frames.size());
  if (total_frames == 0) {
    throw std::invalid_argument("video_cost: empty trace");
  }
  const int lowest = space.levels - 1;
  CostReport report;
  report.usage.assign(static_cast<std::size_t>(space.size()), 0.0);
  double total = 0.0;
  for (const auto& rec : trace.frames) {
    if (!rec.observed) {
      continue;  // covered frames are attributed to their skip decision
    }
    PolicyAction action = space.decode(rec.action);
    if (accounting == Accounting::Full) {
      total += table.policy_overhead_gflops();
    }
    if (action.is_skip()) {
      int covered = std::min(action.skip_count, total_frames - rec.t);
      report.usage[static_cast<std::size_t>(rec.action)] += covered;
    } else {
      report.usage[static_cast<std::size_t>(rec.action)] += 1.0;
      if (accounting == Accounting::Full && action.level == lowest) {
        total += table.shared_head_gflops();
      } else {
        total += table.level_cost(action.level);
      }
    }
  }
  if (trace.used_fallback) {
    total += accounting == Accounting::Full ? table.shared_head_gflops()
                                            : table.level_cost(lowest);
  }
  for (auto& u : report.usage) {
    u /= total_frames;
  }
  report.gflops_per_video = total;
  report.gflops_per_frame = total / total_frames;
  return report;
}

std::string action_name(const PolicyAction& action, const ResolutionLadder& ladder) {
  if (action.is_skip()) {
    return "skip" + std::to_string(action.skip_count);
  }
  return "res" + std::to_string(ladder.size(action.level));
}

void write_trace_jsonl(const std::vector<PolicyTrace>& traces, const ActionSpace& space,
                       const ResolutionLadder& ladder, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("trace: cannot open " + path + " for writing");
  }
  for (const auto& trace : traces) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& rec : trace.frames) {
      nlohmann::json f{{"t", rec.t}, {"observed", rec.observed}};
      if (rec.observed) {
        f["action"] = action_name(space.decode(rec.action), ladder);
        f["executed"] = rec.executed;
        if (rec.executed) {
          f["level"] = rec.level;
        }
      }
      frames.push_back(std::move(f));
    }
    nlohmann::json line{{"video", trace.video_id}, {"label", trace.label},
                        {"pred", trace.predicted},  {"gflops", trace.gflops},
                        {"fallback", trace.used_fallback}, {"frames", std::move(frames)}};
    out << line.dump() << "\n";
  }
  if (!out) {
    throw std::runtime_error("trace: write to " + path + " failed");
  }
}

}  // namespace adares

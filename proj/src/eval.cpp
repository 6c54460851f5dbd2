#include "adares/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

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

std::vector<double> stable_softmax(const std::vector<double>& logits) {
  double max_v = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_v);
    total += probs[i];
  }
  for (auto& p : probs) {
    p /= total;
  }
  return probs;
}

double aggregator_step_gflops(const ModelConfig& config, int feature_dim) {
  std::vector<LayerCost> layers;
  int k = config.aggregator_hidden;
  for (int gate = 0; gate < 4; ++gate) {
    layers.push_back(LinearCost{feature_dim, k});
    layers.push_back(LinearCost{k, k});
    layers.push_back(ElementwiseCost{2L * k});
  }
  layers.push_back(ElementwiseCost{6L * k});
  layers.push_back(LinearCost{k, config.num_classes});
  return analytic_flops(layers) * 1e-9;
}

// Per-frame average of per-level logits over every resolution level.
Tensor multiscale_video_logits(const Model& model, const std::vector<Tensor>& frames) {
  const ResolutionLadder& ladder = model.config.ladder;
  const int levels = ladder.levels();
  const PolicySpec pspec = model.config.policy_spec();
  Tensor total;
  for (const auto& frame : frames) {
    for (int level = 0; level < levels; ++level) {
      Tensor view = resize_frame(frame, ladder, level);
      Tensor logits;
      if (level == levels - 1) {
        logits = head_logits(model.policy.phi, backbone_features(pspec.phi, model.policy.phi, view));
      } else {
        logits = backbone_logits(model.backbone_specs[static_cast<std::size_t>(level)],
                                 model.backbones[static_cast<std::size_t>(level)], view);
      }
      total = total.defined() ? add(total, logits) : logits;
    }
  }
  return scale(total, 1.0 / (static_cast<double>(frames.size()) * levels));
}

}  // namespace

double mean_average_precision(const std::vector<std::vector<double>>& scores,
                              const std::vector<int>& labels, int num_classes) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("mean_average_precision: scores/labels size mismatch");
  }
  const int n = static_cast<int>(scores.size());
  double ap_sum = 0.0;
  int classes_with_positives = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return scores[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] >
             scores[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
    });
    int positives = 0;
    double ap = 0.0;
    for (int k = 0; k < n; ++k) {
      if (labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] == c) {
        ++positives;
        ap += static_cast<double>(positives) / (k + 1);
      }
    }
    if (positives > 0) {
      ap_sum += ap / positives;
      ++classes_with_positives;
    }
  }
  return classes_with_positives > 0 ? ap_sum / classes_with_positives : 0.0;
}

EvalResult evaluate(const Model& model, const std::vector<VideoSample>& videos,
                    const CostTable& table, const EvalOptions& options) {
  if (videos.empty()) {
    throw std::invalid_argument("evaluate: empty video set");
  }
  const ActionSpace space = model.config.action_space();
  const ResolutionLadder& ladder = model.config.ladder;
  const int levels = ladder.levels();
  Rng root(options.seed);

  EvalResult out;
  UsageStats usage(space.size());
  std::vector<std::vector<double>> scores;
  std::vector<int> labels;
  int correct = 0;
  double sum_gf = 0.0, sum_gv = 0.0, sum_gf_full = 0.0, sum_gv_full = 0.0;

  for (const auto& video : videos) {
    Tensor logits;
    PolicyTrace trace;
    double gv_paper = 0.0;
    double gv_full = 0.0;
    const int frames = static_cast<int>(video.frames.size());

    switch (options.routing) {
      case EvalRouting::MultiScale: {
        logits = multiscale_video_logits(model, video.frames);
        trace.decisions = 0;
        double per_frame = 0.0;
        for (int level = 0; level < levels; ++level) {
          per_frame += table.level_cost(level);
          usage.hard[static_cast<std::size_t>(level)] += frames / static_cast<double>(levels);
        }
        usage.frames += frames;
        gv_paper = gv_full = per_frame * frames;
        break;
      }
      case EvalRouting::Aggregator: {
        logits = aggregator_video_logits(model, video.frames);
        trace.decisions = frames;
        for (int t = 0; t < frames; ++t) {
          trace.frames.push_back({t, true, 0, true, 0});
        }
        usage.add_trace(trace, space);
        double agg = aggregator_step_gflops(model.config,
                                            model.backbone_specs.front().feature_dim()) *
                     frames;
        gv_paper = video_cost(trace, table, space, Accounting::Paper).gflops_per_video + agg;
        gv_full = video_cost(trace, table, space, Accounting::Full).gflops_per_video + agg;
        break;
      }
      default: {
        RouteOptions ro;
        Rng video_rng = root.fork(static_cast<std::uint64_t>(video.id));
        std::vector<int> forced;
        if (options.routing == EvalRouting::Greedy) {
          ro.mode = RoutingMode::Greedy;
        } else if (options.routing == EvalRouting::Highest) {
          ro.mode = RoutingMode::Forced;
          forced.assign(static_cast<std::size_t>(frames), 0);
          ro.forced = &forced;
        } else {
          ro.mode = RoutingMode::RandomAll;
          ro.rng = &video_rng;
        }
        ro.record_soft = false;
        RouteResult result = run_video(model, video.frames, ro);
        logits = result.video_logits;
        trace = std::move(result.trace);
        usage.add_trace(trace, space);
        gv_paper = video_cost(trace, table, space, Accounting::Paper).gflops_per_video;
        gv_full = video_cost(trace, table, space, Accounting::Full).gflops_per_video;
        break;
      }
    }

    trace.video_id = video.id;
    trace.label = video.label;
    trace.predicted = argmax_values(logits.values());
    trace.gflops = gv_paper;
    if (trace.predicted == video.label) {
      ++correct;
    }
    scores.push_back(stable_softmax(logits.values()));
    labels.push_back(video.label);
    sum_gv += gv_paper;
    sum_gf += gv_paper / frames;
    sum_gv_full += gv_full;
    sum_gf_full += gv_full / frames;
    out.traces.push_back(std::move(trace));
  }

  const double n = static_cast<double>(videos.size());
  out.metrics.accuracy = correct / n;
  out.metrics.mean_ap = mean_average_precision(scores, labels, model.config.num_classes);
  out.metrics.gflops_per_video = sum_gv / n;
  out.metrics.gflops_per_frame = sum_gf / n;
  out.metrics.gflops_per_video_full = sum_gv_full / n;
  out.metrics.gflops_per_frame_full = sum_gf_full / n;
  out.metrics.usage = usage.hard_freq();
  out.metrics.videos = static_cast<int>(videos.size());
  return out;
}

std::vector<double> policy_histogram(const std::vector<PolicyTrace>& traces,
                                     const ActionSpace& space) {
  UsageStats usage(space.size());
  for (const auto& trace : traces) {
    usage.add_trace(trace, space);
  }
  return usage.hard_freq();
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Uniform: return "UNIFORM";
    case BaselineKind::Lstm: return "LSTM";
    case BaselineKind::Random: return "RANDOM";
    case BaselineKind::MultiScale: return "MULTISCALE";
    case BaselineKind::ArNet: return "ARNET";
    case BaselineKind::Reinforce: return "REINFORCE";
  }
  return "UNKNOWN";
}

BaselineResult run_baseline(BaselineKind kind, const Dataset& dataset,
                            const ModelConfig& config, const TrainOptions& options,
                            const CostTable& eval_table) {
  ModelConfig cfg = config;
  cfg.with_aggregator = kind == BaselineKind::Lstm;

  TrainMethod method = TrainMethod::Gumbel;
  EvalRouting routing = EvalRouting::Greedy;
  switch (kind) {
    case BaselineKind::Uniform:
      method = TrainMethod::ForcedHighest;
      routing = EvalRouting::Highest;
      break;
    case BaselineKind::Lstm:
      method = TrainMethod::Aggregator;
      routing = EvalRouting::Aggregator;
      break;
    case BaselineKind::Random:
      method = TrainMethod::RandomAll;
      routing = EvalRouting::RandomAll;
      break;
    case BaselineKind::MultiScale:
      // No decisions to learn; random-resolution routing feeds every level
      // during training, then all levels run at evaluation.
      method = TrainMethod::RandomResolution;
      routing = EvalRouting::MultiScale;
      break;
    case BaselineKind::ArNet:
      method = TrainMethod::Gumbel;
      routing = EvalRouting::Greedy;
      break;
    case BaselineKind::Reinforce:
      method = TrainMethod::Reinforce;
      routing = EvalRouting::Greedy;
      break;
  }

  Rng init_rng(options.seed);
  BaselineResult result;
  result.kind = kind;
  result.model = Model::init(cfg, init_rng);
  result.log = train_model(result.model, dataset.train, options, method);
  EvalOptions eo;
  eo.routing = routing;
  eo.seed = options.seed ^ 0xE7A1ULL;  // eval-time draws independent of training
  EvalResult er = evaluate(result.model, dataset.test, eval_table, eo);
  result.metrics = std::move(er.metrics);
  result.traces = std::move(er.traces);
  return result;
}

std::vector<CurvePoint> accuracy_cost_curve(const Dataset& dataset, const ModelConfig& config,
                                            const TrainOptions& base_options,
                                            const CostTable& eval_table,
                                            const std::vector<double>& alphas) {
  std::vector<CurvePoint> curve;
  for (double alpha : alphas) {
    TrainOptions options = base_options;
    options.weights.alpha = alpha;
    BaselineResult r = run_baseline(BaselineKind::ArNet, dataset, config, options, eval_table);
    curve.push_back({alpha, std::move(r.metrics)});
  }
  return curve;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("curve: cannot open " + path + " for writing");
  }
  out << "alpha,acc,map,gflops_f,gflops_v\n";
  out << std::setprecision(12);
  for (const auto& point : curve) {
    out << point.alpha << ',' << point.metrics.accuracy << ',' << point.metrics.mean_ap << ','
        << point.metrics.gflops_per_frame << ',' << point.metrics.gflops_per_video << "\n";
  }
  if (!out) {
    throw std::runtime_error("curve: write to " + path + " failed");
  }
}

RlComparison compare_rl(const Dataset& dataset, const ModelConfig& config,
                        const TrainOptions& options, const CostTable& eval_table) {
  RlComparison comparison;
  comparison.gumbel = run_baseline(BaselineKind::ArNet, dataset, config, options, eval_table);
  comparison.reinforce =
      run_baseline(BaselineKind::Reinforce, dataset, config, options, eval_table);
  return comparison;
}

}  // namespace adares

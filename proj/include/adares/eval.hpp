#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adares/cost_model.hpp"
#include "adares/data_synth.hpp"
#include "adares/model.hpp"
#include "adares/router.hpp"
#include "adares/training.hpp"

namespace adares {

struct Metrics {
  double accuracy = 0.0;
  double mean_ap = 0.0;              // mean one-vs-rest average precision
  double gflops_per_frame = 0.0;     // executed-classifier accounting
  double gflops_per_video = 0.0;
  double gflops_per_frame_full = 0.0;  // + decision pathway per observed frame
  double gflops_per_video_full = 0.0;
  std::vector<double> usage;  // frame-attributed action frequencies
  int videos = 0;
};

// How predictions are produced during evaluation.
enum class EvalRouting {
  Greedy,      // learned policy, argmax actions
  Highest,     // every frame at the highest resolution
  RandomAll,   // uniform random action per decision
  MultiScale,  // every frame at every resolution, logits averaged
  Aggregator   // highest resolution + recurrent label head
};

struct EvalOptions {
  EvalRouting routing = EvalRouting::Greedy;
  std::uint64_t seed = 0;  // RandomAll only
};

struct EvalResult {
  Metrics metrics;
  std::vector<PolicyTrace> traces;  // predicted label and cost filled in
};

// mean over classes of average precision, scoring videos by softmax(class).
// scores: [video][class], labels: [video].
double mean_average_precision(const std::vector<std::vector<double>>& scores,
                              const std::vector<int>& labels, int num_classes);

EvalResult evaluate(const Model& model, const std::vector<VideoSample>& videos,
                    const CostTable& table, const EvalOptions& options);

// Aggregate action usage over a set of routed videos.
std::vector<double> policy_histogram(const std::vector<PolicyTrace>& traces,
                                     const ActionSpace& space);

enum class BaselineKind { Uniform, Lstm, Random, MultiScale, ArNet, Reinforce };

std::string baseline_name(BaselineKind kind);

struct BaselineResult {
  BaselineKind kind = BaselineKind::ArNet;
  Model model;
  std::vector<EpochLog> log;
  Metrics metrics;  // test split
  std::vector<PolicyTrace> traces;
};

// Trains the given variant on the train split (same schedule and seed
// handling for every kind) and evaluates it on the test split.
BaselineResult run_baseline(BaselineKind kind, const Dataset& dataset,
                            const ModelConfig& config, const TrainOptions& options,
                            const CostTable& eval_table);

// Accuracy/cost trade-off: one full training per efficiency weight.
struct CurvePoint {
  double alpha = 0.0;
  Metrics metrics;
};

std::vector<CurvePoint> accuracy_cost_curve(const Dataset& dataset, const ModelConfig& config,
                                            const TrainOptions& base_options,
                                            const CostTable& eval_table,
                                            const std::vector<double>& alphas);
void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

// Relaxed-sampling training vs score-function policy gradients, same data,
// schedule, and seed.
struct RlComparison {
  BaselineResult gumbel;
  BaselineResult reinforce;
};

RlComparison compare_rl(const Dataset& dataset, const ModelConfig& config,
                        const TrainOptions& options, const CostTable& eval_table);

}  // namespace adares

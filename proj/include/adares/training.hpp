#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adares/cost_model.hpp"
#include "adares/data_synth.hpp"
#include "adares/gumbel.hpp"
#include "adares/model.hpp"
#include "adares/router.hpp"
#include "adares/tensor.hpp"

namespace adares {

struct LossWeights {
  double alpha = 0.1;  // efficiency weight; accuracy gets 1 - alpha
  double beta = 0.3;   // uniform-usage weight
};

// Epoch counts are nominal; each stage runs max(1, round(epochs * epoch_scale))
// epochs. The temperature anneals over nominal epoch positions, so scaled
// runs traverse the same trajectory in fewer steps.
struct StageSchedule {
  int warmup_epochs = 10;
  double warmup_lr = 0.02;
  int warmup_batch = 2;  // smoother steps; warm-up at batch 1 can oscillate
  int joint_epochs = 50;
  double joint_lr = 0.001;
  int joint_batch = 1;  // more policy updates per epoch
  int finetune_epochs = 50;
  double finetune_lr = 0.0005;
  int finetune_batch = 1;
  double momentum = 0.9;
  double max_grad_norm = 10.0;  // global-norm clip per step; <= 0 disables
  double epoch_scale = 1.0;
  TemperatureSchedule temperature;

  int scaled(int epochs) const;
  double tau_at(int scaled_epoch) const;  // maps back to the nominal position
};

// v <- momentum * v + g; p <- p - lr * v. Gradients are rescaled to a global
// l2 norm of max_grad_norm first (disabled when <= 0). Throws on non-finite
// gradients so a diverging run fails loudly instead of training on garbage.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, double lr, double momentum,
              double max_grad_norm = 0.0);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
  double max_grad_norm_;
};

// Per-action usage accounting. Hard counts attribute every frame to the
// decision that consumed it; soft sums accumulate relaxed distributions, one
// per decision.
struct UsageStats {
  std::vector<double> hard;
  std::vector<double> soft;
  double frames = 0.0;
  double decisions = 0.0;

  explicit UsageStats(int num_actions = 0)
      : hard(static_cast<std::size_t>(num_actions), 0.0),
        soft(static_cast<std::size_t>(num_actions), 0.0) {}

  void add_trace(const PolicyTrace& trace, const ActionSpace& space);
  void add_soft(const Tensor& pi);
  std::vector<double> hard_freq() const;
  std::vector<double> soft_freq() const;
};

// sum_a (freq_a - 1/K)^2 over hard frequencies.
double uniform_penalty(const std::vector<double>& freq);
// Differentiable version over summed soft distributions.
Tensor uniform_penalty_soft(const std::vector<Tensor>& soft_policies, int num_actions);

enum class TrainMethod {
  Gumbel,            // warm-up, relaxed-sampling joint stage, frozen-policy finetune
  Reinforce,         // joint stage uses score-function policy gradients instead
  ForcedHighest,     // every frame at the highest resolution
  RandomResolution,  // uniform random level per frame, no skips
  RandomAll,         // uniform random action per decision
  Aggregator         // highest resolution + recurrent label head
};

struct EpochLog {
  int epoch = 0;  // global index across stages
  std::string stage;
  double loss_acc = 0.0;
  double loss_flops = 0.0;
  double loss_uni = 0.0;
  double total = 0.0;
  double acc = 0.0;
  double gflops_f = 0.0;
  double gflops_v = 0.0;
  double tau = 0.0;
};

struct TrainOptions {
  LossWeights weights;
  StageSchedule schedule;
  CostTable cost_table = CostTable::paper();  // drives the efficiency loss
  Accounting accounting = Accounting::Paper;  // reported costs only
  std::uint64_t seed = 0;
  std::function<void(const EpochLog&)> on_epoch;  // optional progress hook
};

// Trains in place over three stages (classifier warm-up with random
// resolutions, joint policy + classifier training, classifier finetune with
// the decision pathway frozen). Baseline methods keep the same schedule and
// replace the routing. Returns one log row per epoch.
std::vector<EpochLog> train_model(Model& model, const std::vector<VideoSample>& videos,
                                  const TrainOptions& options, TrainMethod method);

void write_log_csv(const std::vector<EpochLog>& log, const std::string& path);

// Recurrent label head used by TrainMethod::Aggregator: highest-resolution
// features per frame, LSTM, per-step class logits, averaged.
Tensor aggregator_video_logits(const Model& model, const std::vector<Tensor>& frames);

}  // namespace adares

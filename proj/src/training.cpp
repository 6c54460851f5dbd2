#include "adares/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace adares {

int StageSchedule::scaled(int epochs) const {
  if (epochs <= 0) {
    return 0;
  }
  return std::max(1, static_cast<int>(std::lround(epochs * epoch_scale)));
}

double StageSchedule::tau_at(int scaled_epoch) const {
  double nominal = epoch_scale > 0.0 ? scaled_epoch / epoch_scale
                                     : static_cast<double>(scaled_epoch);
  return temperature.at(static_cast<int>(std::lround(nominal)));
}

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double lr, double momentum,
                         double max_grad_norm)
    : params_(std::move(params)), lr_(lr), momentum_(momentum), max_grad_norm_(max_grad_norm) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) {
    velocity_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
  }
}

void SgdMomentum::step() {
  double sq_norm = 0.0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& g = params_[i].grad();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j])) {
        throw std::runtime_error("sgd: non-finite gradient in parameter " + std::to_string(i));
      }
      sq_norm += g[j] * g[j];
    }
  }
  double scale = 1.0;
  if (max_grad_norm_ > 0.0 && sq_norm > max_grad_norm_ * max_grad_norm_) {
    scale = max_grad_norm_ / std::sqrt(sq_norm);
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const auto& g = p.grad();
    auto& v = velocity_[i];
    auto& values = p.mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      v[j] = momentum_ * v[j] + scale * g[j];
      values[j] -= lr_ * v[j];
    }
  }
}

void UsageStats::add_trace(const PolicyTrace& trace, const ActionSpace& space) {
  const int total = static_cast<int>(trace.frames.size());
  for (const auto& rec : trace.frames) {
    if (!rec.observed) {
      continue;
    }
    decisions += 1.0;
    PolicyAction action = space.decode(rec.action);
    double attributed = action.is_skip() ? std::min(action.skip_count, total - rec.t) : 1.0;
    hard[static_cast<std::size_t>(rec.action)] += attributed;
  }
  frames += total;
}

void UsageStats::add_soft(const Tensor& pi) {
  const auto& v = pi.values();
  if (v.size() != soft.size()) {
    throw std::invalid_argument("usage: soft distribution size mismatch");
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    soft[i] += v[i];
  }
}

std::vector<double> UsageStats::hard_freq() const {
  std::vector<double> freq(hard.size(), 0.0);
  if (frames > 0.0) {
    for (std::size_t i = 0; i < hard.size(); ++i) {
      freq[i] = hard[i] / frames;
    }
  }
  return freq;
}

std::vector<double> UsageStats::soft_freq() const {
  double total = std::accumulate(soft.begin(), soft.end(), 0.0);
  std::vector<double> freq(soft.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t i = 0; i < soft.size(); ++i) {
      freq[i] = soft[i] / total;
    }
  }
  return freq;
}

double uniform_penalty(const std::vector<double>& freq) {
  double target = 1.0 / static_cast<double>(freq.size());
  double total = 0.0;
  for (double f : freq) {
    total += (f - target) * (f - target);
  }
  return total;
}

Tensor uniform_penalty_soft(const std::vector<Tensor>& soft_policies, int num_actions) {
  if (soft_policies.empty()) {
    return Tensor::scalar(0.0);
  }
  Tensor acc = soft_policies.front();
  for (std::size_t i = 1; i < soft_policies.size(); ++i) {
    acc = add(acc, soft_policies[i]);
  }
  Tensor freq = scale(acc, 1.0 / static_cast<double>(soft_policies.size()));
  Tensor dev = add_scalar(freq, -1.0 / num_actions);
  return sum(mul(dev, dev));
}

Tensor aggregator_video_logits(const Model& model, const std::vector<Tensor>& frames) {
  if (!model.config.with_aggregator) {
    throw std::logic_error("aggregator_video_logits: model has no aggregator");
  }
  const BackboneSpec& spec = model.backbone_specs.front();
  const BackboneParams& params = model.backbones.front();
  Tensor h = Tensor::zeros({model.config.aggregator_hidden});
  Tensor c = Tensor::zeros({model.config.aggregator_hidden});
  Tensor logits_sum;
  for (const auto& frame : frames) {
    Tensor feat = backbone_features(spec, params, frame);
    std::tie(h, c) = lstm_step(feat, h, c, model.aggregator);
    Tensor step_logits = add(matvec(model.aggregator_head_weight, h),
                             model.aggregator_head_bias);
    logits_sum = logits_sum.defined() ? add(logits_sum, step_logits) : step_logits;
  }
  return scale(logits_sum, 1.0 / static_cast<double>(frames.size()));
}

namespace {

enum class StageRouting {
  RandomResolution,
  Learned,
  Greedy,
  ForcedHighest,
  RandomAll,
  Sampled,
  AggregatorForced
};

struct StagePlan {
  std::string name;
  int epochs = 0;
  double lr = 0.0;
  int batch = 1;
  StageRouting routing = StageRouting::Greedy;
  std::vector<Tensor> trainables;
  bool soft_losses = false;
  bool reinforce = false;
  bool anneal_tau = false;
};

Tensor sum_tensors(const std::vector<Tensor>& terms) {
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    acc = add(acc, terms[i]);
  }
  return acc;
}

int argmax_values(const std::vector<double>& values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  return best;
}

std::vector<Tensor> concat(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

std::vector<EpochLog> train_model(Model& model, const std::vector<VideoSample>& videos,
                                  const TrainOptions& options, TrainMethod method) {
  if (videos.empty()) {
    throw std::invalid_argument("train_model: empty training set");
  }
  if (options.schedule.warmup_batch <= 0 || options.schedule.joint_batch <= 0 ||
      options.schedule.finetune_batch <= 0) {
    throw std::invalid_argument("train_model: batch sizes must be positive");
  }
  if (method == TrainMethod::Aggregator && !model.config.with_aggregator) {
    throw std::invalid_argument("train_model: aggregator method needs an aggregator model");
  }

  const ActionSpace space = model.config.action_space();
  const int num_actions = space.size();
  const StageSchedule& schedule = options.schedule;
  const LossWeights& weights = options.weights;

  auto warmup_params = concat(model.classifier_parameters(), model.policy_feature_parameters());
  std::vector<StagePlan> stages;
  auto baseline_routing = [&](StageRouting routing) {
    stages.push_back({"warmup", schedule.scaled(schedule.warmup_epochs), schedule.warmup_lr,
                      schedule.warmup_batch, routing, warmup_params, false, false, false});
    stages.push_back({"joint", schedule.scaled(schedule.joint_epochs), schedule.joint_lr,
                      schedule.joint_batch, routing, model.parameters(), false, false, false});
    stages.push_back({"finetune", schedule.scaled(schedule.finetune_epochs),
                      schedule.finetune_lr, schedule.finetune_batch, routing,
                      model.classifier_parameters(), false, false, false});
  };
  switch (method) {
    case TrainMethod::Gumbel:
      stages.push_back({"warmup", schedule.scaled(schedule.warmup_epochs), schedule.warmup_lr,
                        schedule.warmup_batch, StageRouting::RandomResolution, warmup_params,
                        false, false, false});
      stages.push_back({"joint", schedule.scaled(schedule.joint_epochs), schedule.joint_lr,
                        schedule.joint_batch, StageRouting::Learned, model.parameters(), true,
                        false, true});
      stages.push_back({"finetune", schedule.scaled(schedule.finetune_epochs),
                        schedule.finetune_lr, schedule.finetune_batch, StageRouting::Greedy,
                        model.classifier_parameters(), false, false, false});
      break;
    case TrainMethod::Reinforce:
      stages.push_back({"warmup", schedule.scaled(schedule.warmup_epochs), schedule.warmup_lr,
                        schedule.warmup_batch, StageRouting::RandomResolution, warmup_params,
                        false, false, false});
      stages.push_back({"joint", schedule.scaled(schedule.joint_epochs), schedule.joint_lr,
                        schedule.joint_batch, StageRouting::Sampled, model.parameters(), false,
                        true, false});
      stages.push_back({"finetune", schedule.scaled(schedule.finetune_epochs),
                        schedule.finetune_lr, schedule.finetune_batch, StageRouting::Greedy,
                        model.classifier_parameters(), false, false, false});
      break;
    case TrainMethod::ForcedHighest:
      baseline_routing(StageRouting::ForcedHighest);
      break;
    case TrainMethod::RandomResolution:
      baseline_routing(StageRouting::RandomResolution);
      break;
    case TrainMethod::RandomAll:
      baseline_routing(StageRouting::RandomAll);
      break;
    case TrainMethod::Aggregator:
      baseline_routing(StageRouting::AggregatorForced);
      break;
  }

  Rng root(options.seed);
  std::vector<Tensor> all_params = model.parameters();
  std::vector<EpochLog> log;
  int global_epoch = 0;
  double current_tau = schedule.temperature.at(0);

  for (const auto& stage : stages) {
    SgdMomentum optimizer(stage.trainables, stage.lr, schedule.momentum,
                          schedule.max_grad_norm);
    double pg_baseline = 0.0;
    bool pg_baseline_init = false;

    for (int e = 0; e < stage.epochs; ++e, ++global_epoch) {
      if (stage.anneal_tau) {
        current_tau = schedule.tau_at(e);
      }

      std::vector<int> order(videos.size());
      std::iota(order.begin(), order.end(), 0);
      Rng shuffle_rng = root.fork(0x5000u + static_cast<std::uint64_t>(global_epoch));
      for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(shuffle_rng.uniform_int(i + 1))]);
      }
      Rng route_rng = root.fork(0xA000u + static_cast<std::uint64_t>(global_epoch));

      UsageStats usage(num_actions);
      double sum_ce = 0.0;
      double sum_soft_flops = 0.0;
      double sum_soft_uni = 0.0;
      int soft_batches = 0;
      int correct = 0;
      double sum_loss_gf = 0.0;  // efficiency-loss accounting (executed actions only)
      double sum_rep_gf = 0.0;
      double sum_rep_gv = 0.0;

      const std::size_t batch_sz = static_cast<std::size_t>(stage.batch);
      for (std::size_t start = 0; start < order.size(); start += batch_sz) {
        std::size_t end = std::min(order.size(), start + batch_sz);
        int batch = static_cast<int>(end - start);
        std::vector<Tensor> ce_terms;
        std::vector<Tensor> flops_terms;
        std::vector<Tensor> batch_soft;
        std::vector<std::pair<Tensor, double>> pg_terms;  // (sum log pi, reward)

        for (std::size_t k = start; k < end; ++k) {
          const VideoSample& video = videos[static_cast<std::size_t>(order[k])];
          Tensor video_logits;
          PolicyTrace trace;
          std::vector<Tensor> soft_policies;
          std::vector<Tensor> log_probs;

          if (stage.routing == StageRouting::AggregatorForced) {
            video_logits = aggregator_video_logits(model, video.frames);
            trace.video_id = video.id;
            trace.label = video.label;
            trace.decisions = static_cast<int>(video.frames.size());
            for (int t = 0; t < trace.decisions; ++t) {
              trace.frames.push_back({t, true, 0, true, 0});
            }
          } else {
            RouteOptions ro;
            std::vector<int> forced;
            switch (stage.routing) {
              case StageRouting::RandomResolution:
                ro.mode = RoutingMode::RandomResolution;
                ro.rng = &route_rng;
                break;
              case StageRouting::Learned:
                ro.mode = RoutingMode::Learned;
                ro.tau = current_tau;
                ro.rng = &route_rng;
                ro.record_soft = true;
                break;
              case StageRouting::Greedy:
                ro.mode = RoutingMode::Greedy;
                break;
              case StageRouting::ForcedHighest:
                ro.mode = RoutingMode::Forced;
                forced.assign(video.frames.size(), 0);
                ro.forced = &forced;
                break;
              case StageRouting::RandomAll:
                ro.mode = RoutingMode::RandomAll;
                ro.rng = &route_rng;
                break;
              case StageRouting::Sampled:
                ro.mode = RoutingMode::SampledStochastic;
                ro.rng = &route_rng;
                break;
              case StageRouting::AggregatorForced:
                break;
            }
            RouteResult result = run_video(model, video.frames, ro);
            video_logits = result.video_logits;
            trace = std::move(result.trace);
            trace.video_id = video.id;
            trace.label = video.label;
            soft_policies = std::move(result.soft_policies);
            log_probs = std::move(result.log_prob_actions);
          }

          Tensor ce = softmax_cross_entropy(video_logits, video.label);
          ce_terms.push_back(ce);
          sum_ce += ce.value();
          if (argmax_values(video_logits.values()) == video.label) {
            ++correct;
          }
          usage.add_trace(trace, space);
          CostReport loss_cost =
              video_cost(trace, options.cost_table, space, Accounting::Paper);
          sum_loss_gf += loss_cost.gflops_per_frame;
          if (options.accounting == Accounting::Paper) {
            sum_rep_gf += loss_cost.gflops_per_frame;
            sum_rep_gv += loss_cost.gflops_per_video;
          } else {
            CostReport rep =
                video_cost(trace, options.cost_table, space, options.accounting);
            sum_rep_gf += rep.gflops_per_frame;
            sum_rep_gv += rep.gflops_per_video;
          }

          if (stage.soft_losses) {
            flops_terms.push_back(expected_flops(soft_policies, options.cost_table, space,
                                                 static_cast<int>(video.frames.size())));
            for (const auto& pi : soft_policies) {
              usage.add_soft(pi);
              batch_soft.push_back(pi);
            }
          }
          if (stage.reinforce) {
            UsageStats video_usage(num_actions);
            video_usage.add_trace(trace, space);
            double reward = -((1.0 - weights.alpha) * ce.value() +
                              weights.alpha * loss_cost.gflops_per_frame +
                              weights.beta * uniform_penalty(video_usage.hard_freq()));
            pg_terms.emplace_back(sum_tensors(log_probs), reward);
          }
        }

        Tensor objective = scale(sum_tensors(ce_terms), (stage.soft_losses || stage.reinforce)
                                                            ? (1.0 - weights.alpha) / batch
                                                            : 1.0 / batch);
        if (stage.soft_losses) {
          Tensor flops_mean = scale(sum_tensors(flops_terms), 1.0 / batch);
          Tensor uni = uniform_penalty_soft(batch_soft, num_actions);
          sum_soft_flops += flops_mean.value() * batch;
          sum_soft_uni += uni.value();
          ++soft_batches;
          objective = add(objective, add(scale(flops_mean, weights.alpha),
                                         scale(uni, weights.beta)));
        }
        if (stage.reinforce) {
          double batch_reward = 0.0;
          for (const auto& [logp, reward] : pg_terms) {
            batch_reward += reward;
          }
          batch_reward /= batch;
          double baseline = pg_baseline_init ? pg_baseline : batch_reward;
          std::vector<Tensor> scored;
          for (const auto& [logp, reward] : pg_terms) {
            scored.push_back(scale(logp, -(reward - baseline)));
          }
          objective = add(objective, scale(sum_tensors(scored), 1.0 / batch));
          pg_baseline = pg_baseline_init ? 0.9 * pg_baseline + 0.1 * batch_reward
                                         : batch_reward;
          pg_baseline_init = true;
        }

        objective.backward();
        optimizer.step();
        for (auto& p : all_params) {
          p.zero_grad();
        }
      }

      const double n = static_cast<double>(videos.size());
      EpochLog row;
      row.epoch = global_epoch;
      row.stage = stage.name;
      row.loss_acc = sum_ce / n;
      row.loss_flops = stage.soft_losses && soft_batches > 0 ? sum_soft_flops / n
                                                             : sum_loss_gf / n;
      row.loss_uni = stage.soft_losses && soft_batches > 0
                         ? sum_soft_uni / soft_batches
                         : uniform_penalty(usage.hard_freq());
      row.total = (1.0 - weights.alpha) * row.loss_acc + weights.alpha * row.loss_flops +
                  weights.beta * row.loss_uni;
      row.acc = correct / n;
      row.gflops_f = sum_rep_gf / n;
      row.gflops_v = sum_rep_gv / n;
      row.tau = current_tau;
      if (options.on_epoch) {
        options.on_epoch(row);
      }
      log.push_back(std::move(row));
    }
  }
  return log;
}

void write_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("training log: cannot open " + path + " for writing");
  }
  out << "epoch,stage,loss_acc,loss_flops,loss_uni,total,acc,gflops_f,gflops_v,tau\n";
  out << std::setprecision(12);
  for (const auto& row : log) {
    out << row.epoch << ',' << row.stage << ',' << row.loss_acc << ',' << row.loss_flops
        << ',' << row.loss_uni << ',' << row.total << ',' << row.acc << ',' << row.gflops_f
        << ',' << row.gflops_v << ',' << row.tau << "\n";
  }
  if (!out) {
    throw std::runtime_error("training log: write to " + path + " failed");
  }
}

}  // namespace adares

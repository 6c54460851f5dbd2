#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adares/eval.hpp"

namespace {

using namespace adares;

struct GlobalArgs {
  std::uint64_t seed = 0;
  std::string cost_table = "paper";  // training-loss and reporting table
  std::string accounting = "paper";
  double epoch_scale = 0.2;  // desk-scale default; 1.0 reproduces the nominal schedule
};

CostTable make_table(const GlobalArgs& args, const ModelConfig& config) {
  if (args.cost_table == "analytic") {
    return analytic_cost_table(config);
  }
  return CostTable::paper();
}

Accounting make_accounting(const GlobalArgs& args) {
  return args.accounting == "full" ? Accounting::Full : Accounting::Paper;
}

TrainOptions make_train_options(const GlobalArgs& args, const ModelConfig& config) {
  TrainOptions options;
  options.schedule.epoch_scale = args.epoch_scale;
  options.cost_table = make_table(args, config);
  options.accounting = make_accounting(args);
  options.seed = args.seed;
  options.on_epoch = [](const EpochLog& row) {
    std::cout << "epoch " << std::setw(3) << row.epoch << " [" << row.stage
              << "] loss=" << std::fixed << std::setprecision(4) << row.total
              << " acc=" << row.acc << " gflops/f=" << row.gflops_f
              << " tau=" << row.tau << std::defaultfloat << "\n";
  };
  return options;
}

void print_metrics(const std::string& name, const Metrics& m) {
  std::cout << name << ": acc=" << std::fixed << std::setprecision(4) << m.accuracy
            << " map=" << m.mean_ap << " gflops/f=" << m.gflops_per_frame
            << " gflops/v=" << m.gflops_per_video << " gflops/f(full)="
            << m.gflops_per_frame_full << std::defaultfloat << "\n";
}

nlohmann::json metrics_json(const Metrics& m) {
  return nlohmann::json{{"acc", m.accuracy},
                        {"map", m.mean_ap},
                        {"gflops_f", m.gflops_per_frame},
                        {"gflops_v", m.gflops_per_video},
                        {"gflops_f_full", m.gflops_per_frame_full},
                        {"gflops_v_full", m.gflops_per_video_full},
                        {"usage", m.usage},
                        {"videos", m.videos}};
}

void write_json(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  out << doc.dump(2) << "\n";
}

// Versioned JSON object with an allowlist of keys; typos fail loudly instead
// of silently falling back to defaults.
nlohmann::json load_json_config(const std::string& path,
                                const std::vector<std::string>& allowed) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  nlohmann::json doc = nlohmann::json::parse(in);
  if (!doc.is_object()) {
    throw std::runtime_error(path + ": expected a JSON object");
  }
  if (doc.value("version", 1) != 1) {
    throw std::runtime_error(path + ": unsupported version " +
                             doc["version"].dump());
  }
  for (const auto& item : doc.items()) {
    if (item.key() != "version" &&
        std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw std::runtime_error(path + ": unknown key '" + item.key() + "'");
    }
  }
  return doc;
}

const std::vector<VideoSample>& pick_split(const Dataset& dataset, const std::string& split) {
  if (split == "train") return dataset.train;
  if (split == "val") return dataset.val;
  if (split == "test") return dataset.test;
  throw std::invalid_argument("unknown split '" + split + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-resolution video recognition"};
  app.require_subcommand(1);

  GlobalArgs global;
  app.add_option("--seed", global.seed, "Seed for generation, training, and sampling");
  app.add_option("--cost-table", global.cost_table, "Cost table: paper or analytic")
      ->check(CLI::IsMember({"paper", "analytic"}));
  app.add_option("--accounting", global.accounting, "Cost accounting: paper or full")
      ->check(CLI::IsMember({"paper", "full"}));
  app.add_option("--epoch-scale", global.epoch_scale,
                 "Multiplier on nominal stage epoch counts");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  std::string gen_out = "dataset.bin";
  std::string gen_spec_path;
  DatasetSpec gen_spec;
  std::string gen_detail = "fine";
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  auto* gen_spec_opt =
      gen->add_option("--spec", gen_spec_path, "Dataset spec JSON (replaces the flags below)");
  gen_spec_opt->excludes(gen->add_option("--classes", gen_spec.num_classes));
  gen_spec_opt->excludes(gen->add_option("--train-per-class", gen_spec.train_per_class));
  gen_spec_opt->excludes(gen->add_option("--val-per-class", gen_spec.val_per_class));
  gen_spec_opt->excludes(gen->add_option("--test-per-class", gen_spec.test_per_class));
  gen_spec_opt->excludes(gen->add_option("--frames", gen_spec.frames));
  gen_spec_opt->excludes(gen->add_option("--informative-min", gen_spec.informative_min,
                                         "Min informative frames per video"));
  gen_spec_opt->excludes(gen->add_option("--informative-max", gen_spec.informative_max,
                                         "Max informative frames per video"));
  gen_spec_opt->excludes(gen->add_option("--redundancy", gen_spec.redundancy,
                                         "Near-duplicate run length"));
  gen_spec_opt->excludes(gen->add_option("--clutter", gen_spec.clutter,
                                         "Clutter field amplitude"));
  gen_spec_opt->excludes(gen->add_option("--detail", gen_detail, "Class evidence scale")
                             ->check(CLI::IsMember({"fine", "coarse"})));

  // train
  auto* train = app.add_subcommand("train", "Train the adaptive model");
  std::string train_data, train_out = "model.json", train_log, train_method = "gumbel";
  std::string train_config_path;
  double train_alpha = 0.1, train_beta = 0.3;
  int train_batch = 0;
  train->add_option("--data", train_data, "Dataset path")->required();
  train->add_option("--out", train_out, "Checkpoint path");
  train->add_option("--log", train_log, "Per-epoch CSV log path");
  auto* train_config_opt = train->add_option(
      "--config", train_config_path, "Training config JSON (replaces the flags below)");
  train_config_opt->excludes(train->add_option("--method", train_method, "gumbel or reinforce")
                                 ->check(CLI::IsMember({"gumbel", "reinforce"})));
  train_config_opt->excludes(
      train->add_option("--alpha", train_alpha, "Efficiency loss weight"));
  train_config_opt->excludes(
      train->add_option("--beta", train_beta, "Uniform-usage loss weight"));
  train_config_opt->excludes(train->add_option(
      "--batch", train_batch, "Batch size for all stages (0 = per-stage defaults)"));

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_data, eval_model, eval_split = "test", eval_routing = "greedy",
              eval_trace;
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--routing", eval_routing)
      ->check(CLI::IsMember({"greedy", "highest", "random", "multiscale", "aggregator"}));
  eval_cmd->add_option("--trace", eval_trace, "Write per-video decision trace (JSONL)");
  std::string eval_metrics;
  eval_cmd->add_option("--metrics", eval_metrics, "Write metrics JSON");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Train and evaluate one baseline");
  std::string base_data, base_kind = "arnet", base_out, base_log, base_trace;
  double base_alpha = 0.1, base_beta = 0.3;
  baseline->add_option("--data", base_data)->required();
  baseline->add_option("--kind", base_kind)
      ->check(CLI::IsMember({"uniform", "lstm", "random", "multiscale", "arnet", "reinforce"}));
  baseline->add_option("--out", base_out, "Checkpoint path");
  baseline->add_option("--log", base_log, "Per-epoch CSV log path");
  baseline->add_option("--trace", base_trace, "Trace JSONL path");
  baseline->add_option("--alpha", base_alpha);
  baseline->add_option("--beta", base_beta);
  std::string base_metrics;
  baseline->add_option("--metrics", base_metrics, "Write metrics JSON");

  // hist
  auto* hist = app.add_subcommand("hist", "Action usage histogram for a checkpoint");
  std::string hist_data, hist_model, hist_split = "test", hist_out;
  hist->add_option("--data", hist_data)->required();
  hist->add_option("--model", hist_model)->required();
  hist->add_option("--split", hist_split)->check(CLI::IsMember({"train", "val", "test"}));
  hist->add_option("--out", hist_out, "CSV output (action,freq)");

  // curve
  auto* curve = app.add_subcommand("curve", "Accuracy/cost trade-off sweep");
  std::string curve_data, curve_out = "curve.csv";
  std::vector<double> curve_alphas = {0.0, 0.1, 0.3};
  curve->add_option("--data", curve_data)->required();
  curve->add_option("--out", curve_out);
  curve->add_option("--alphas", curve_alphas, "Efficiency weights to sweep")->delimiter(',');

  // compare-rl
  auto* rl = app.add_subcommand("compare-rl",
                                "Relaxed sampling vs policy-gradient training");
  std::string rl_data, rl_out;
  rl->add_option("--data", rl_data)->required();
  rl->add_option("--out", rl_out, "JSON report path");

  CLI11_PARSE(app, argc, argv);

  try {
    ModelConfig config;

    if (gen->parsed()) {
      if (!gen_spec_path.empty()) {
        nlohmann::json doc = load_json_config(
            gen_spec_path,
            {"classes", "frames", "train_per_class", "val_per_class", "test_per_class",
             "informative_min", "informative_max", "redundancy", "clutter", "detail"});
        gen_spec.num_classes = doc.value("classes", gen_spec.num_classes);
        gen_spec.frames = doc.value("frames", gen_spec.frames);
        gen_spec.train_per_class = doc.value("train_per_class", gen_spec.train_per_class);
        gen_spec.val_per_class = doc.value("val_per_class", gen_spec.val_per_class);
        gen_spec.test_per_class = doc.value("test_per_class", gen_spec.test_per_class);
        gen_spec.informative_min = doc.value("informative_min", gen_spec.informative_min);
        gen_spec.informative_max = doc.value("informative_max", gen_spec.informative_max);
        gen_spec.redundancy = doc.value("redundancy", gen_spec.redundancy);
        gen_spec.clutter = doc.value("clutter", gen_spec.clutter);
        gen_detail = doc.value("detail", gen_detail);
        if (gen_detail != "fine" && gen_detail != "coarse") {
          throw std::runtime_error(gen_spec_path + ": detail must be fine or coarse");
        }
      }
      gen_spec.detail = gen_detail == "coarse" ? DetailScale::Coarse : DetailScale::Fine;
      Dataset dataset = generate_dataset(gen_spec, global.seed);
      save_dataset(dataset, gen_out);
      std::cout << "wrote " << gen_out << ": " << dataset.train.size() << " train, "
                << dataset.val.size() << " val, " << dataset.test.size() << " test videos\n";
    } else if (train->parsed()) {
      Dataset dataset = load_dataset(train_data);
      config.frames = dataset.spec.frames;
      config.num_classes = dataset.spec.num_classes;
      TrainOptions options = make_train_options(global, config);
      if (!train_config_path.empty()) {
        nlohmann::json doc = load_json_config(
            train_config_path,
            {"method", "alpha", "beta", "batch", "warmup_epochs", "warmup_lr",
             "warmup_batch", "joint_epochs", "joint_lr", "joint_batch",
             "finetune_epochs", "finetune_lr", "finetune_batch", "momentum",
             "max_grad_norm", "epoch_scale", "tau0", "tau_decay", "tau_floor"});
        train_method = doc.value("method", train_method);
        if (train_method != "gumbel" && train_method != "reinforce") {
          throw std::runtime_error(train_config_path + ": method must be gumbel or reinforce");
        }
        train_alpha = doc.value("alpha", train_alpha);
        train_beta = doc.value("beta", train_beta);
        train_batch = doc.value("batch", train_batch);
        StageSchedule& s = options.schedule;
        s.warmup_epochs = doc.value("warmup_epochs", s.warmup_epochs);
        s.warmup_lr = doc.value("warmup_lr", s.warmup_lr);
        s.warmup_batch = doc.value("warmup_batch", s.warmup_batch);
        s.joint_epochs = doc.value("joint_epochs", s.joint_epochs);
        s.joint_lr = doc.value("joint_lr", s.joint_lr);
        s.joint_batch = doc.value("joint_batch", s.joint_batch);
        s.finetune_epochs = doc.value("finetune_epochs", s.finetune_epochs);
        s.finetune_lr = doc.value("finetune_lr", s.finetune_lr);
        s.finetune_batch = doc.value("finetune_batch", s.finetune_batch);
        s.momentum = doc.value("momentum", s.momentum);
        s.max_grad_norm = doc.value("max_grad_norm", s.max_grad_norm);
        s.epoch_scale = doc.value("epoch_scale", s.epoch_scale);
        s.temperature.tau0 = doc.value("tau0", s.temperature.tau0);
        s.temperature.decay = doc.value("tau_decay", s.temperature.decay);
        s.temperature.floor = doc.value("tau_floor", s.temperature.floor);
      }
      options.weights.alpha = train_alpha;
      options.weights.beta = train_beta;
      if (train_batch > 0) {
        options.schedule.warmup_batch = train_batch;
        options.schedule.joint_batch = train_batch;
        options.schedule.finetune_batch = train_batch;
      }
      Rng init_rng(global.seed);
      Model model = Model::init(config, init_rng);
      TrainMethod method =
          train_method == "reinforce" ? TrainMethod::Reinforce : TrainMethod::Gumbel;
      auto log = train_model(model, dataset.train, options, method);
      save_checkpoint(model, train_out);
      if (!train_log.empty()) {
        write_log_csv(log, train_log);
      }
      std::cout << "wrote " << train_out << "\n";
    } else if (eval_cmd->parsed()) {
      Dataset dataset = load_dataset(eval_data);
      Model model = load_checkpoint(eval_model);
      CostTable table = make_table(global, model.config);
      EvalOptions options;
      options.seed = global.seed;
      if (eval_routing == "highest") options.routing = EvalRouting::Highest;
      else if (eval_routing == "random") options.routing = EvalRouting::RandomAll;
      else if (eval_routing == "multiscale") options.routing = EvalRouting::MultiScale;
      else if (eval_routing == "aggregator") options.routing = EvalRouting::Aggregator;
      EvalResult result = evaluate(model, pick_split(dataset, eval_split), table, options);
      print_metrics(eval_split, result.metrics);
      if (!eval_metrics.empty()) {
        nlohmann::json doc = metrics_json(result.metrics);
        doc["version"] = 1;
        doc["split"] = eval_split;
        doc["routing"] = eval_routing;
        write_json(doc, eval_metrics);
      }
      if (!eval_trace.empty()) {
        write_trace_jsonl(result.traces, model.config.action_space(), model.config.ladder,
                          eval_trace);
        std::cout << "wrote " << eval_trace << "\n";
      }
    } else if (baseline->parsed()) {
      Dataset dataset = load_dataset(base_data);
      config.frames = dataset.spec.frames;
      config.num_classes = dataset.spec.num_classes;
      TrainOptions options = make_train_options(global, config);
      options.weights.alpha = base_alpha;
      options.weights.beta = base_beta;
      BaselineKind kind = BaselineKind::ArNet;
      if (base_kind == "uniform") kind = BaselineKind::Uniform;
      else if (base_kind == "lstm") kind = BaselineKind::Lstm;
      else if (base_kind == "random") kind = BaselineKind::Random;
      else if (base_kind == "multiscale") kind = BaselineKind::MultiScale;
      else if (base_kind == "reinforce") kind = BaselineKind::Reinforce;
      CostTable table = make_table(global, config);
      BaselineResult result = run_baseline(kind, dataset, config, options, table);
      print_metrics(baseline_name(kind), result.metrics);
      if (!base_metrics.empty()) {
        nlohmann::json doc = metrics_json(result.metrics);
        doc["version"] = 1;
        doc["kind"] = baseline_name(kind);
        write_json(doc, base_metrics);
      }
      if (!base_out.empty()) {
        save_checkpoint(result.model, base_out);
      }
      if (!base_log.empty()) {
        write_log_csv(result.log, base_log);
      }
      if (!base_trace.empty()) {
        write_trace_jsonl(result.traces, result.model.config.action_space(),
                          result.model.config.ladder, base_trace);
      }
    } else if (hist->parsed()) {
      Dataset dataset = load_dataset(hist_data);
      Model model = load_checkpoint(hist_model);
      CostTable table = make_table(global, model.config);
      EvalOptions options;
      options.seed = global.seed;
      EvalResult result = evaluate(model, pick_split(dataset, hist_split), table, options);
      ActionSpace space = model.config.action_space();
      auto freq = policy_histogram(result.traces, space);
      std::ostringstream rows;
      rows << "action,freq\n" << std::setprecision(12);
      for (int a = 0; a < space.size(); ++a) {
        std::string name = action_name(space.decode(a), model.config.ladder);
        rows << name << ',' << freq[static_cast<std::size_t>(a)] << "\n";
        std::cout << std::setw(8) << name << "  " << std::fixed << std::setprecision(4)
                  << freq[static_cast<std::size_t>(a)] << std::defaultfloat << "\n";
      }
      const auto& split = pick_split(dataset, hist_split);
      int informative = 0;
      int hits = 0;
      int total_frames = 0;
      for (std::size_t i = 0; i < split.size(); ++i) {
        const auto& video = split[i];
        const auto& trace = result.traces[i];
        total_frames += static_cast<int>(video.kinds.size());
        for (int t : video.informative_indices()) {
          ++informative;
          const auto& rec = trace.frames[static_cast<std::size_t>(t)];
          hits += rec.executed && rec.level == 0 ? 1 : 0;
        }
      }
      double base_rate = total_frames > 0 ? static_cast<double>(informative) / total_frames : 0.0;
      double hit_rate = informative > 0 ? static_cast<double>(hits) / informative : 0.0;
      std::cout << "level0 hit-rate on informative frames: " << std::fixed
                << std::setprecision(4) << hit_rate << " (base rate " << base_rate << ")\n"
                << std::defaultfloat;
      if (!hist_out.empty()) {
        std::ofstream out(hist_out);
        if (!out) {
          throw std::runtime_error("cannot open " + hist_out + " for writing");
        }
        out << rows.str();
        out << "level0_informative_hit_rate," << std::setprecision(12) << hit_rate << "\n";
        out << "informative_base_rate," << base_rate << "\n";
      }
    } else if (curve->parsed()) {
      Dataset dataset = load_dataset(curve_data);
      config.frames = dataset.spec.frames;
      config.num_classes = dataset.spec.num_classes;
      TrainOptions options = make_train_options(global, config);
      options.on_epoch = nullptr;  // one summary line per point instead
      CostTable table = make_table(global, config);
      auto points = accuracy_cost_curve(dataset, config, options, table, curve_alphas);
      for (const auto& point : points) {
        print_metrics("alpha=" + std::to_string(point.alpha), point.metrics);
      }
      write_curve_csv(points, curve_out);
      std::cout << "wrote " << curve_out << "\n";
    } else if (rl->parsed()) {
      Dataset dataset = load_dataset(rl_data);
      config.frames = dataset.spec.frames;
      config.num_classes = dataset.spec.num_classes;
      TrainOptions options = make_train_options(global, config);
      CostTable table = make_table(global, config);
      RlComparison comparison = compare_rl(dataset, config, options, table);
      print_metrics("GUMBEL", comparison.gumbel.metrics);
      print_metrics("REINFORCE", comparison.reinforce.metrics);
      if (!rl_out.empty()) {
        nlohmann::json report{{"version", 1},
                              {"gumbel", metrics_json(comparison.gumbel.metrics)},
                              {"reinforce", metrics_json(comparison.reinforce.metrics)}};
        write_json(report, rl_out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "adares/eval.hpp"

using namespace adares;

namespace {

Dataset eval_dataset() {
  DatasetSpec spec;
  spec.num_classes = 2;
  spec.frames = 4;
  spec.train_per_class = 3;
  spec.val_per_class = 1;
  spec.test_per_class = 3;
  return generate_dataset(spec, 41);
}

ModelConfig eval_config(bool with_aggregator = false) {
  ModelConfig config;
  config.num_classes = 2;
  config.frames = 4;
  config.with_aggregator = with_aggregator;
  return config;
}

TrainOptions quick_options() {
  TrainOptions options;
  options.schedule.warmup_epochs = 1;
  options.schedule.joint_epochs = 1;
  options.schedule.finetune_epochs = 1;
  options.schedule.warmup_batch = 1;
  options.seed = 3;
  return options;
}

}  // namespace

TEST_CASE("average precision hand cases") {
  // Class 0 ranking: pos, neg, pos -> AP (1/1 + 2/3) / 2; class 1 ranking:
  // neg, pos, neg -> AP 1/2.
  std::vector<std::vector<double>> scores{{0.9, 0.1}, {0.8, 0.2}, {0.7, 0.3}};
  std::vector<int> labels{0, 1, 0};
  CHECK(mean_average_precision(scores, labels, 2) ==
        doctest::Approx((5.0 / 6.0 + 0.5) / 2.0).epsilon(1e-12));

  // Perfectly separated scores give 1.0.
  std::vector<std::vector<double>> perfect{{0.9, 0.1}, {0.2, 0.8}, {0.95, 0.05}};
  std::vector<int> plabels{0, 1, 0};
  CHECK(mean_average_precision(perfect, plabels, 2) == doctest::Approx(1.0).epsilon(1e-12));

  // Classes without positives are excluded from the mean.
  std::vector<std::vector<double>> onecls{{0.9, 0.1}, {0.8, 0.2}};
  std::vector<int> olabels{0, 0};
  CHECK(mean_average_precision(onecls, olabels, 2) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(mean_average_precision(scores, std::vector<int>{0}, 2));
}

TEST_CASE("policy histogram aggregates frame attribution across traces") {
  ActionSpace space;
  PolicyTrace a;
  a.frames = {{0, true, 0, true, 0}, {1, true, 5, false, -1}, {2, false, -1, false, -1},
              {3, true, 2, true, 2}};
  PolicyTrace b;
  b.frames = {{0, true, 6, false, -1},
              {1, false, -1, false, -1},
              {2, false, -1, false, -1},
              {3, false, -1, false, -1}};
  auto freq = policy_histogram({a, b}, space);
  CHECK(freq[0] == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  CHECK(freq[2] == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  CHECK(freq[5] == doctest::Approx(2.0 / 8.0).epsilon(1e-12));
  CHECK(freq[6] == doctest::Approx(4.0 / 8.0).epsilon(1e-12));
  double total = 0.0;
  for (double f : freq) {
    total += f;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-highest evaluation reproduces the published per-video cost") {
  Dataset data = eval_dataset();
  Rng rng(2);
  Model model = Model::init(eval_config(), rng);

  EvalOptions options;
  options.routing = EvalRouting::Highest;
  EvalResult result = evaluate(model, data.test, CostTable::paper(), options);

  CHECK(result.metrics.videos == static_cast<int>(data.test.size()));
  CHECK(result.metrics.gflops_per_frame == doctest::Approx(4.1103).epsilon(1e-12));
  CHECK(result.metrics.gflops_per_video == doctest::Approx(4.1103 * 4).epsilon(1e-12));
  // Full accounting adds one decision per observed frame.
  CHECK(result.metrics.gflops_per_frame_full ==
        doctest::Approx(4.1103 + 0.0016384).epsilon(1e-12));
  CHECK(result.metrics.usage[0] == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(result.traces.size() == data.test.size());
  for (const auto& trace : result.traces) {
    CHECK(trace.predicted >= 0);
    CHECK(trace.gflops == doctest::Approx(4.1103 * 4).epsilon(1e-12));
  }
  CHECK(result.metrics.mean_ap >= 0.0);
  CHECK(result.metrics.mean_ap <= 1.0);
}

TEST_CASE("multi-scale evaluation costs the whole ladder every frame") {
  Dataset data = eval_dataset();
  Rng rng(4);
  Model model = Model::init(eval_config(), rng);

  EvalOptions options;
  options.routing = EvalRouting::MultiScale;
  EvalResult result = evaluate(model, data.test, CostTable::paper(), options);
  CHECK(result.metrics.gflops_per_frame == doctest::Approx(6.8805).epsilon(1e-12));
  CHECK(result.metrics.gflops_per_video == doctest::Approx(6.8805 * 4).epsilon(1e-12));
  // A 16-frame video prices at the published identity.
  CHECK(16.0 * 6.8805 == doctest::Approx(110.088).epsilon(1e-12));
}

TEST_CASE("random evaluation is deterministic in its seed") {
  Dataset data = eval_dataset();
  Rng rng(6);
  Model model = Model::init(eval_config(), rng);

  EvalOptions options;
  options.routing = EvalRouting::RandomAll;
  options.seed = 123;
  EvalResult a = evaluate(model, data.test, CostTable::paper(), options);
  EvalResult b = evaluate(model, data.test, CostTable::paper(), options);
  CHECK(a.metrics.gflops_per_video == b.metrics.gflops_per_video);
  CHECK(a.metrics.accuracy == b.metrics.accuracy);
  options.seed = 124;
  EvalResult c = evaluate(model, data.test, CostTable::paper(), options);
  CHECK(a.metrics.gflops_per_video != c.metrics.gflops_per_video);

  CHECK_THROWS(evaluate(model, {}, CostTable::paper(), options));
}

TEST_CASE("greedy evaluation routes through the learned policy") {
  Dataset data = eval_dataset();
  Rng rng(8);
  Model model = Model::init(eval_config(), rng);
  EvalResult result = evaluate(model, data.test, CostTable::paper(), EvalOptions{});
  CHECK(result.metrics.gflops_per_video <= 4.1103 * 4 + 1e-9);
  double usage_total = 0.0;
  for (double u : result.metrics.usage) {
    usage_total += u;
  }
  CHECK(usage_total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("baseline names match their table rows") {
  CHECK(baseline_name(BaselineKind::Uniform) == "UNIFORM");
  CHECK(baseline_name(BaselineKind::Lstm) == "LSTM");
  CHECK(baseline_name(BaselineKind::Random) == "RANDOM");
  CHECK(baseline_name(BaselineKind::MultiScale) == "MULTISCALE");
  CHECK(baseline_name(BaselineKind::ArNet) == "ARNET");
  CHECK(baseline_name(BaselineKind::Reinforce) == "REINFORCE");
}

TEST_CASE("baseline harness trains and evaluates one variant end to end") {
  Dataset data = eval_dataset();
  BaselineResult result = run_baseline(BaselineKind::Uniform, data, eval_config(),
                                       quick_options(), CostTable::paper());
  CHECK(result.kind == BaselineKind::Uniform);
  CHECK(result.log.size() == 3);
  CHECK(result.metrics.videos == static_cast<int>(data.test.size()));
  CHECK(result.metrics.gflops_per_video == doctest::Approx(4.1103 * 4).epsilon(1e-12));
  CHECK(std::isfinite(result.metrics.accuracy));
  CHECK(result.traces.size() == data.test.size());

  BaselineResult lstm = run_baseline(BaselineKind::Lstm, data, eval_config(true),
                                     quick_options(), CostTable::paper());
  CHECK(lstm.metrics.gflops_per_video > 4.1103 * 4);  // aggregator overhead on top
}

TEST_CASE("rl comparison runs both methods on the same data and seed") {
  Dataset data = eval_dataset();
  RlComparison cmp = compare_rl(data, eval_config(), quick_options(), CostTable::paper());
  CHECK(cmp.gumbel.kind == BaselineKind::ArNet);
  CHECK(cmp.reinforce.kind == BaselineKind::Reinforce);
  CHECK(cmp.gumbel.log.size() == cmp.reinforce.log.size());
  CHECK(std::isfinite(cmp.gumbel.metrics.accuracy));
  CHECK(std::isfinite(cmp.reinforce.metrics.accuracy));
  CHECK(cmp.gumbel.metrics.videos == cmp.reinforce.metrics.videos);
}

TEST_CASE("trade-off curve sweeps efficiency weights and exports csv") {
  Dataset data = eval_dataset();
  std::vector<double> alphas{0.0, 0.3};
  auto curve = accuracy_cost_curve(data, eval_config(), quick_options(), CostTable::paper(),
                                   alphas);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].alpha == 0.0);
  CHECK(curve[1].alpha == 0.3);
  for (const auto& point : curve) {
    CHECK(std::isfinite(point.metrics.accuracy));
    CHECK(std::isfinite(point.metrics.gflops_per_video));
  }

  const char* path = "curve_tmp.csv";
  write_curve_csv(curve, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line.find("alpha") != std::string::npos);
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      ++rows;
    }
  }
  CHECK(rows == 2);
  in.close();
  std::remove(path);
}

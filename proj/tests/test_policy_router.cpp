#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <vector>

#include "adares/model.hpp"
#include "adares/router.hpp"
#include "adares/rng.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace adares;

namespace {

std::vector<Tensor> random_video(int frames, int size, Rng& rng) {
  std::vector<Tensor> video;
  for (int t = 0; t < frames; ++t) {
    std::vector<double> values(static_cast<std::size_t>(size) * size);
    for (auto& v : values) {
      v = rng.uniform(-1.0, 1.0);
    }
    video.push_back(Tensor::from_values({1, 1, size, size}, std::move(values)));
  }
  return video;
}

Model test_model(Rng& rng) { return Model::init(ModelConfig{}, rng); }

void check_against_reference(const PolicyTrace& trace, const testutil::RefTrace& ref) {
  REQUIRE(trace.frames.size() == ref.frames.size());
  for (std::size_t t = 0; t < ref.frames.size(); ++t) {
    CHECK(trace.frames[t].observed == ref.frames[t].observed);
    CHECK(trace.frames[t].executed == ref.frames[t].executed);
    if (ref.frames[t].observed) {
      CHECK(trace.frames[t].action == ref.frames[t].action);
    }
    if (ref.frames[t].executed) {
      CHECK(trace.frames[t].level == ref.frames[t].level);
    }
  }
  CHECK(trace.decisions == ref.decisions);
  CHECK(trace.used_fallback == ref.fallback);
}

}  // namespace

TEST_CASE("policy_step produces features, logits, and advanced state") {
  Rng rng(1);
  PolicySpec spec;
  PolicyParams params = init_policy_params(spec, 6, rng);
  PolicyState state = initial_policy_state(spec);
  CHECK(state.pending_skips == 0);
  for (double v : state.h.values()) {
    CHECK(v == 0.0);
  }

  Tensor low = Tensor::full({1, 1, 8, 8}, 0.3);
  PolicyStepOutput step = policy_step(spec, params, low, state);
  REQUIRE(step.features.shape() == std::vector<int>{spec.feature_dim()});
  REQUIRE(step.logits.shape() == std::vector<int>{spec.num_actions});
  CHECK(step.next_state.h.values() != state.h.values());

  // Same inputs, same outputs.
  PolicyStepOutput again = policy_step(spec, params, low, state);
  CHECK(again.logits.values() == step.logits.values());
}

TEST_CASE("forced routing matches the independent trace simulator") {
  Rng rng(2);
  Model model = test_model(rng);
  const ActionSpace space = model.config.action_space();
  std::vector<Tensor> video = random_video(6, 32, rng);

  std::vector<std::vector<int>> sequences = {
      {0, 1, 2, 3, 0, 1},        // all resolutions, no skips
      {4, 4, 4, 4, 4, 4},        // skip1 everywhere: observed but never executed
      {5, 0, 5, 0, 5, 0},        // skip2 alternating
      {6, 0, 6},                 // skip4 covering four frames at a time
      {6, 6},                    // tail skip truncates at the end
      {5, 6, 9999},              // trailing entries never consumed
  };
  Rng seq_rng(900);
  for (int i = 0; i < 40; ++i) {
    std::vector<int> random_seq;
    for (int t = 0; t < 6; ++t) {
      random_seq.push_back(seq_rng.uniform_int(space.size()));
    }
    sequences.push_back(std::move(random_seq));
  }

  for (const auto& forced : sequences) {
    testutil::RefTrace ref =
        testutil::simulate_forced(6, forced, space.levels, space.skip_counts);
    RouteOptions ro;
    ro.mode = RoutingMode::Forced;
    ro.forced = &forced;
    RouteResult result = run_video(model, video, ro);
    check_against_reference(result.trace, ref);
    CHECK(result.executed_frames == ref.executed_frames);
    REQUIRE(result.video_logits.shape() == std::vector<int>{6});

    // Costs agree with the first-principles recomputation under both rules.
    for (Accounting acc : {Accounting::Paper, Accounting::Full}) {
      CostReport report = video_cost(result.trace, CostTable::paper(), space, acc);
      CHECK(report.gflops_per_video ==
            doctest::Approx(testutil::ref_cost(ref, CostTable::paper(), space.levels,
                                               acc == Accounting::Full))
                .epsilon(1e-12));
      auto usage = testutil::ref_usage(ref, space.levels, space.skip_counts);
      for (std::size_t a = 0; a < usage.size(); ++a) {
        CHECK(report.usage[a] == doctest::Approx(usage[a]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("learned routing forward equals the hard-action forced pass") {
  Rng rng(3);
  Model model = test_model(rng);
  std::vector<Tensor> video = random_video(8, 32, rng);

  for (double tau : {5.0, 1.0, 0.2}) {
    Rng route(17);
    RouteOptions learned;
    learned.mode = RoutingMode::Learned;
    learned.tau = tau;
    learned.rng = &route;
    RouteResult sampled = run_video(model, video, learned);
    CHECK(static_cast<int>(sampled.soft_policies.size()) == sampled.trace.decisions);

    std::vector<int> actions;
    for (const auto& rec : sampled.trace.frames) {
      if (rec.observed) {
        actions.push_back(rec.action);
      }
    }
    RouteOptions forced;
    forced.mode = RoutingMode::Forced;
    forced.forced = &actions;
    RouteResult replay = run_video(model, video, forced);

    // The straight-through gates are exactly one-hot, so the blended sum
    // reduces to the sampled branch with no floating-point residue.
    CHECK(sampled.video_logits.values() == replay.video_logits.values());
    CHECK(sampled.executed_frames == replay.executed_frames);
    CHECK(sampled.trace.used_fallback == replay.trace.used_fallback);
  }
}

TEST_CASE("stochastic modes respect their action supports") {
  Rng rng(4);
  Model model = test_model(rng);
  std::vector<Tensor> video = random_video(5, 32, rng);

  Rng route(5);
  RouteOptions rr;
  rr.mode = RoutingMode::RandomResolution;
  rr.rng = &route;
  for (int trial = 0; trial < 10; ++trial) {
    RouteResult result = run_video(model, video, rr);
    CHECK(result.trace.decisions == 5);  // no skips, every frame observed
    for (const auto& rec : result.trace.frames) {
      CHECK(rec.observed);
      CHECK(rec.executed);
      CHECK(rec.level < model.config.ladder.levels());
    }
  }

  RouteOptions ss;
  ss.mode = RoutingMode::SampledStochastic;
  ss.rng = &route;
  RouteResult result = run_video(model, video, ss);
  CHECK(static_cast<int>(result.log_prob_actions.size()) == result.trace.decisions);
  for (const auto& lp : result.log_prob_actions) {
    CHECK(lp.value() <= 0.0);
  }

  RouteOptions ra;
  ra.mode = RoutingMode::RandomAll;
  ra.rng = &route;
  std::vector<bool> seen(static_cast<std::size_t>(model.config.action_space().size()), false);
  for (int trial = 0; trial < 60; ++trial) {
    RouteResult r = run_video(model, video, ra);
    for (const auto& rec : r.trace.frames) {
      if (rec.observed) {
        seen[static_cast<std::size_t>(rec.action)] = true;
      }
    }
  }
  for (bool s : seen) {
    CHECK(s);
  }
}

TEST_CASE("router rejects malformed requests") {
  Rng rng(6);
  Model model = test_model(rng);
  std::vector<Tensor> video = random_video(4, 32, rng);

  CHECK_THROWS(run_video(model, {}, RouteOptions{}));

  RouteOptions learned;
  learned.mode = RoutingMode::Learned;  // rng missing
  CHECK_THROWS(run_video(model, video, learned));

  RouteOptions forced;
  forced.mode = RoutingMode::Forced;  // sequence missing
  CHECK_THROWS(run_video(model, video, forced));

  std::vector<int> short_seq{4};  // skip1 covers one frame, second decision unfed
  forced.forced = &short_seq;
  CHECK_THROWS(run_video(model, video, forced));
}

TEST_CASE("video_cost hand cases") {
  CostTable table = CostTable::paper();
  ActionSpace space;

  PolicyTrace trace;
  trace.frames = {{0, true, 0, true, 0},    // res32
                  {1, true, 5, false, -1},  // skip2 covers frames 1 and 2
                  {2, false, -1, false, -1},
                  {3, true, 3, true, 3}};  // res8 (shared classifier)
  CostReport paper = video_cost(trace, table, space, Accounting::Paper);
  CHECK(paper.gflops_per_video == doctest::Approx(4.1103 + 0.0529).epsilon(1e-12));
  CHECK(paper.gflops_per_frame == doctest::Approx((4.1103 + 0.0529) / 4.0).epsilon(1e-12));
  CHECK(paper.usage[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(paper.usage[3] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(paper.usage[5] == doctest::Approx(0.5).epsilon(1e-12));

  CostReport full = video_cost(trace, table, space, Accounting::Full);
  CHECK(full.gflops_per_video ==
        doctest::Approx(4.1103 + 0.000512 + 3 * 0.0016384).epsilon(1e-12));

  // Fallback charges one shared prediction.
  PolicyTrace skipped;
  skipped.used_fallback = true;
  skipped.frames = {{0, true, 6, false, -1},
                    {1, false, -1, false, -1},
                    {2, false, -1, false, -1},
                    {3, false, -1, false, -1}};
  CHECK(video_cost(skipped, table, space, Accounting::Paper).gflops_per_video ==
        doctest::Approx(0.0529).epsilon(1e-12));
  CHECK(video_cost(skipped, table, space, Accounting::Full).gflops_per_video ==
        doctest::Approx(0.0016384 + 0.000512).epsilon(1e-12));

  CHECK_THROWS(video_cost(PolicyTrace{}, table, space, Accounting::Paper));
}

TEST_CASE("action names follow the ladder sizes") {
  ResolutionLadder ladder;
  CHECK(action_name(PolicyAction::resolution(0), ladder) == "res32");
  CHECK(action_name(PolicyAction::resolution(3), ladder) == "res8");
  CHECK(action_name(PolicyAction::skip(2), ladder) == "skip2");
}

TEST_CASE("trace export writes one parseable object per video") {
  ActionSpace space;
  ResolutionLadder ladder;
  PolicyTrace a;
  a.video_id = 7;
  a.label = 2;
  a.predicted = 2;
  a.gflops = 1.25;
  a.frames = {{0, true, 0, true, 0}, {1, true, 5, false, -1}, {2, false, -1, false, -1}};
  PolicyTrace b;
  b.video_id = 8;
  b.label = 1;
  b.predicted = 0;
  b.used_fallback = true;
  b.frames = {{0, true, 6, false, -1}, {1, false, -1, false, -1}};

  const char* path = "trace_export_tmp.jsonl";
  write_trace_jsonl({a, b}, space, ladder, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  nlohmann::json first = nlohmann::json::parse(line);
  CHECK(first["video"] == 7);
  CHECK(first["label"] == 2);
  CHECK(first["fallback"] == false);
  REQUIRE(first["frames"].size() == 3);
  CHECK(first["frames"][0]["action"] == "res32");
  CHECK(first["frames"][0]["level"] == 0);
  CHECK(first["frames"][1]["action"] == "skip2");
  CHECK(first["frames"][1]["executed"] == false);
  CHECK(first["frames"][2]["observed"] == false);
  CHECK_FALSE(first["frames"][2].contains("action"));

  REQUIRE(std::getline(in, line));
  nlohmann::json second = nlohmann::json::parse(line);
  CHECK(second["fallback"] == true);
  CHECK(second["frames"][0]["action"] == "skip4");
  CHECK_FALSE(std::getline(in, line));
  in.close();
  std::remove(path);
}

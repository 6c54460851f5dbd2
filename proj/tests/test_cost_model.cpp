#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <vector>

#include "adares/actions.hpp"
#include "adares/cost_model.hpp"
#include "adares/model.hpp"
#include "adares/tensor.hpp"

using namespace adares;

TEST_CASE("analytic flops count macs twice and pointwise ops once") {
  CHECK(analytic_flops({ConvCost{3, 2, 4, 5, 5}}) == doctest::Approx(3600.0));
  CHECK(analytic_flops({LinearCost{32, 6}}) == doctest::Approx(384.0));
  CHECK(analytic_flops({ElementwiseCost{123}}) == doctest::Approx(123.0));
  CHECK(analytic_flops({ConvCost{3, 1, 8, 16, 16}, ElementwiseCost{2048}}) ==
        doctest::Approx(36864.0 + 2048.0));
}

TEST_CASE("published cost table carries the verbatim per-network numbers") {
  CostTable table = CostTable::paper();
  CHECK(table.provenance() == CostTable::Provenance::Paper);
  CHECK(table.lookup("ResNet-50", 224) == 4.1103);
  CHECK(table.lookup("ResNet-34", 168) == 2.2490);
  CHECK(table.lookup("ResNet-18", 112) == 0.4683);
  CHECK(table.lookup("MobileNet-v2", 84) == 0.0529);
  CHECK(table.lookup("EfficientNet-b0", 112) == 0.0975);

  REQUIRE(table.level_count() == 4);
  CHECK(table.level_cost(0) == 4.1103);
  CHECK(table.level_cost(1) == 2.2490);
  CHECK(table.level_cost(2) == 0.4683);
  CHECK(table.level_cost(3) == 0.0529);
  double ladder_sum = 0.0;
  for (int l = 0; l < 4; ++l) {
    ladder_sum += table.level_cost(l);
  }
  CHECK(ladder_sum == doctest::Approx(6.8805).epsilon(1e-12));

  CHECK(table.policy_overhead_gflops() == doctest::Approx(0.0016384).epsilon(1e-12));
  CHECK(table.shared_head_gflops() == doctest::Approx(0.000512).epsilon(1e-12));

  CHECK_THROWS(table.lookup("ResNet-50", 112));
  CHECK_THROWS(table.level_cost(4));
  CHECK_THROWS(table.level_cost(-1));
}

TEST_CASE("analytic table prices this model family from its layer shapes") {
  CostTable table = analytic_cost_table(ModelConfig{});
  CHECK(table.provenance() == CostTable::Provenance::Analytic);
  REQUIRE(table.level_count() == 4);
  // Hand sums over the default stacks: 2*9*cin*cout*oh*ow per conv plus one
  // op per activation, pool output, and pooled feature.
  CHECK(table.level_cost(0) * 1e9 == doctest::Approx(335776.0).epsilon(1e-9));
  CHECK(table.level_cost(1) * 1e9 == doctest::Approx(168144.0).epsilon(1e-9));
  CHECK(table.level_cost(2) * 1e9 == doctest::Approx(47056.0).epsilon(1e-9));
  CHECK(table.level_cost(3) * 1e9 == doctest::Approx(42272.0).epsilon(1e-9));
  CHECK(table.policy_overhead_gflops() * 1e9 == doctest::Approx(92832.0).epsilon(1e-9));
  CHECK(table.shared_head_gflops() * 1e9 == doctest::Approx(384.0).epsilon(1e-9));

  CHECK(table.level_binding()[0].second == 32);
  CHECK(table.level_binding()[3].second == 8);
}

TEST_CASE("table construction rejects malformed inputs") {
  auto entry = [](const char* n, int r, double g) { return CostEntry{n, r, g}; };
  // Level costs must strictly decrease down the ladder.
  CHECK_THROWS(CostTable::from_entries({entry("a", 32, 1.0), entry("b", 16, 2.0)},
                                       {{"a", 32}, {"b", 16}}, CostTable::Provenance::Analytic,
                                       0.0, 0.0));
  // So must resolutions.
  CHECK_THROWS(CostTable::from_entries({entry("a", 16, 2.0), entry("b", 32, 1.0)},
                                       {{"a", 16}, {"b", 32}}, CostTable::Provenance::Analytic,
                                       0.0, 0.0));
  CHECK_THROWS(CostTable::from_entries({entry("a", 32, -1.0)}, {{"a", 32}},
                                       CostTable::Provenance::Analytic, 0.0, 0.0));
  CHECK_THROWS(CostTable::from_entries({entry("a", 0, 1.0)}, {{"a", 0}},
                                       CostTable::Provenance::Analytic, 0.0, 0.0));
  CHECK_THROWS(CostTable::from_entries({entry("a", 32, 1.0), entry("a", 32, 1.0)},
                                       {{"a", 32}}, CostTable::Provenance::Analytic, 0.0, 0.0));
  // Row names used by the CSV format for the overhead constants are reserved.
  CHECK_THROWS(CostTable::from_entries({entry("policy", 32, 1.0)}, {{"policy", 32}},
                                       CostTable::Provenance::Analytic, 0.0, 0.0));
}

TEST_CASE("csv round-trip preserves every field") {
  const char* path = "cost_table_roundtrip_tmp.csv";
  for (CostTable table : {CostTable::paper(), analytic_cost_table(ModelConfig{})}) {
    table.save_csv(path);
    CostTable loaded = CostTable::load_csv(path);
    CHECK(loaded.provenance() == table.provenance());
    REQUIRE(loaded.entries().size() == table.entries().size());
    for (std::size_t i = 0; i < table.entries().size(); ++i) {
      CHECK(loaded.entries()[i].network == table.entries()[i].network);
      CHECK(loaded.entries()[i].resolution == table.entries()[i].resolution);
      CHECK(loaded.entries()[i].gflops == doctest::Approx(table.entries()[i].gflops).epsilon(1e-12));
    }
    REQUIRE(loaded.level_count() == table.level_count());
    for (int l = 0; l < table.level_count(); ++l) {
      CHECK(loaded.level_cost(l) == doctest::Approx(table.level_cost(l)).epsilon(1e-12));
    }
    CHECK(loaded.policy_overhead_gflops() ==
          doctest::Approx(table.policy_overhead_gflops()).epsilon(1e-12));
    CHECK(loaded.shared_head_gflops() ==
          doctest::Approx(table.shared_head_gflops()).epsilon(1e-12));
  }
  std::remove(path);
  CHECK_THROWS(CostTable::load_csv("does_not_exist_tmp.csv"));
}

TEST_CASE("actions price as their level cost, skips are free") {
  CostTable table = CostTable::paper();
  CHECK(flops_of_action(PolicyAction::resolution(0), table) == 4.1103);
  CHECK(flops_of_action(PolicyAction::resolution(3), table) == 0.0529);
  CHECK(flops_of_action(PolicyAction::skip(1), table) == 0.0);
  CHECK(flops_of_action(PolicyAction::skip(4), table) == 0.0);
}

TEST_CASE("expected flops averages soft action costs over the video length") {
  CostTable table = CostTable::paper();
  ActionSpace space;
  const int frames = 16;

  // Uniform policies on every frame: cost = (sum of level costs) / 7 per frame.
  std::vector<Tensor> uniform;
  for (int t = 0; t < frames; ++t) {
    uniform.push_back(Tensor::full({space.size()}, 1.0 / space.size()));
  }
  CHECK(expected_flops(uniform, table, space, frames).value() ==
        doctest::Approx(6.8805 / 7.0).epsilon(1e-12));

  // Skipped frames carry no distribution: one observed frame out of 16.
  std::vector<Tensor> lone{Tensor::from_values({7}, {1.0, 0, 0, 0, 0, 0, 0})};
  CHECK(expected_flops(lone, table, space, frames).value() ==
        doctest::Approx(4.1103 / 16.0).epsilon(1e-12));

  // No observed frame at all costs nothing.
  CHECK(expected_flops({}, table, space, frames).value() == 0.0);

  // The gradient w.r.t. each distribution is exactly cost_a / frames.
  Tensor pi = Tensor::full({space.size()}, 1.0 / space.size(), true);
  expected_flops({pi}, table, space, frames).backward();
  for (int a = 0; a < space.size(); ++a) {
    double expect = flops_of_action(space.decode(a), table) / frames;
    CHECK(pi.grad()[static_cast<std::size_t>(a)] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("action space decodes resolutions then skips") {
  ActionSpace space;
  CHECK(space.size() == 7);
  CHECK(space.max_skip() == 4);
  CHECK(space.decode(0) == PolicyAction::resolution(0));
  CHECK(space.decode(3) == PolicyAction::resolution(3));
  CHECK(space.decode(4) == PolicyAction::skip(1));
  CHECK(space.decode(6) == PolicyAction::skip(4));
  CHECK_THROWS(space.decode(7));
  CHECK_THROWS(space.decode(-1));
  for (int a = 0; a < space.size(); ++a) {
    CHECK(space.encode(space.decode(a)) == a);
  }
  CHECK_THROWS(space.encode(PolicyAction::skip(3)));
}

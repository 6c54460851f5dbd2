#include "doctest.h"

#include <cmath>
#include <vector>

#include "adares/backbones.hpp"
#include "adares/rng.hpp"
#include "adares/tensor.hpp"
#include "test_util.hpp"

using namespace adares;

namespace {

Tensor random_frame(int size, Rng& rng) {
  std::vector<double> values(static_cast<std::size_t>(size) * size);
  for (auto& v : values) {
    v = rng.uniform(-1.0, 1.0);
  }
  return Tensor::from_values({1, 1, size, size}, std::move(values));
}

// Wrap-padded separable [1,2,1]/4 blur followed by half-pixel-center
// bilinear resampling, reimplemented from scratch.
std::vector<double> naive_antialiased_resize(const std::vector<double>& in, int size,
                                             int target) {
  std::vector<double> rows(in.size()), blurred(in.size());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int l = (x + size - 1) % size, r = (x + 1) % size;
      rows[static_cast<std::size_t>(y) * size + x] =
          0.25 * in[static_cast<std::size_t>(y) * size + l] +
          0.5 * in[static_cast<std::size_t>(y) * size + x] +
          0.25 * in[static_cast<std::size_t>(y) * size + r];
    }
  }
  for (int y = 0; y < size; ++y) {
    int u = (y + size - 1) % size, d = (y + 1) % size;
    for (int x = 0; x < size; ++x) {
      blurred[static_cast<std::size_t>(y) * size + x] =
          0.25 * rows[static_cast<std::size_t>(u) * size + x] +
          0.5 * rows[static_cast<std::size_t>(y) * size + x] +
          0.25 * rows[static_cast<std::size_t>(d) * size + x];
    }
  }
  std::vector<double> out(static_cast<std::size_t>(target) * target);
  for (int oy = 0; oy < target; ++oy) {
    double sy = (oy + 0.5) * size / static_cast<double>(target) - 0.5;
    if (sy < 0.0) sy = 0.0;
    int y0 = std::min(static_cast<int>(sy), size - 1);
    int y1 = std::min(y0 + 1, size - 1);
    double wy = sy - y0;
    for (int ox = 0; ox < target; ++ox) {
      double sx = (ox + 0.5) * size / static_cast<double>(target) - 0.5;
      if (sx < 0.0) sx = 0.0;
      int x0 = std::min(static_cast<int>(sx), size - 1);
      int x1 = std::min(x0 + 1, size - 1);
      double wx = sx - x0;
      double top = (1.0 - wx) * blurred[static_cast<std::size_t>(y0) * size + x0] +
                   wx * blurred[static_cast<std::size_t>(y0) * size + x1];
      double bot = (1.0 - wx) * blurred[static_cast<std::size_t>(y1) * size + x0] +
                   wx * blurred[static_cast<std::size_t>(y1) * size + x1];
      out[static_cast<std::size_t>(oy) * target + ox] = (1.0 - wy) * top + wy * bot;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("resolution ladder exposes strictly decreasing sizes") {
  ResolutionLadder ladder;
  CHECK(ladder.levels() == 4);
  CHECK(ladder.base() == 32);
  CHECK(ladder.size(0) == 32);
  CHECK(ladder.size(1) == 24);
  CHECK(ladder.size(2) == 16);
  CHECK(ladder.size(3) == 8);
  CHECK_THROWS(ladder.size(4));
  CHECK_THROWS(ladder.size(-1));
}

TEST_CASE("resize_frame is the identity at base and block means at divisible levels") {
  Rng rng(17);
  ResolutionLadder ladder;
  Tensor frame = random_frame(32, rng);

  CHECK(resize_frame(frame, ladder, 0).values() == frame.values());

  Tensor half = resize_frame(frame, ladder, 2);
  REQUIRE(half.shape() == std::vector<int>{1, 1, 16, 16});
  CHECK(half.values() == avg_pool2d(frame, 2).values());

  Tensor eighth = resize_frame(frame, ladder, 3);
  REQUIRE(eighth.shape() == std::vector<int>{1, 1, 8, 8});
  CHECK(eighth.values() == avg_pool2d(frame, 4).values());

  CHECK_THROWS(resize_frame(Tensor::zeros({1, 1, 16, 16}), ladder, 0));
  CHECK_THROWS(resize_frame(Tensor::zeros({2, 1, 32, 32}), ladder, 0));
}

TEST_CASE("fractional resize blurs before resampling") {
  Rng rng(23);
  ResolutionLadder ladder;
  Tensor frame = random_frame(32, rng);
  Tensor resized = resize_frame(frame, ladder, 1);
  REQUIRE(resized.shape() == std::vector<int>{1, 1, 24, 24});
  auto ref = naive_antialiased_resize(frame.values(), 32, 24);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(resized.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("pixel-alternating patterns vanish at the fractional level") {
  // A pure Nyquist pattern (sign flips every pixel) rides on a constant
  // offset. The downscale must keep the offset and erase the alternation, so
  // the 24px view carries no trace of the pattern.
  ResolutionLadder ladder;
  std::vector<double> values(32 * 32);
  const double dc = 0.7;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      values[static_cast<std::size_t>(y) * 32 + x] = dc + ((x + y) % 2 == 0 ? 1.0 : -1.0);
    }
  }
  Tensor frame = Tensor::from_values({1, 1, 32, 32}, std::move(values));
  auto resized = resize_frame(frame, ladder, 1).values();
  for (double v : resized) {
    CHECK(v == doctest::Approx(dc).epsilon(1e-9));
  }
  // Row-alternating and column-alternating patterns die the same way.
  for (bool rows : {true, false}) {
    std::vector<double> alt(32 * 32);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        alt[static_cast<std::size_t>(y) * 32 + x] = ((rows ? y : x) % 2 == 0) ? 1.0 : -1.0;
      }
    }
    auto out = resize_frame(Tensor::from_values({1, 1, 32, 32}, std::move(alt)), ladder, 1)
                   .values();
    for (double v : out) {
      CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("backbone initialization is deterministic per stream") {
  BackboneSpec spec = default_backbone_specs(ResolutionLadder{})[2];
  Rng a(9), b(9), c(10);
  BackboneParams pa = init_backbone_params(spec, 6, a);
  BackboneParams pb = init_backbone_params(spec, 6, b);
  BackboneParams pc = init_backbone_params(spec, 6, c);
  REQUIRE(pa.stages.size() == spec.stages.size());
  for (std::size_t i = 0; i < pa.stages.size(); ++i) {
    CHECK(pa.stages[i].weight.values() == pb.stages[i].weight.values());
    CHECK(pa.stages[i].bias.values() == pb.stages[i].bias.values());
  }
  CHECK(pa.head_weight.values() == pb.head_weight.values());
  CHECK(pa.head_weight.values() != pc.head_weight.values());

  // Parameter shapes follow the spec.
  CHECK(pa.stages[0].weight.shape() == std::vector<int>{8, 1, 3, 3});
  CHECK(pa.stages[1].weight.shape() == std::vector<int>{16, 8, 3, 3});
  CHECK(pa.head_weight.shape() == std::vector<int>{6, spec.feature_dim()});
}

TEST_CASE("backbone forward pieces compose") {
  Rng rng(31);
  BackboneSpec spec = default_backbone_specs(ResolutionLadder{})[2];
  BackboneParams params = init_backbone_params(spec, 6, rng);
  Tensor frame = random_frame(16, rng);

  Tensor features = backbone_features(spec, params, frame);
  REQUIRE(features.shape() == std::vector<int>{spec.feature_dim()});
  Tensor logits = head_logits(params, features);
  REQUIRE(logits.shape() == std::vector<int>{6});
  CHECK(backbone_logits(spec, params, frame).values() == logits.values());
}

TEST_CASE("default specs cover the three dedicated levels") {
  auto specs = default_backbone_specs(ResolutionLadder{});
  REQUIRE(specs.size() == 3);
  CHECK(specs[0].name == "psi0");
  CHECK(specs[0].input_size == 32);
  CHECK(specs[1].input_size == 24);
  CHECK(specs[2].input_size == 16);
  CHECK(specs[0].feature_dim() == 32);
  CHECK_THROWS(default_backbone_specs(ResolutionLadder{{32, 16}}));
}

TEST_CASE("finite differences validate the backbone gradient") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 700);
    BackboneSpec tiny{"tiny", 8, 1, {{4, 2, false}, {6, 2, false}}};
    BackboneParams params = init_backbone_params(tiny, 3, rng);
    Tensor frame = random_frame(8, rng);

    std::vector<Tensor> leaves{frame};
    for (auto& stage : params.stages) {
      leaves.push_back(stage.weight);
      leaves.push_back(stage.bias);
    }
    leaves.push_back(params.head_weight);
    leaves.push_back(params.head_bias);

    int label = static_cast<int>(seed % 3);
    auto loss = [&]() {
      return softmax_cross_entropy(backbone_logits(tiny, params, frame), label);
    };
    auto report = testutil::fd_check(leaves, loss);
    INFO("seed ", seed, " max_rel ", report.max_rel);
    CHECK(report.max_rel < 1e-4);
  }
}

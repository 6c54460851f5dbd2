#include "adares/backbones.hpp"

#include <cmath>
#include <stdexcept>

namespace adares {

int ResolutionLadder::size(int level) const {
  if (level < 0 || level >= levels()) {
    throw std::out_of_range("resolution ladder: level " + std::to_string(level) +
                            " out of range");
  }
  return sizes[static_cast<std::size_t>(level)];
}

namespace {

// Separable half-band blur ([1,2,1]/4, wrap padding). Its frequency response
// is zero at Nyquist, so pixel-alternating patterns vanish before the
// fractional resample below can alias them back in. Frames are inputs, never
// parameters, so this runs on raw values.
Tensor halfband_blur(const Tensor& frame) {
  const int channels = static_cast<int>(frame.dim(1));
  const int height = static_cast<int>(frame.dim(2));
  const int width = static_cast<int>(frame.dim(3));
  const auto& src = frame.values();
  std::vector<double> rows(src.size());
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < height; ++y) {
      const std::size_t row = (static_cast<std::size_t>(c) * height + y) * width;
      for (int x = 0; x < width; ++x) {
        int left = (x + width - 1) % width;
        int right = (x + 1) % width;
        rows[row + static_cast<std::size_t>(x)] =
            0.25 * src[row + static_cast<std::size_t>(left)] +
            0.5 * src[row + static_cast<std::size_t>(x)] +
            0.25 * src[row + static_cast<std::size_t>(right)];
      }
    }
  }
  std::vector<double> out(src.size());
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < height; ++y) {
      int up = (y + height - 1) % height;
      int down = (y + 1) % height;
      const std::size_t plane = static_cast<std::size_t>(c) * height;
      for (int x = 0; x < width; ++x) {
        out[(plane + y) * width + static_cast<std::size_t>(x)] =
            0.25 * rows[(plane + up) * width + static_cast<std::size_t>(x)] +
            0.5 * rows[(plane + y) * width + static_cast<std::size_t>(x)] +
            0.25 * rows[(plane + down) * width + static_cast<std::size_t>(x)];
      }
    }
  }
  return Tensor::from_values({1, channels, height, width}, std::move(out));
}

}  // namespace

Tensor resize_frame(const Tensor& frame, const ResolutionLadder& ladder, int level) {
  if (frame.ndim() != 4 || frame.dim(0) != 1) {
    throw std::invalid_argument("resize_frame: expected [1,C,H,W] input");
  }
  int base = static_cast<int>(frame.dim(2));
  if (frame.dim(3) != base || base != ladder.base()) {
    throw std::invalid_argument("resize_frame: input must be square at the base resolution");
  }
  int target = ladder.size(level);
  if (target == base) {
    return frame;
  }
  if (base % target == 0) {
    return avg_pool2d(frame, base / target);
  }
  return bilinear_resize(halfband_blur(frame), target, target);
}

std::vector<std::pair<std::string, Tensor>> BackboneParams::named(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    out.emplace_back(prefix + ".stage" + std::to_string(i) + ".weight", stages[i].weight);
    out.emplace_back(prefix + ".stage" + std::to_string(i) + ".bias", stages[i].bias);
  }
  out.emplace_back(prefix + ".head.weight", head_weight);
  out.emplace_back(prefix + ".head.bias", head_bias);
  return out;
}

namespace {

Tensor init_normal(std::vector<int> shape, double stddev, Rng& rng) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> values(static_cast<std::size_t>(n));
  for (auto& v : values) {
    v = rng.normal() * stddev;
  }
  return Tensor::from_values(std::move(shape), std::move(values), true);
}

Tensor init_zeros(std::vector<int> shape) {
  return Tensor::zeros(std::move(shape), true);
}

}  // namespace

BackboneParams init_backbone_params(const BackboneSpec& spec, int num_classes, Rng& rng) {
  if (spec.stages.empty()) {
    throw std::invalid_argument("backbone spec '" + spec.name + "' has no stages");
  }
  BackboneParams params;
  int in_ch = spec.in_channels;
  for (const auto& stage : spec.stages) {
    double stddev = std::sqrt(2.0 / (9.0 * in_ch));
    params.stages.push_back(
        {init_normal({stage.out_channels, in_ch, 3, 3}, stddev, rng),
         init_zeros({stage.out_channels})});
    in_ch = stage.out_channels;
  }
  double head_std = std::sqrt(1.0 / spec.feature_dim());
  params.head_weight = init_normal({num_classes, spec.feature_dim()}, head_std, rng);
  params.head_bias = init_zeros({num_classes});
  return params;
}

Tensor backbone_features(const BackboneSpec& spec, const BackboneParams& params,
                         const Tensor& frame) {
  if (frame.ndim() != 4 || frame.dim(1) != spec.in_channels ||
      frame.dim(2) != spec.input_size || frame.dim(3) != spec.input_size) {
    throw std::invalid_argument("backbone '" + spec.name + "': frame shape mismatch");
  }
  if (params.stages.size() != spec.stages.size()) {
    throw std::invalid_argument("backbone '" + spec.name + "': parameter count mismatch");
  }
  Tensor x = frame;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    x = conv2d(x, params.stages[i].weight, spec.stages[i].stride, 1);
    x = relu(add_channel_bias(x, params.stages[i].bias));
    if (spec.stages[i].pool_after) {
      x = avg_pool2d(x, 2);
    }
  }
  return global_avg_pool(x);
}

Tensor head_logits(const BackboneParams& params, const Tensor& features) {
  return add(matvec(params.head_weight, features), params.head_bias);
}

Tensor backbone_logits(const BackboneSpec& spec, const BackboneParams& params,
                       const Tensor& frame) {
  return head_logits(params, backbone_features(spec, params, frame));
}

std::vector<LayerCost> backbone_cost_layers(const BackboneSpec& spec, int num_classes,
                                            bool include_head) {
  std::vector<LayerCost> layers;
  int size = spec.input_size;
  int in_ch = spec.in_channels;
  for (const auto& stage : spec.stages) {
    int out = (size + 2 - 3) / stage.stride + 1;
    layers.push_back(ConvCost{3, in_ch, stage.out_channels, out, out});
    layers.push_back(ElementwiseCost{static_cast<std::int64_t>(stage.out_channels) * out * out});
    if (stage.pool_after) {
      out /= 2;
      layers.push_back(
          ElementwiseCost{static_cast<std::int64_t>(stage.out_channels) * out * out});
    }
    size = out;
    in_ch = stage.out_channels;
  }
  layers.push_back(ElementwiseCost{spec.feature_dim()});  // global average pool
  if (include_head) {
    layers.push_back(LinearCost{spec.feature_dim(), num_classes});
  }
  return layers;
}

std::vector<BackboneSpec> default_backbone_specs(const ResolutionLadder& ladder) {
  if (ladder.levels() != 4) {
    throw std::invalid_argument("default backbones expect a four-level ladder");
  }
  return {
      {"psi0", ladder.size(0), 1, {{8, 2, false}, {16, 2, false}, {32, 2, false}}},
      {"psi1", ladder.size(1), 1, {{8, 2, false}, {16, 2, false}, {24, 2, false}}},
      {"psi2", ladder.size(2), 1, {{8, 2, false}, {16, 2, false}}},
  };
}

}  // namespace adares

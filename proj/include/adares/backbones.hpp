#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adares/cost_model.hpp"
#include "adares/rng.hpp"
#include "adares/tensor.hpp"

namespace adares {

// Square frame sizes per resolution level, strictly decreasing from base.
struct ResolutionLadder {
  std::vector<int> sizes = {32, 24, 16, 8};

  int levels() const { return static_cast<int>(sizes.size()); }
  int base() const { return sizes.front(); }
  int size(int level) const;
};

// Downscales a [1,C,base,base] frame to the level's size. Integer factors use
// average pooling; non-integer ratios fall back to bilinear interpolation.
Tensor resize_frame(const Tensor& frame, const ResolutionLadder& ladder, int level);

// 3x3 convolution (padding 1) + bias + ReLU, optionally followed by 2x2
// average pooling.
struct ConvStage {
  int out_channels = 0;
  int stride = 1;
  bool pool_after = false;
};

struct BackboneSpec {
  std::string name;
  int input_size = 0;
  int in_channels = 1;
  std::vector<ConvStage> stages;

  int feature_dim() const { return stages.back().out_channels; }
};

struct ConvStageParams {
  Tensor weight;  // [out, in, 3, 3]
  Tensor bias;    // [out]
};

struct BackboneParams {
  std::vector<ConvStageParams> stages;
  Tensor head_weight;  // [num_classes, feature_dim]
  Tensor head_bias;    // [num_classes]

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

BackboneParams init_backbone_params(const BackboneSpec& spec, int num_classes, Rng& rng);

// Conv stack + global average pooling -> [feature_dim].
Tensor backbone_features(const BackboneSpec& spec, const BackboneParams& params,
                         const Tensor& frame);
Tensor head_logits(const BackboneParams& params, const Tensor& features);
Tensor backbone_logits(const BackboneSpec& spec, const BackboneParams& params,
                       const Tensor& frame);

// Layer list for analytic FLOP accounting; include_head adds the classifier.
std::vector<LayerCost> backbone_cost_layers(const BackboneSpec& spec, int num_classes,
                                            bool include_head);

// Dedicated classifiers for all ladder levels except the lowest, whose
// prediction reuses the policy's feature extractor.
std::vector<BackboneSpec> default_backbone_specs(const ResolutionLadder& ladder);

}  // namespace adares

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adares/rng.hpp"
#include "adares/tensor.hpp"

namespace adares {

// What a frame carries on top of the clutter field:
//  - Informative: the class-discriminative motif plus a bright constant
//    marker. At the fine detail scale, motifs for classes 0..2 alternate
//    every pixel and survive only the full 32px view; classes 3..5 use
//    width-2 stripes that also survive the 24px and 16px views. All of them
//    cancel in the policy's 8px view, which sees just the marker ("class
//    content is here"). At the coarse detail scale the motif is a 4x4 block
//    pattern that survives pooling down to 8px.
//  - GroupCue: a width-2 stripe motif naming the class pair (label / 2) plus
//    a dark constant marker. Readable at 16px and up; at 8px only the dark
//    marker remains. Generated only at the fine detail scale.
//  - Background: clutter only.
enum class FrameKind : std::uint8_t { Background = 0, GroupCue = 1, Informative = 2 };

// Whether class evidence requires the full resolution (fine) or survives
// pooling all the way to the policy's own 8px view (coarse).
enum class DetailScale : std::uint8_t { Fine = 0, Coarse = 1 };

struct VideoSample {
  int id = -1;
  int label = -1;
  std::vector<Tensor> frames;  // [1, 1, size, size] each, float32-quantized
  std::vector<FrameKind> kinds;

  std::vector<int> informative_indices() const {
    std::vector<int> idx;
    for (int t = 0; t < static_cast<int>(kinds.size()); ++t) {
      if (kinds[static_cast<std::size_t>(t)] == FrameKind::Informative) {
        idx.push_back(t);
      }
    }
    return idx;
  }
};

struct DatasetSpec {
  int num_classes = 6;
  int frames = 16;
  int size = 32;
  int train_per_class = 280;
  int val_per_class = 10;
  int test_per_class = 50;
  int informative_min = 1;  // informative frames per video, sampled uniformly
  int informative_max = 2;
  int redundancy = 2;  // run length of consecutive near-duplicate frames
  DetailScale detail = DetailScale::Fine;
  double clutter = 0.15;  // low-frequency field amplitude
};

struct Dataset {
  DatasetSpec spec;
  std::vector<VideoSample> train;
  std::vector<VideoSample> val;
  std::vector<VideoSample> test;
};

// Per-class video counts and the informative-frames-per-video histogram,
// over all three splits.
struct FrameStats {
  int videos = 0;
  std::vector<int> per_class;
  std::vector<int> informative_hist;  // index = informative frames in a video
  double informative_rate = 0.0;      // informative frames / total frames
};

FrameStats frame_stats(const Dataset& dataset);

// Motif patterns (+1/-1), size x size row-major, exposed so tests can
// template-match against them. coarse_motif takes a group g in 0..2. At the
// coarse detail scale the rendered class motif is fine_motif(label, size/4)
// upsampled 4x, so its 8px pooled image equals fine_motif(label, 8).
std::vector<double> fine_motif(int label, int size);
std::vector<double> coarse_motif(int group, int size);

// Fully deterministic in (spec, seed); split membership depends only on the
// split name, class, and per-class index, so resizing one split leaves the
// others' videos unchanged.
Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed);

// Compact binary container (float32 pixels); load restores generate output
// bit for bit.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace adares

#include "adares/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace adares {
namespace {

constexpr double kMotifAmp = 3.5;
constexpr double kMarker = 1.2;  // brightness offset on informative frames
constexpr double kCueAmp = 1.2;
constexpr double kCueDC = -0.8;  // full-field offset marking group-cue frames
constexpr double kPixelNoise = 0.03;

// Sum of a few low-frequency cosine waves.
void add_low_freq_field(std::vector<double>& field, int size, double amp, Rng& rng) {
  for (int k = 0; k < 3; ++k) {
    int fx = rng.uniform_int(4);
    int fy = rng.uniform_int(4);
    if (fx == 0 && fy == 0) {
      fx = 1;
    }
    double a = amp * (0.5 + 0.5 * rng.uniform());
    double phase = rng.uniform() * 2.0 * M_PI;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        field[static_cast<std::size_t>(y) * size + x] +=
            a * std::cos(2.0 * M_PI * (fx * x + fy * y) / size + phase);
      }
    }
  }
}

// Class motif at the requested detail scale. Coarse detail uses the same
// pattern family drawn with 4x4 cells, so it survives pooling to 8px.
std::vector<double> class_motif(int label, int size, DetailScale detail) {
  if (detail == DetailScale::Fine) {
    return fine_motif(label, size);
  }
  std::vector<double> small = fine_motif(label, size / 4);
  std::vector<double> motif(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      motif[static_cast<std::size_t>(y) * size + x] =
          small[static_cast<std::size_t>(y / 4) * (size / 4) + x / 4];
    }
  }
  return motif;
}

VideoSample make_video(const DatasetSpec& spec, int label, int id, Rng rng) {
  const int size = spec.size;
  const int frames = spec.frames;
  VideoSample video;
  video.id = id;
  video.label = label;
  video.kinds.assign(static_cast<std::size_t>(frames), FrameKind::Background);

  // Segment plan: the informative run opens the video, later segments are
  // separated by background runs. Frame 0 cannot be jumped over, so the class
  // signal is never lost to a skip the policy could not have seen coming;
  // redundancy inside a run is what makes skip actions worth learning.
  struct Segment {
    FrameKind kind;
    int len;
  };
  int span = spec.informative_max - spec.informative_min + 1;
  int informative = spec.informative_min + rng.uniform_int(span);
  Segment lead{FrameKind::Informative, std::min(informative, spec.redundancy)};
  std::vector<Segment> rest;
  for (int left = informative - lead.len; left > 0; left -= spec.redundancy) {
    rest.push_back({FrameKind::Informative, std::min(left, spec.redundancy)});
  }
  if (spec.detail == DetailScale::Fine) {
    rest.push_back({FrameKind::GroupCue, spec.redundancy});
  }
  for (int i = static_cast<int>(rest.size()) - 1; i > 0; --i) {
    std::swap(rest[static_cast<std::size_t>(i)],
              rest[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  }
  auto planned = [&]() {
    int total = lead.len;
    for (const auto& seg : rest) total += seg.len + 1;  // leading separator
    return total;
  };
  // Shrink the plan for short videos: the group cue goes first, then excess
  // informative frames; the lead run always keeps at least one.
  while (planned() > frames) {
    auto cue = std::find_if(rest.begin(), rest.end(),
                            [](const Segment& s) { return s.kind == FrameKind::GroupCue; });
    if (cue != rest.end()) {
      rest.erase(cue);
      continue;
    }
    if (!rest.empty()) {
      if (--rest.back().len == 0) {
        rest.pop_back();
      }
      continue;
    }
    if (lead.len <= 1) {
      break;
    }
    --lead.len;
  }
  const int n_rest = static_cast<int>(rest.size());
  std::vector<int> gap(static_cast<std::size_t>(n_rest) + 1, 0);
  for (int i = 0; i < n_rest; ++i) {
    gap[static_cast<std::size_t>(i)] = 1;
  }
  int spare = frames - planned();
  for (int i = 0; i < spare; ++i) {
    ++gap[static_cast<std::size_t>(rng.uniform_int(n_rest + 1))];
  }
  int cursor = 0;
  for (int j = 0; j < lead.len && cursor < frames; ++j) {
    video.kinds[static_cast<std::size_t>(cursor++)] = lead.kind;
  }
  for (int i = 0; i < n_rest; ++i) {
    cursor += gap[static_cast<std::size_t>(i)];
    for (int j = 0; j < rest[static_cast<std::size_t>(i)].len; ++j) {
      video.kinds[static_cast<std::size_t>(cursor++)] = rest[static_cast<std::size_t>(i)].kind;
    }
  }

  // Group pairing: cue frames reveal the class pair at the mid resolutions;
  // the pair is resolved only by the class motif, and classes 0..2 need full
  // resolution for that. Nothing class-bearing survives at 8px, which is the
  // policy's own view.
  std::vector<double> motif = class_motif(label, size, spec.detail);
  std::vector<double> cue = coarse_motif(label / 2, size);
  std::vector<double> base(static_cast<std::size_t>(size) * size, 0.0);

  for (int t = 0; t < frames; ++t) {
    bool continuation = t > 0 && video.kinds[static_cast<std::size_t>(t)] ==
                                     video.kinds[static_cast<std::size_t>(t - 1)];
    if (!continuation) {
      // The clutter field redraws at every run boundary and freezes inside a
      // run, so consecutive same-kind frames are near-duplicates: a second
      // read of a segment carries no fresh information worth paying for, and
      // no per-video signature survives for a classifier to latch onto.
      std::fill(base.begin(), base.end(), 0.0);
      add_low_freq_field(base, size, spec.clutter, rng);
    }
    std::vector<double> pixels = base;
    if (video.kinds[static_cast<std::size_t>(t)] == FrameKind::Informative) {
      for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] += kMotifAmp * motif[i] + kMarker;
      }
    } else if (video.kinds[static_cast<std::size_t>(t)] == FrameKind::GroupCue) {
      // The DC offset tells the 8px policy view that this frame is a group
      // cue; which group it shows still needs a mid-resolution read.
      for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] += kCueAmp * cue[i] + kCueDC;
      }
    }
    for (auto& v : pixels) {
      v += kPixelNoise * rng.normal();
      v = static_cast<double>(static_cast<float>(v));  // container precision
    }
    video.frames.push_back(Tensor::from_values({1, 1, size, size}, std::move(pixels)));
  }
  return video;
}

constexpr std::uint32_t kMagic = 0x41445356;  // "ADSV"
constexpr std::uint32_t kFormatVersion = 2;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_f64(std::ofstream& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof(bits));
  out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
}

double read_f64(std::ifstream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void write_split(std::ofstream& out, const std::vector<VideoSample>& split) {
  for (const auto& video : split) {
    write_u32(out, static_cast<std::uint32_t>(video.id));
    write_u32(out, static_cast<std::uint32_t>(video.label));
    for (FrameKind kind : video.kinds) {
      char c = static_cast<char>(kind);
      out.write(&c, 1);
    }
    for (const auto& frame : video.frames) {
      for (double v : frame.values()) {
        float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
      }
    }
  }
}

std::vector<VideoSample> read_split(std::ifstream& in, int count, const DatasetSpec& spec) {
  std::vector<VideoSample> split;
  split.reserve(static_cast<std::size_t>(count));
  const std::size_t pixels = static_cast<std::size_t>(spec.size) * spec.size;
  for (int i = 0; i < count; ++i) {
    VideoSample video;
    video.id = static_cast<int>(read_u32(in));
    video.label = static_cast<int>(read_u32(in));
    video.kinds.resize(static_cast<std::size_t>(spec.frames));
    for (auto& kind : video.kinds) {
      char c = 0;
      in.read(&c, 1);
      kind = static_cast<FrameKind>(c);
    }
    for (int t = 0; t < spec.frames; ++t) {
      std::vector<double> values(pixels);
      for (auto& v : values) {
        float f = 0.0f;
        in.read(reinterpret_cast<char*>(&f), sizeof(f));
        v = static_cast<double>(f);
      }
      video.frames.push_back(Tensor::from_values({1, 1, spec.size, spec.size}, std::move(values)));
    }
    if (!in) {
      throw std::runtime_error("dataset: truncated file");
    }
    split.push_back(std::move(video));
  }
  return split;
}

}  // namespace

std::vector<double> fine_motif(int label, int size) {
  if (label < 0 || label > 5) {
    throw std::out_of_range("fine_motif: label must be in [0, 6)");
  }
  std::vector<double> motif(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double s = 0.0;
      switch (label) {
        case 0: s = (x % 2 == 0) ? 1.0 : -1.0; break;
        case 1: s = (y % 2 == 0) ? 1.0 : -1.0; break;
        case 2: s = ((x + y) % 2 == 0) ? 1.0 : -1.0; break;
        case 3: s = (x % 4 < 2) ? 1.0 : -1.0; break;
        case 4: s = (y % 4 < 2) ? 1.0 : -1.0; break;
        case 5: s = ((x / 2 + y / 2) % 2 == 0) ? 1.0 : -1.0; break;
        default: break;
      }
      motif[static_cast<std::size_t>(y) * size + x] = s;
    }
  }
  return motif;
}

std::vector<double> coarse_motif(int group, int size) {
  if (group < 0 || group > 2) {
    throw std::out_of_range("coarse_motif: group must be in [0, 3)");
  }
  // Width-2 stripe family: survives 2x2 pooling, zero over any aligned 4x4
  // window, so groups are readable at the mid resolutions but invisible in
  // the policy's 8px view.
  std::vector<double> motif(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      bool positive = false;
      switch (group) {
        case 0: positive = x % 4 < 2; break;
        case 1: positive = y % 4 < 2; break;
        case 2: positive = (x / 2 + y / 2) % 2 == 0; break;
        default: break;
      }
      motif[static_cast<std::size_t>(y) * size + x] = positive ? 1.0 : -1.0;
    }
  }
  return motif;
}

FrameStats frame_stats(const Dataset& dataset) {
  FrameStats stats;
  stats.per_class.assign(static_cast<std::size_t>(std::max(dataset.spec.num_classes, 0)), 0);
  int informative_total = 0;
  int frame_total = 0;
  auto visit = [&](const std::vector<VideoSample>& split) {
    for (const auto& video : split) {
      ++stats.videos;
      if (video.label >= 0 && video.label < static_cast<int>(stats.per_class.size())) {
        ++stats.per_class[static_cast<std::size_t>(video.label)];
      }
      int count = static_cast<int>(video.informative_indices().size());
      if (count >= static_cast<int>(stats.informative_hist.size())) {
        stats.informative_hist.resize(static_cast<std::size_t>(count) + 1, 0);
      }
      ++stats.informative_hist[static_cast<std::size_t>(count)];
      informative_total += count;
      frame_total += static_cast<int>(video.kinds.size());
    }
  };
  visit(dataset.train);
  visit(dataset.val);
  visit(dataset.test);
  stats.informative_rate =
      frame_total > 0 ? static_cast<double>(informative_total) / frame_total : 0.0;
  return stats;
}

Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2 || spec.num_classes > 6) {
    throw std::invalid_argument("generate_dataset: the motif family covers 2..6 classes");
  }
  if (spec.frames < 4) {
    throw std::invalid_argument("generate_dataset: need at least 4 frames per video");
  }
  if (spec.size != 32) {
    throw std::invalid_argument("generate_dataset: frame size is fixed at 32");
  }
  if (spec.informative_min < 1 || spec.informative_max < spec.informative_min ||
      spec.informative_max > spec.frames) {
    throw std::invalid_argument("generate_dataset: bad informative-frame range");
  }
  if (spec.redundancy < 1) {
    throw std::invalid_argument("generate_dataset: redundancy run length must be >= 1");
  }
  if (spec.clutter < 0.0) {
    throw std::invalid_argument("generate_dataset: clutter amplitude must be >= 0");
  }
  Dataset dataset;
  dataset.spec = spec;
  Rng root(seed);
  int next_id = 0;
  auto fill = [&](std::vector<VideoSample>& out, int per_class, std::uint64_t split_code) {
    for (int c = 0; c < spec.num_classes; ++c) {
      for (int i = 0; i < per_class; ++i) {
        std::uint64_t stream =
            (split_code * 1000003ULL + static_cast<std::uint64_t>(c)) * 1000003ULL +
            static_cast<std::uint64_t>(i);
        out.push_back(make_video(spec, c, next_id++, root.fork(stream)));
      }
    }
  };
  fill(dataset.train, spec.train_per_class, 1);
  fill(dataset.val, spec.val_per_class, 2);
  fill(dataset.test, spec.test_per_class, 3);
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("dataset: cannot open " + path + " for writing");
  }
  write_u32(out, kMagic);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.num_classes));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.frames));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.size));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.train_per_class));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.val_per_class));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.test_per_class));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.informative_min));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.informative_max));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.redundancy));
  write_u32(out, static_cast<std::uint32_t>(dataset.spec.detail));
  write_f64(out, dataset.spec.clutter);
  write_u32(out, static_cast<std::uint32_t>(dataset.train.size()));
  write_u32(out, static_cast<std::uint32_t>(dataset.val.size()));
  write_u32(out, static_cast<std::uint32_t>(dataset.test.size()));
  write_split(out, dataset.train);
  write_split(out, dataset.val);
  write_split(out, dataset.test);
  if (!out) {
    throw std::runtime_error("dataset: write to " + path + " failed");
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("dataset: cannot open " + path);
  }
  if (read_u32(in) != kMagic) {
    throw std::runtime_error("dataset: " + path + " is not a dataset file");
  }
  std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("dataset: unsupported format version " + std::to_string(version));
  }
  Dataset dataset;
  dataset.spec.num_classes = static_cast<int>(read_u32(in));
  dataset.spec.frames = static_cast<int>(read_u32(in));
  dataset.spec.size = static_cast<int>(read_u32(in));
  dataset.spec.train_per_class = static_cast<int>(read_u32(in));
  dataset.spec.val_per_class = static_cast<int>(read_u32(in));
  dataset.spec.test_per_class = static_cast<int>(read_u32(in));
  dataset.spec.informative_min = static_cast<int>(read_u32(in));
  dataset.spec.informative_max = static_cast<int>(read_u32(in));
  dataset.spec.redundancy = static_cast<int>(read_u32(in));
  dataset.spec.detail = static_cast<DetailScale>(read_u32(in));
  dataset.spec.clutter = read_f64(in);
  int n_train = static_cast<int>(read_u32(in));
  int n_val = static_cast<int>(read_u32(in));
  int n_test = static_cast<int>(read_u32(in));
  if (!in) {
    throw std::runtime_error("dataset: truncated header in " + path);
  }
  dataset.train = read_split(in, n_train, dataset.spec);
  dataset.val = read_split(in, n_val, dataset.spec);
  dataset.test = read_split(in, n_test, dataset.spec);
  return dataset;
}

}  // namespace adares

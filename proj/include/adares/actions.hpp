#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace adares {

// A per-frame routing decision: process at one of L resolution levels, or
// exclude the current frame plus the next count-1 frames.
struct PolicyAction {
  enum class Kind { Resolution, Skip };

  Kind kind = Kind::Resolution;
  int level = 0;       // valid when kind == Resolution
  int skip_count = 0;  // valid when kind == Skip

  static PolicyAction resolution(int level) { return {Kind::Resolution, level, 0}; }
  static PolicyAction skip(int count) { return {Kind::Skip, 0, count}; }

  bool is_skip() const { return kind == Kind::Skip; }

  bool operator==(const PolicyAction& other) const {
    return kind == other.kind && level == other.level && skip_count == other.skip_count;
  }
};

// The discrete decision set: L resolution choices followed by M skip lengths.
// Raw index a decodes as resolution a for a < L, skip(skips[a - L]) otherwise.
struct ActionSpace {
  int levels = 4;
  std::vector<int> skip_counts{1, 2, 4};

  int size() const { return levels + static_cast<int>(skip_counts.size()); }
  int max_skip() const {
    int m = 0;
    for (int s : skip_counts) m = m > s ? m : s;
    return m;
  }

  PolicyAction decode(int index) const {
    if (index < 0 || index >= size()) {
      throw std::out_of_range("ActionSpace::decode: index " + std::to_string(index) +
                              " out of range [0, " + std::to_string(size()) + ")");
    }
    if (index < levels) return PolicyAction::resolution(index);
    return PolicyAction::skip(skip_counts[static_cast<std::size_t>(index - levels)]);
  }

  int encode(const PolicyAction& a) const {
    if (!a.is_skip()) return a.level;
    for (std::size_t i = 0; i < skip_counts.size(); ++i) {
      if (skip_counts[i] == a.skip_count) return levels + static_cast<int>(i);
    }
    throw std::invalid_argument("ActionSpace::encode: unknown skip count " +
                                std::to_string(a.skip_count));
  }
};

}  // namespace adares

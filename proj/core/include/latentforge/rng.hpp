#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace latentforge {

// Counter-based pseudorandom generator (Philox-4x32-10). The same seed
// yields the same stream on every platform, and split() derives an
// independent child stream from a caller-chosen id without disturbing the
// parent, so nested experiments stay reproducible when one stage adds or
// removes draws.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Child stream for a named purpose. Children with distinct ids, and the
  // parent itself, never share counter/key pairs.
  Rng split(uint64_t stream_id) const;

  uint32_t next_u32();
  uint64_t next_u64();

  // Uniform in [0, 1).
  float uniform();

  // Standard normal via Box-Muller.
  float normal();

  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n);

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  Rng() = default;
  void refill();

  std::array<uint32_t, 2> key_{};
  uint64_t counter_ = 0;
  std::array<uint32_t, 4> block_{};
  int block_pos_ = 4;  // empty, first use refills
  bool have_spare_normal_ = false;
  float spare_normal_ = 0.0f;
};

}  // namespace latentforge

#include "latentforge/rng.hpp"

#include <cmath>

#include "latentforge/errors.hpp"

namespace latentforge {
namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<uint32_t, 4>& ctr, std::array<uint32_t, 2>& key) {
  uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * ctr[0];
  uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * ctr[2];
  uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
  uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += kWeyl0;
  key[1] += kWeyl1;
}

inline std::array<uint32_t, 4> philox10(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
  for (int i = 0; i < 10; ++i) philox_round(ctr, key);
  return ctr;
}

}  // namespace

Rng::Rng(uint64_t seed) {
  key_ = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
}

Rng Rng::split(uint64_t stream_id) const {
  // Run the PRF on a lane pattern ordinary generation never uses
  // (generation keeps lanes 2 and 3 at zero), so a child key cannot
  // collide with the parent's output stream.
  std::array<uint32_t, 4> ctr = {
      static_cast<uint32_t>(stream_id), static_cast<uint32_t>(stream_id >> 32),
      0x53504C49u, 0x54544552u};
  std::array<uint32_t, 4> out = philox10(ctr, key_);
  Rng child;
  child.key_ = {out[0], out[1]};
  return child;
}

void Rng::refill() {
  std::array<uint32_t, 4> ctr = {
      static_cast<uint32_t>(counter_), static_cast<uint32_t>(counter_ >> 32), 0u, 0u};
  block_ = philox10(ctr, key_);
  ++counter_;
  block_pos_ = 0;
}

uint32_t Rng::next_u32() {
  if (block_pos_ >= 4) refill();
  return block_[block_pos_++];
}

uint64_t Rng::next_u64() {
  uint64_t lo = next_u32();
  uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

float Rng::uniform() {
  // 24 high bits, exact in f32.
  return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f;
}

float Rng::normal() {
  if (have_spare_normal_) {
    have_spare_normal_ = false;
    return spare_normal_;
  }
  float u1 = 1.0f - uniform();  // (0, 1], log stays finite
  float u2 = uniform();
  float r = std::sqrt(-2.0f * std::log(u1));
  float a = 6.2831853071795864f * u2;
  spare_normal_ = r * std::sin(a);
  have_spare_normal_ = true;
  return r * std::cos(a);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw ContractViolation("uniform_int: n must be positive");
  // Multiply-shift map of a 32-bit draw onto [0, n).
  uint64_t m = static_cast<uint64_t>(next_u32()) * static_cast<uint64_t>(n);
  return static_cast<int>(m >> 32);
}

}  // namespace latentforge

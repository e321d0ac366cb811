#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "latentforge/tensor.hpp"

namespace latentforge {

// Binary container for model/adapter weights. Layout, all integers and
// floats little-endian:
//   "LFCK" | version u32 | d u32 | L u32 | vocab u32 | maxlen u32 |
//   tensor count u32 | per tensor: name_len u32, name bytes, rank u32,
//   dims u32[rank], payload f32[prod(dims)]
// Round-trips are bit-exact; readers reject bad magic, unknown versions and
// truncated payloads.
struct CheckpointHeader {
  uint32_t version = 1;
  uint32_t d = 0;
  uint32_t n_layers = 0;
  uint32_t vocab = 0;
  uint32_t maxlen = 0;
};

struct LoadedCheckpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const CheckpointHeader& header,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors);

LoadedCheckpoint read_checkpoint(const std::string& path);

}  // namespace latentforge

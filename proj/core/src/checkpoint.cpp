#include "latentforge/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "latentforge/errors.hpp"

namespace latentforge {
namespace {

constexpr char kMagic[4] = {'L', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t take_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ParseError("checkpoint truncated while reading u32");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, const float* data, int64_t count) {
  for (int64_t i = 0; i < count; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    put_u32(os, bits);
  }
}

void take_f32(std::istream& is, float* data, int64_t count) {
  for (int64_t i = 0; i < count; ++i) {
    uint32_t bits = take_u32(is);
    std::memcpy(&data[i], &bits, 4);
  }
}

}  // namespace

const Tensor& LoadedCheckpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw LookupError("checkpoint has no tensor named '" + name + "'");
}

bool LoadedCheckpoint::has(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

void write_checkpoint(const std::string& path, const CheckpointHeader& header,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  put_u32(os, header.version);
  put_u32(os, header.d);
  put_u32(os, header.n_layers);
  put_u32(os, header.vocab);
  put_u32(os, header.maxlen);
  put_u32(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (t == nullptr) throw ContractViolation("write_checkpoint: null tensor '" + name + "'");
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<uint32_t>(t->rank()));
    for (int i = 0; i < t->rank(); ++i) put_u32(os, static_cast<uint32_t>(t->dim(i)));
    put_f32(os, t->data(), t->size());
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("'" + path + "' is not a checkpoint (bad magic)");
  LoadedCheckpoint out;
  out.header.version = take_u32(is);
  if (out.header.version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(out.header.version));
  out.header.d = take_u32(is);
  out.header.n_layers = take_u32(is);
  out.header.vocab = take_u32(is);
  out.header.maxlen = take_u32(is);
  uint32_t count = take_u32(is);
  out.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = take_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw ParseError("checkpoint truncated in tensor name");
    uint32_t rank = take_u32(is);
    if (rank > 8) throw ParseError("implausible tensor rank in checkpoint");
    std::vector<int> shape(rank);
    for (uint32_t k = 0; k < rank; ++k) shape[k] = static_cast<int>(take_u32(is));
    Tensor t(shape);
    take_f32(is, t.data(), t.size());
    out.tensors.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace latentforge

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "latentforge/rng.hpp"

namespace latentforge {

// Allocator that leaves new floats default-initialized (i.e. untouched)
// so op outputs that are fully overwritten skip the zero-fill pass.
// Tensor keeps its documented zero-fill by filling explicitly.
template <class T>
struct NoInitAlloc : std::allocator<T> {
  NoInitAlloc() = default;
  template <class U>
  NoInitAlloc(const NoInitAlloc<U>&) {}
  template <class U>
  struct rebind {
    using other = NoInitAlloc<U>;
  };
  template <class U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

// Dense row-major float32 tensor. Rank 0 (scalar), 1 (vector) and
// 2 (matrix) cover everything this library needs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled

  static Tensor scalar(float v);
  static Tensor zeros(std::vector<int> shape);
  static Tensor uninit(std::vector<int> shape);  // contents unspecified
  static Tensor full(std::vector<int> shape, float v);
  static Tensor from(std::vector<int> shape, std::vector<float> values);
  static Tensor randn(std::vector<int> shape, Rng& rng, float stddev = 1.0f);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const;
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool defined() const { return !shape_.empty() || !data_.empty(); }

  // Rank-2 accessors; throw on other ranks.
  int rows() const;
  int cols() const;

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  float& at(int r, int c);
  float at(int r, int c) const;
  float item() const;  // rank-0/size-1 only

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(float v);
  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<float, NoInitAlloc<float>> data_;
};

}  // namespace latentforge

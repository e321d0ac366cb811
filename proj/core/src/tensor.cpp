#include "latentforge/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <utility>

#include "latentforge/errors.hpp"

namespace latentforge {
namespace {

int64_t checked_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ContractViolation("tensor dimension must be non-negative");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(checked_size(shape_)), 0.0f);
}

Tensor Tensor::scalar(float v) {
  Tensor t(std::vector<int>{});
  t.data_.assign(1, v);
  return t;
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::uninit(std::vector<int> shape) {
  Tensor t;
  int64_t n = checked_size(shape);
  t.shape_ = std::move(shape);
  t.data_.resize(static_cast<size_t>(n));
  return t;
}

Tensor Tensor::full(std::vector<int> shape, float v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<float> values) {
  Tensor t;
  if (checked_size(shape) != static_cast<int64_t>(values.size()))
    throw ContractViolation("from: value count does not match shape");
  t.shape_ = std::move(shape);
  t.data_.assign(values.begin(), values.end());
  return t;
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, float stddev) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * stddev;
  return t;
}

int Tensor::dim(int i) const {
  if (i < 0 || i >= rank()) throw ContractViolation("dim: index out of range");
  return shape_[static_cast<size_t>(i)];
}

int Tensor::rows() const {
  if (rank() != 2) throw ContractViolation("rows: tensor is not rank 2, shape " + shape_str());
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw ContractViolation("cols: tensor is not rank 2, shape " + shape_str());
  return shape_[1];
}

float& Tensor::at(int r, int c) {
  if (rank() != 2 || r < 0 || r >= shape_[0] || c < 0 || c >= shape_[1])
    throw ContractViolation("at(" + std::to_string(r) + "," + std::to_string(c) +
                            "): out of range for shape " + shape_str());
  return data_[static_cast<size_t>(r) * shape_[1] + c];
}

float Tensor::at(int r, int c) const { return const_cast<Tensor*>(this)->at(r, c); }

float Tensor::item() const {
  if (size() != 1) throw ContractViolation("item: tensor has " + std::to_string(size()) + " elements");
  return data_[0];
}

bool Tensor::all_finite() const {
  // 0*x is NaN exactly when x is NaN or +-Inf, and NaN poisons the sum;
  // one vectorized pass instead of a per-element isfinite.
  Eigen::Map<const Eigen::ArrayXf> a(data_.data(), static_cast<Eigen::Index>(data_.size()));
  float probe = (a * 0.0f).sum();
  return probe == 0.0f;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace latentforge

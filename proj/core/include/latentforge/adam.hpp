#pragma once

#include <cstdint>
#include <vector>

#include "latentforge/tensor.hpp"

namespace latentforge {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with bias correction. One state owns first/second moments for a
// fixed list of parameter shapes; step() must be called with parameters in
// that same order every time. A null gradient entry means "gradient is
// zero" and still decays the moments.
class AdamState {
 public:
  AdamState(const std::vector<Tensor*>& params, AdamConfig cfg = {});

  void step(const std::vector<Tensor*>& params,
            const std::vector<const Tensor*>& grads, float lr);

  int64_t step_count() const { return t_; }
  const Tensor& first_moment(size_t i) const { return m_.at(i); }
  const Tensor& second_moment(size_t i) const { return v_.at(i); }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace latentforge

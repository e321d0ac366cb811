#include "latentforge/adam.hpp"

#include <Eigen/Core>
#include <cmath>

#include "latentforge/errors.hpp"

namespace latentforge {

AdamState::AdamState(const std::vector<Tensor*>& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    if (p == nullptr) throw ContractViolation("AdamState: null parameter");
    m_.push_back(Tensor::zeros(p->shape()));
    v_.push_back(Tensor::zeros(p->shape()));
  }
}

void AdamState::step(const std::vector<Tensor*>& params,
                     const std::vector<const Tensor*>& grads, float lr) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ContractViolation("adam step: parameter/gradient count does not match state");
  ++t_;
  double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (!p.same_shape(m_[i]))
      throw ContractViolation("adam step: parameter " + std::to_string(i) + " shape changed");
    const Tensor* g = grads[i];
    if (g != nullptr && !g->same_shape(p))
      throw ContractViolation("adam step: gradient " + std::to_string(i) + " shape mismatch");
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    float bc1f = static_cast<float>(bc1), bc2f = static_cast<float>(bc2);
    Eigen::Map<Eigen::ArrayXf> ma(m.data(), m.size()), va(v.data(), v.size()),
        pa(p.data(), p.size());
    if (g) {
      Eigen::Map<const Eigen::ArrayXf> ga(g->data(), g->size());
      ma = cfg_.beta1 * ma + (1.0f - cfg_.beta1) * ga;
      va = cfg_.beta2 * va + (1.0f - cfg_.beta2) * ga.square();
    } else {
      ma *= cfg_.beta1;
      va *= cfg_.beta2;
    }
    pa -= lr * (ma / bc1f) / ((va / bc2f).sqrt() + cfg_.eps);
  }
}

}  // namespace latentforge

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latentforge/tensor.hpp"

namespace latentforge {

// One layer's sparse autoencoder. Latents gate through JumpReLU: a latent
// passes its pre-activation unchanged when strictly above its threshold and
// is zero otherwise.
struct SaeParams {
  int layer = 0;  // 1-based residual-stream layer this SAE reads
  int d = 0, m = 0;
  Tensor w_enc;  // d x m
  Tensor b_enc;  // m
  Tensor w_dec;  // m x d
  Tensor b_dec;  // d
  Tensor theta;  // m, all > 0
};

struct SaeTrainConfig {
  int epochs = 200;
  float lr = 1e-3f;
  float lambda_s = 0.02f;  // weight of the expected-L0 term
  int expansion = 4;       // m = expansion * d
  uint64_t seed = 0;
  int batch = 64;
  float bandwidth = 0.02f;    // straight-through kernel width
  float theta_init = 0.03f;   // initial jump threshold
};

Tensor encode_pre(const SaeParams& sae, const Tensor& a);    // [d] -> [m]
Tensor encode_post(const SaeParams& sae, const Tensor& a);   // [d] -> [m]
Tensor decode(const SaeParams& sae, const Tensor& z_post);   // [m] -> [d]

// Batch variants over row-stacked activations.
Tensor encode_pre_batch(const SaeParams& sae, const Tensor& acts);   // [n,d] -> [n,m]
Tensor encode_post_batch(const SaeParams& sae, const Tensor& acts);  // [n,d] -> [n,m]

// MSE + lambda_s * expected-L0 with rectangle-kernel straight-through
// gradients; decoder rows renormalized to unit norm after every step.
SaeParams train_sae(const Tensor& activations, const SaeTrainConfig& cfg, int layer = 0);

// 1 - ||a - decode(encode(a))||^2 / ||a - mean(a)||^2 over rows.
double explained_variance(const SaeParams& sae, const Tensor& acts);
// Mean per-row count of active latents.
double mean_l0(const SaeParams& sae, const Tensor& acts);

// All layers' SAEs in one LFCK container, sections named per layer.
void save_saes(const std::string& path, const std::vector<SaeParams>& saes);
std::vector<SaeParams> load_saes(const std::string& path);

}  // namespace latentforge

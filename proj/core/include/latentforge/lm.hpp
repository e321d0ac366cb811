#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "latentforge/corpus.hpp"
#include "latentforge/graph.hpp"
#include "latentforge/tensor.hpp"

namespace latentforge {

struct TrainConfig {
  int epochs = 250;
  int batch_size = 16;
  float lr = 5e-3f;
  uint64_t seed = 0;
  int d_model = 64;
  int n_layers = 4;
  int maxlen = 48;
};

struct LayerParams {
  Tensor wq, wk, wv, wo;  // d x d, single head
  Tensor w1, b1, w2, b2;  // d x 4d, 4d, 4d x d, d
};

// Decoder-only transformer, residual stream with no normalization, learned
// positions, unembedding tied to the token embedding.
struct ModelParams {
  int d_model = 0, n_layers = 0, vocab_size = 0, maxlen = 0;
  Tensor emb;  // V x d
  Tensor pos;  // maxlen x d
  std::vector<LayerParams> layers;

  static ModelParams init(int vocab_size, const TrainConfig& cfg, Rng& rng);
  std::vector<std::pair<std::string, Tensor*>> named_params();
  std::vector<std::pair<std::string, const Tensor*>> named_params() const;
};

bool same_params(const ModelParams& a, const ModelParams& b);  // bit-exact

void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);

// Residual stream capture: a0 is the input embedding, a_attn[l-1] the
// post-attention residual a'_l, a[l-1] the post-MLP residual a_l.
struct ActivationTrace {
  Tensor a0;
  std::vector<Tensor> a_attn;
  std::vector<Tensor> a;
};

struct ForwardResult {
  Tensor logits;  // n x V
  ActivationTrace trace;
};

ForwardResult forward(const ModelParams& params, const std::vector<int>& x);

// Decoding fast path: final-position logits only, no trace kept.
Tensor forward_last_logits(const ModelParams& params, const std::vector<int>& x);

// Greedy continuation until EOS or max_new tokens (or the position table
// runs out). Ties pick the lowest token id.
std::vector<int> generate(const ModelParams& params, const std::vector<int>& prompt, int max_new);

// a_l at the last token of BOS + entity. 1-based layer in [1, L].
Tensor last_token_activation(const ModelParams& params, const std::vector<int>& entity, int layer);

// softmax(E_emb . h) over the vocabulary.
Tensor logit_lens(const ModelParams& params, const Tensor& activation);

ModelParams pretrain(const Dataset& dataset, int vocab_size, const TrainConfig& cfg);

// Mean next-token NLL over the dataset (inputs BOS-prepended), in nats.
double mean_nll(const ModelParams& params, const Dataset& dataset);

// ---- graph builders shared by pretraining and unlearning ----

struct LayerNodes {
  NodeId wq, wk, wv, wo, w1, b1, w2, b2;
};

struct ParamNodes {
  NodeId emb = -1, pos = -1;
  std::vector<LayerNodes> layers;
  std::vector<NodeId> all() const;
};

// Copies parameters into graph leaves. Order of all() matches
// ModelParams::named_params().
ParamNodes register_params(Graph& g, const ModelParams& params, bool requires_grad = true);

struct LmGraphNodes {
  NodeId a0 = -1;
  std::vector<NodeId> a_attn, a;
  NodeId logits = -1;  // -1 unless with_logits
};

// Builds the forward computation on g for input x (which must already
// include BOS). `up_to_layer` in [1, L] truncates the stack; logits are only
// available for the full stack.
LmGraphNodes build_forward(Graph& g, const ParamNodes& pn, const ModelParams& params,
                           const std::vector<int>& x, int up_to_layer = -1,
                           bool with_logits = true);

}  // namespace latentforge

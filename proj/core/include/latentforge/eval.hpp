#pragma once

#include <string>
#include <vector>

#include "latentforge/corpus.hpp"
#include "latentforge/lm.hpp"
#include "latentforge/recognition.hpp"
#include "latentforge/sae.hpp"

namespace latentforge {

// Number of worker threads for probe scoring, from LATENTFORGE_THREADS
// (default 1). Results are reduced in probe order regardless of the count.
int eval_thread_count();

// Greedy continuation of BOS + prompt for truth_len + 4 tokens; a hit means
// the truth appears as a contiguous subsequence of the continuation.
bool exact_match(const ModelParams& params, const Probe& probe);
double exact_match_score(const ModelParams& params, const std::vector<Probe>& probes);

// Content tokens tied to one fact: the fact sentence minus stopwords and the
// entity's name tokens. Sorted, unique.
std::vector<int> attribute_set(const World& world, int known_idx, Relation rel);

// Share of `attrs` among the k most probable tokens under the unembedding
// readout of `activation`. Ties pick the lower token id; k is clamped to the
// vocabulary size (clamping is reported by the pipeline manifest).
double attribute_rate(const ModelParams& params, const Tensor& activation,
                      const std::vector<int>& attrs, int k);

// attribute_rate at the last token of BOS + name for every layer, one value
// per layer (1-based layer l at index l-1).
std::vector<double> layer_attribute_rates(const ModelParams& params,
                                          const std::vector<int>& name,
                                          const std::vector<int>& attrs, int k);

struct LatentReportRow {
  int layer = 0;          // 1-based
  double known_rate = 0;  // firing fraction of the top-k known latents
  double unknown_rate = 0;
};

// Firing fractions of each layer's top-k recognition latents at the last
// token of BOS + name. Latent ranking comes from `sets` (score order); the
// firing test uses `params`, so the same sets can be re-measured after
// unlearning.
std::vector<LatentReportRow> latent_activation_report(const ModelParams& params,
                                                      const std::vector<SaeParams>& saes,
                                                      const std::vector<int>& name,
                                                      const RecognitionLatentSets& sets, int k);

// Retrains from scratch on the dataset minus exact-token-match members of
// `forget`. An empty forget set reproduces pretraining bit-exactly.
ModelParams train_oracle(const Dataset& dataset, const Dataset& forget, int vocab_size,
                         const TrainConfig& cfg);

double tv_distance(const Tensor& p, const Tensor& q);        // 0.5 * sum |p - q|
double cosine_distance(const Tensor& a, const Tensor& b);    // 1 - cos similarity

// softmax over the vocabulary at the final position of BOS + prompt.
Tensor output_distribution(const ModelParams& params, const std::vector<int>& prompt);

// Per-layer cosine distances between last-position residuals of two
// (model, input) pairs. Inputs exclude BOS.
std::vector<double> layer_cosine_distances(const ModelParams& pa, const std::vector<int>& xa,
                                           const ModelParams& pb, const std::vector<int>& xb);

double utility_perplexity(const ModelParams& params, const Dataset& dataset);

}  // namespace latentforge

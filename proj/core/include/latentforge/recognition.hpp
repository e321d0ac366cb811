#pragma once

#include <string>
#include <vector>

#include "latentforge/lm.hpp"
#include "latentforge/sae.hpp"
#include "latentforge/tensor.hpp"

namespace latentforge {

// Per-layer sets of latents whose activation frequency separates known
// from unknown entities. Row l-1 of `scores` belongs to layer l.
struct RecognitionLatentSets {
  float tau = 0.0f;
  Tensor scores;                        // L x m
  std::vector<std::vector<int>> known;  // per layer: j with score > tau
  std::vector<std::vector<int>> unknown;  // per layer: j with score < -tau

  int n_layers() const { return scores.defined() ? scores.rows() : 0; }
  int n_latents() const { return scores.defined() ? scores.cols() : 0; }
};

// Fraction of entities whose last-token latent j fires (z_post > 0) at each
// layer. One forward per entity; the indicator uses the bare name with BOS.
Tensor activation_frequencies(const ModelParams& params, const std::vector<SaeParams>& saes,
                              const std::vector<std::vector<int>>& entities);

Tensor recognition_scores(const Tensor& r_known, const Tensor& r_unknown);

RecognitionLatentSets select_latents(const Tensor& scores, float tau);

struct TopLatents {
  std::vector<int> known;    // k largest scores, ties to lower index
  std::vector<int> unknown;  // k smallest scores, ties to lower index
};

TopLatents top_latents(const Tensor& scores, int layer, int k);

// Selected-latent text format (header carries tau and the matrix shape so
// parsing can rebuild the sets; unselected scores are not recorded).
std::string serialize_latents(const RecognitionLatentSets& sets);
RecognitionLatentSets parse_latents(const std::string& text);

// Full score matrix as CSV (layer,latent,score) for report tooling.
std::string serialize_scores(const Tensor& scores);
Tensor parse_scores(const std::string& text);

}  // namespace latentforge

#include "latentforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>
#include <thread>

#include "latentforge/errors.hpp"
#include "latentforge/vocab.hpp"

namespace latentforge {
namespace {

bool contains_subseq(const std::vector<int>& haystack, const std::vector<int>& needle) {
  if (needle.empty()) return true;
  if (haystack.size() < needle.size()) return false;
  for (size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool hit = true;
    for (size_t j = 0; j < needle.size(); ++j)
      if (haystack[i + j] != needle[j]) {
        hit = false;
        break;
      }
    if (hit) return true;
  }
  return false;
}

}  // namespace

int eval_thread_count() {
  const char* env = std::getenv("LATENTFORGE_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

bool exact_match(const ModelParams& params, const Probe& probe) {
  if (probe.truth.empty()) throw ContractViolation("exact_match: probe has empty truth");
  std::vector<int> x;
  x.push_back(Vocabulary::kBos);
  x.insert(x.end(), probe.prompt.begin(), probe.prompt.end());
  std::vector<int> cont = generate(params, x, int(probe.truth.size()) + 4);
  return contains_subseq(cont, probe.truth);
}

double exact_match_score(const ModelParams& params, const std::vector<Probe>& probes) {
  if (probes.empty()) throw ContractViolation("exact_match_score: no probes");
  std::vector<char> hits(probes.size(), 0);
  int n_threads = std::min<int>(eval_thread_count(), int(probes.size()));
  if (n_threads <= 1) {
    for (size_t i = 0; i < probes.size(); ++i) hits[i] = exact_match(params, probes[i]) ? 1 : 0;
  } else {
    std::vector<std::thread> workers;
    for (int w = 0; w < n_threads; ++w)
      workers.emplace_back([&, w] {
        for (size_t i = w; i < probes.size(); i += n_threads)
          hits[i] = exact_match(params, probes[i]) ? 1 : 0;
      });
    for (auto& t : workers) t.join();
  }
  // fixed-order reduction keeps the score independent of the thread count
  double sum = 0.0;
  for (char h : hits) sum += h;
  return sum / double(probes.size());
}

std::vector<int> attribute_set(const World& world, int known_idx, Relation rel) {
  if (known_idx < 0 || known_idx >= int(world.known.size()))
    throw LookupError("attribute_set: known entity index out of range");
  const Entity& e = world.known[known_idx];
  const Fact* fact = nullptr;
  for (const Fact& f : e.facts)
    if (f.relation == rel) {
      fact = &f;
      break;
    }
  if (!fact) throw LookupError("attribute_set: entity has no fact for that relation");
  const Vocabulary& vocab = world.vocab();
  std::set<int> keep;
  for (int id : fact->sentence) {
    if (vocab.is_stopword(id)) continue;
    if (id == e.given || id == e.family) continue;
    keep.insert(id);
  }
  return std::vector<int>(keep.begin(), keep.end());
}

double attribute_rate(const ModelParams& params, const Tensor& activation,
                      const std::vector<int>& attrs, int k) {
  if (k < 1) throw ContractViolation("attribute_rate: k must be >= 1");
  Tensor probs = logit_lens(params, activation);
  int v = int(probs.size());
  if (k > v) k = v;  // clamped; surfaced in the run manifest
  std::vector<int> idx(v);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  std::set<int> attr_set(attrs.begin(), attrs.end());
  int hits = 0;
  for (int i = 0; i < k; ++i)
    if (attr_set.count(idx[i])) ++hits;
  return double(hits) / double(k);
}

std::vector<double> layer_attribute_rates(const ModelParams& params,
                                          const std::vector<int>& name,
                                          const std::vector<int>& attrs, int k) {
  std::vector<double> rates;
  rates.reserve(params.n_layers);
  for (int l = 1; l <= params.n_layers; ++l) {
    Tensor h = last_token_activation(params, name, l);
    rates.push_back(attribute_rate(params, h, attrs, k));
  }
  return rates;
}

std::vector<LatentReportRow> latent_activation_report(const ModelParams& params,
                                                      const std::vector<SaeParams>& saes,
                                                      const std::vector<int>& name,
                                                      const RecognitionLatentSets& sets, int k) {
  if (int(saes.size()) != params.n_layers)
    throw ContractViolation("latent_activation_report: need one dictionary per layer");
  if (k < 1) throw ContractViolation("latent_activation_report: k must be >= 1");
  std::vector<LatentReportRow> rows;
  for (int l = 1; l <= params.n_layers; ++l) {
    const SaeParams& sae = saes[l - 1];
    Tensor a = last_token_activation(params, name, l);
    Tensor z = encode_pre(sae, a);
    auto firing_rate = [&](const std::vector<int>& latents) {
      if (latents.empty()) return 0.0;
      int fired = 0;
      for (int j : latents)
        if (z[j] > sae.theta[j]) ++fired;
      return double(fired) / double(latents.size());
    };
    int kk = std::min(k, sets.n_latents());
    TopLatents top = top_latents(sets.scores, l, kk);
    LatentReportRow row;
    row.layer = l;
    row.known_rate = firing_rate(top.known);
    row.unknown_rate = firing_rate(top.unknown);
    rows.push_back(row);
  }
  return rows;
}

ModelParams train_oracle(const Dataset& dataset, const Dataset& forget, int vocab_size,
                         const TrainConfig& cfg) {
  std::set<std::vector<int>> drop;
  for (const Sequence& s : forget.seqs) drop.insert(s.tokens);
  Dataset kept;
  for (const Sequence& s : dataset.seqs)
    if (!drop.count(s.tokens)) kept.seqs.push_back(s);
  return pretrain(kept, vocab_size, cfg);
}

double tv_distance(const Tensor& p, const Tensor& q) {
  if (!p.same_shape(q)) throw ContractViolation("tv_distance: shape mismatch");
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i) s += std::fabs(double(p[i]) - double(q[i]));
  return 0.5 * s;
}

double cosine_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ContractViolation("cosine_distance: shape mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw NumericFailure("cosine_distance: zero vector");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

Tensor output_distribution(const ModelParams& params, const std::vector<int>& prompt) {
  std::vector<int> x;
  x.push_back(Vocabulary::kBos);
  x.insert(x.end(), prompt.begin(), prompt.end());
  Tensor logits = forward_last_logits(params, x);
  // stable softmax
  float mx = logits[0];
  for (int i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
  Tensor out({logits.size()});
  double z = 0.0;
  for (int i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (int i = 0; i < out.size(); ++i) out[i] = float(out[i] / z);
  return out;
}

std::vector<double> layer_cosine_distances(const ModelParams& pa, const std::vector<int>& xa,
                                           const ModelParams& pb, const std::vector<int>& xb) {
  if (pa.n_layers != pb.n_layers)
    throw ContractViolation("layer_cosine_distances: layer count mismatch");
  std::vector<double> out;
  out.reserve(pa.n_layers);
  for (int l = 1; l <= pa.n_layers; ++l)
    out.push_back(cosine_distance(last_token_activation(pa, xa, l),
                                  last_token_activation(pb, xb, l)));
  return out;
}

double utility_perplexity(const ModelParams& params, const Dataset& dataset) {
  return std::exp(mean_nll(params, dataset));
}

}  // namespace latentforge

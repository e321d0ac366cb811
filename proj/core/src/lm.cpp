#include "latentforge/lm.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <numeric>

#include "latentforge/adam.hpp"
#include "latentforge/checkpoint.hpp"
#include "latentforge/errors.hpp"

namespace latentforge {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat as_mat(const Tensor& t) { return CMapMat(t.data(), t.rows(), t.cols()); }
MapMat as_mat(Tensor& t) { return MapMat(t.data(), t.rows(), t.cols()); }

void causal_softmax_inplace(RowMat& s) {
  int n = static_cast<int>(s.rows());
  for (int r = 0; r < n; ++r) {
    float mx = s(r, 0);
    for (int c = 1; c <= r; ++c) mx = std::max(mx, s(r, c));
    double denom = 0.0;
    for (int c = 0; c <= r; ++c) {
      float e = std::exp(s(r, c) - mx);
      s(r, c) = e;
      denom += e;
    }
    for (int c = 0; c <= r; ++c) s(r, c) = static_cast<float>(s(r, c) / denom);
    for (int c = r + 1; c < n; ++c) s(r, c) = 0.0f;
  }
}

// One full residual pass; writes a'_l / a_l into the trace when given.
RowMat run_layers(const ModelParams& p, const std::vector<int>& x, ActivationTrace* trace) {
  int n = static_cast<int>(x.size());
  int d = p.d_model;
  if (n == 0) throw ContractViolation("forward: empty input");
  if (n > p.maxlen)
    throw ContractViolation("forward: input length " + std::to_string(n) + " exceeds maxlen " +
                            std::to_string(p.maxlen));
  RowMat a(n, d);
  for (int i = 0; i < n; ++i) {
    int tok = x[static_cast<size_t>(i)];
    if (tok < 0 || tok >= p.vocab_size)
      throw ContractViolation("forward: token id " + std::to_string(tok) + " out of vocabulary");
    a.row(i) = as_mat(p.emb).row(tok) + as_mat(p.pos).row(i);
  }
  if (trace) {
    trace->a0 = Tensor({n, d});
    as_mat(trace->a0) = a;
  }
  float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));
  for (const LayerParams& L : p.layers) {
    RowMat q = a * as_mat(L.wq);
    RowMat k = a * as_mat(L.wk);
    RowMat v = a * as_mat(L.wv);
    RowMat s = (q * k.transpose()) * inv_sqrt_d;
    causal_softmax_inplace(s);
    a.noalias() += (s * v) * as_mat(L.wo);
    if (trace) {
      Tensor t({n, d});
      as_mat(t) = a;
      trace->a_attn.push_back(std::move(t));
    }
    RowMat h = (a * as_mat(L.w1)).rowwise() +
               Eigen::Map<const Eigen::RowVectorXf>(L.b1.data(), L.b1.size());
    h = h.cwiseMax(0.0f);
    a.noalias() += (h * as_mat(L.w2)).rowwise() +
                   Eigen::Map<const Eigen::RowVectorXf>(L.b2.data(), L.b2.size());
    if (trace) {
      Tensor t({n, d});
      as_mat(t) = a;
      trace->a.push_back(std::move(t));
    }
  }
  if (!a.allFinite()) throw NumericFailure("forward produced non-finite activations");
  return a;
}

}  // namespace

ModelParams ModelParams::init(int vocab_size, const TrainConfig& cfg, Rng& rng) {
  if (cfg.n_layers < 2) throw ContractViolation("model needs at least 2 layers");
  if (cfg.d_model % 4 != 0) throw ContractViolation("d_model must be divisible by 4");
  if (vocab_size < 5 || cfg.maxlen < 2) throw ContractViolation("bad model dimensions");
  ModelParams p;
  p.d_model = cfg.d_model;
  p.n_layers = cfg.n_layers;
  p.vocab_size = vocab_size;
  p.maxlen = cfg.maxlen;
  int d = cfg.d_model, dh = 4 * d;
  float ws = 0.08f;  // small-init keeps the residual stream near the embedding early on
  p.emb = Tensor::randn({vocab_size, d}, rng, ws);
  p.pos = Tensor::randn({cfg.maxlen, d}, rng, ws);
  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerParams L;
    L.wq = Tensor::randn({d, d}, rng, ws);
    L.wk = Tensor::randn({d, d}, rng, ws);
    L.wv = Tensor::randn({d, d}, rng, ws);
    L.wo = Tensor::randn({d, d}, rng, ws);
    L.w1 = Tensor::randn({d, dh}, rng, ws);
    L.b1 = Tensor::zeros({dh});
    L.w2 = Tensor::randn({dh, d}, rng, ws);
    L.b2 = Tensor::zeros({d});
    p.layers.push_back(std::move(L));
  }
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_params() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("emb", &emb);
  out.emplace_back("pos", &pos);
  for (size_t l = 0; l < layers.size(); ++l) {
    std::string pre = "layer" + std::to_string(l) + ".";
    LayerParams& L = layers[l];
    out.emplace_back(pre + "wq", &L.wq);
    out.emplace_back(pre + "wk", &L.wk);
    out.emplace_back(pre + "wv", &L.wv);
    out.emplace_back(pre + "wo", &L.wo);
    out.emplace_back(pre + "w1", &L.w1);
    out.emplace_back(pre + "b1", &L.b1);
    out.emplace_back(pre + "w2", &L.w2);
    out.emplace_back(pre + "b2", &L.b2);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_params() const {
  auto mut = const_cast<ModelParams*>(this)->named_params();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [n, t] : mut) out.emplace_back(n, t);
  return out;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  if (a.d_model != b.d_model || a.n_layers != b.n_layers || a.vocab_size != b.vocab_size ||
      a.maxlen != b.maxlen)
    return false;
  auto pa = a.named_params(), pb = b.named_params();
  for (size_t i = 0; i < pa.size(); ++i) {
    const Tensor &x = *pa[i].second, &y = *pb[i].second;
    if (!x.same_shape(y)) return false;
    for (int64_t k = 0; k < x.size(); ++k)
      if (x[k] != y[k]) return false;
  }
  return true;
}

void save_model(const std::string& path, const ModelParams& p) {
  CheckpointHeader h;
  h.d = static_cast<uint32_t>(p.d_model);
  h.n_layers = static_cast<uint32_t>(p.n_layers);
  h.vocab = static_cast<uint32_t>(p.vocab_size);
  h.maxlen = static_cast<uint32_t>(p.maxlen);
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (auto& [n, t] : p.named_params()) tensors.emplace_back(n, t);
  write_checkpoint(path, h, tensors);
}

ModelParams load_model(const std::string& path) {
  LoadedCheckpoint ck = read_checkpoint(path);
  ModelParams p;
  p.d_model = static_cast<int>(ck.header.d);
  p.n_layers = static_cast<int>(ck.header.n_layers);
  p.vocab_size = static_cast<int>(ck.header.vocab);
  p.maxlen = static_cast<int>(ck.header.maxlen);
  p.layers.resize(static_cast<size_t>(p.n_layers));
  for (auto& [name, t] : p.named_params()) {
    *t = ck.get(name);
  }
  for (auto& [name, t] : p.named_params()) {
    if (!t->defined()) throw ParseError("model checkpoint missing tensor '" + name + "'");
  }
  return p;
}

ForwardResult forward(const ModelParams& params, const std::vector<int>& x) {
  ForwardResult out;
  RowMat a = run_layers(params, x, &out.trace);
  out.logits = Tensor({static_cast<int>(x.size()), params.vocab_size});
  as_mat(out.logits).noalias() = a * as_mat(params.emb).transpose();
  if (!out.logits.all_finite()) throw NumericFailure("forward produced non-finite logits");
  return out;
}

Tensor forward_last_logits(const ModelParams& params, const std::vector<int>& x) {
  RowMat a = run_layers(params, x, nullptr);
  Tensor out({params.vocab_size});
  Eigen::Map<Eigen::VectorXf>(out.data(), out.size()).noalias() =
      as_mat(params.emb) * a.row(a.rows() - 1).transpose();
  return out;
}

std::vector<int> generate(const ModelParams& params, const std::vector<int>& prompt, int max_new) {
  if (static_cast<int>(prompt.size()) > params.maxlen)
    throw ContractViolation("generate: prompt exceeds maxlen");
  if (max_new < 0) throw ContractViolation("generate: max_new must be >= 0");
  std::vector<int> cur = prompt;
  std::vector<int> cont;
  for (int step = 0; step < max_new; ++step) {
    if (static_cast<int>(cur.size()) >= params.maxlen) break;
    Tensor logits = forward_last_logits(params, cur);
    int best = 0;
    for (int c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[best]) best = c;
    cur.push_back(best);
    cont.push_back(best);
    if (best == Vocabulary::kEos) break;
  }
  return cont;
}

Tensor last_token_activation(const ModelParams& params, const std::vector<int>& entity, int layer) {
  if (layer < 1 || layer > params.n_layers)
    throw ContractViolation("last_token_activation: layer " + std::to_string(layer) +
                            " out of range [1," + std::to_string(params.n_layers) + "]");
  std::vector<int> x;
  x.reserve(entity.size() + 1);
  x.push_back(Vocabulary::kBos);
  x.insert(x.end(), entity.begin(), entity.end());
  ForwardResult r = forward(params, x);
  const Tensor& al = r.trace.a[static_cast<size_t>(layer - 1)];
  Tensor out({params.d_model});
  int last = al.rows() - 1;
  for (int c = 0; c < params.d_model; ++c) out[c] = al.at(last, c);
  return out;
}

Tensor logit_lens(const ModelParams& params, const Tensor& activation) {
  if (activation.size() != params.d_model)
    throw ContractViolation("logit_lens: activation width " + activation.shape_str() +
                            " does not match d=" + std::to_string(params.d_model));
  Eigen::VectorXf logits = as_mat(params.emb) *
                           Eigen::Map<const Eigen::VectorXf>(activation.data(), activation.size());
  float mx = logits.maxCoeff();
  Tensor out({params.vocab_size});
  double denom = 0.0;
  for (int i = 0; i < params.vocab_size; ++i) {
    float e = std::exp(logits(i) - mx);
    out[i] = e;
    denom += e;
  }
  for (int i = 0; i < params.vocab_size; ++i) out[i] = static_cast<float>(out[i] / denom);
  return out;
}

std::vector<NodeId> ParamNodes::all() const {
  std::vector<NodeId> out = {emb, pos};
  for (const LayerNodes& L : layers) {
    out.push_back(L.wq);
    out.push_back(L.wk);
    out.push_back(L.wv);
    out.push_back(L.wo);
    out.push_back(L.w1);
    out.push_back(L.b1);
    out.push_back(L.w2);
    out.push_back(L.b2);
  }
  return out;
}

ParamNodes register_params(Graph& g, const ModelParams& params, bool requires_grad) {
  ParamNodes pn;
  pn.emb = g.leaf(params.emb, requires_grad, "emb");
  pn.pos = g.leaf(params.pos, requires_grad, "pos");
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& L = params.layers[l];
    LayerNodes n;
    n.wq = g.leaf(L.wq, requires_grad, "wq");
    n.wk = g.leaf(L.wk, requires_grad, "wk");
    n.wv = g.leaf(L.wv, requires_grad, "wv");
    n.wo = g.leaf(L.wo, requires_grad, "wo");
    n.w1 = g.leaf(L.w1, requires_grad, "w1");
    n.b1 = g.leaf(L.b1, requires_grad, "b1");
    n.w2 = g.leaf(L.w2, requires_grad, "w2");
    n.b2 = g.leaf(L.b2, requires_grad, "b2");
    pn.layers.push_back(n);
  }
  return pn;
}

LmGraphNodes build_forward(Graph& g, const ParamNodes& pn, const ModelParams& params,
                           const std::vector<int>& x, int up_to_layer, bool with_logits) {
  int n = static_cast<int>(x.size());
  if (n == 0) throw ContractViolation("build_forward: empty input");
  if (n > params.maxlen) throw ContractViolation("build_forward: input exceeds maxlen");
  int layers = up_to_layer < 0 ? params.n_layers : up_to_layer;
  if (layers < 1 || layers > params.n_layers)
    throw ContractViolation("build_forward: up_to_layer out of range");

  std::vector<int> positions(static_cast<size_t>(n));
  std::iota(positions.begin(), positions.end(), 0);
  LmGraphNodes out;
  NodeId tok = g.gather_rows(pn.emb, x);
  NodeId posv = g.gather_rows(pn.pos, positions);
  out.a0 = g.add(tok, posv);

  float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(params.d_model));
  NodeId a = out.a0;
  for (int l = 0; l < layers; ++l) {
    const LayerNodes& L = pn.layers[static_cast<size_t>(l)];
    NodeId q = g.matmul(a, L.wq);
    NodeId k = g.matmul(a, L.wk);
    NodeId v = g.matmul(a, L.wv);
    NodeId s = g.scale(g.matmul_nt(q, k), inv_sqrt_d);
    NodeId p = g.causal_softmax(s);
    NodeId attn = g.matmul(g.matmul(p, v), L.wo);
    NodeId a_attn = g.add(a, attn);
    out.a_attn.push_back(a_attn);
    NodeId h = g.relu(g.add_row(g.matmul(a_attn, L.w1), L.b1));
    NodeId m = g.add_row(g.matmul(h, L.w2), L.b2);
    a = g.add(a_attn, m);
    out.a.push_back(a);
  }
  if (with_logits) {
    if (layers != params.n_layers)
      throw ContractViolation("build_forward: logits need the full layer stack");
    out.logits = g.matmul_nt(a, pn.emb);
  }
  return out;
}

ModelParams pretrain(const Dataset& dataset, int vocab_size, const TrainConfig& cfg) {
  if (dataset.empty()) throw ContractViolation("pretrain: empty dataset");
  for (const auto& s : dataset.seqs)
    if (static_cast<int>(s.tokens.size()) > cfg.maxlen)
      throw ContractViolation("pretrain: sentence of length " + std::to_string(s.tokens.size()) +
                              " exceeds maxlen " + std::to_string(cfg.maxlen));
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.lr <= 0.0f)
    throw ContractViolation("pretrain: bad training config");

  Rng root(cfg.seed);
  Rng r_init = root.split(0);
  Rng r_shuffle = root.split(1);
  ModelParams params = ModelParams::init(vocab_size, cfg, r_init);

  auto named = params.named_params();
  std::vector<Tensor*> ptensors;
  for (auto& [n, t] : named) ptensors.push_back(t);
  AdamState adam(ptensors);

  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    r_shuffle.shuffle(order);
    // Cosine decay to a tenth of the base rate; long memorization runs on
    // the norm-free residual stack diverge under a flat rate.
    float prog = cfg.epochs > 1
                     ? static_cast<float>(epoch) / static_cast<float>(cfg.epochs - 1)
                     : 0.0f;
    float lr_epoch = cfg.lr * (0.1f + 0.45f * (1.0f + std::cos(prog * std::numbers::pi_v<float>)));
    double epoch_loss = 0.0;
    int64_t epoch_tokens = 0;
    try {
      for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
        size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
        // One graph per batch: the sequences share the parameter leaves and
        // the loss sum, so backward produces batch-sum gradients directly.
        Graph g;
        ParamNodes pn = register_params(g, params);
        NodeId total = -1;
        int64_t batch_tokens = 0;
        for (size_t bi = start; bi < end; ++bi) {
          const Sequence& s = dataset.seqs[static_cast<size_t>(order[bi])];
          std::vector<int> full;
          full.reserve(s.tokens.size() + 1);
          full.push_back(Vocabulary::kBos);
          full.insert(full.end(), s.tokens.begin(), s.tokens.end());
          std::vector<int> inputs(full.begin(), full.end() - 1);
          std::vector<int> targets(full.begin() + 1, full.end());

          LmGraphNodes nodes = build_forward(g, pn, params, inputs);
          NodeId loss = g.softmax_xent_sum(nodes.logits, targets);
          epoch_loss += g.scalar_value(loss);
          batch_tokens += static_cast<int64_t>(targets.size());
          total = total < 0 ? loss : g.add(total, loss);
        }
        GradientMap gm = g.backward(total);
        epoch_tokens += batch_tokens;
        float scale = 1.0f / static_cast<float>(batch_tokens);
        double grad_sq = 0.0;
        std::vector<NodeId> ids = pn.all();
        std::vector<const Tensor*> gptrs(ptensors.size(), nullptr);
        for (size_t i = 0; i < ids.size(); ++i) {
          if (!gm.contains(ids[i])) continue;
          Tensor& t = gm.slot(ids[i]);
          Eigen::Map<Eigen::ArrayXf> a(t.data(), t.size());
          a *= scale;
          grad_sq += a.cast<double>().square().sum();
          gptrs[i] = &t;
        }
        // Global-norm clip at 1: halts the rare loss spikes without
        // touching well-behaved steps.
        double gnorm = std::sqrt(grad_sq);
        if (gnorm > 1.0) {
          float shrink = static_cast<float>(1.0 / gnorm);
          for (const Tensor* t : gptrs) {
            if (t == nullptr) continue;
            Tensor& mt = const_cast<Tensor&>(*t);
            Eigen::Map<Eigen::ArrayXf>(mt.data(), mt.size()) *= shrink;
          }
        }
        adam.step(ptensors, gptrs, lr_epoch);
      }
    } catch (const NumericFailure& e) {
      throw NumericFailure("pretraining diverged at epoch " + std::to_string(epoch) + ": " +
                           e.what());
    }
    if (epoch_tokens > 0 && !std::isfinite(epoch_loss / static_cast<double>(epoch_tokens)))
      throw NumericFailure("pretraining diverged at epoch " + std::to_string(epoch));
  }
  return params;
}

double mean_nll(const ModelParams& params, const Dataset& dataset) {
  if (dataset.empty()) throw ContractViolation("mean_nll: empty dataset");
  double total = 0.0;
  int64_t tokens = 0;
  for (const auto& s : dataset.seqs) {
    std::vector<int> full;
    full.reserve(s.tokens.size() + 1);
    full.push_back(Vocabulary::kBos);
    full.insert(full.end(), s.tokens.begin(), s.tokens.end());
    std::vector<int> inputs(full.begin(), full.end() - 1);
    std::vector<int> targets(full.begin() + 1, full.end());
    Graph g;
    ParamNodes pn = register_params(g, params, /*requires_grad=*/false);
    LmGraphNodes nodes = build_forward(g, pn, params, inputs);
    NodeId loss = g.softmax_xent_sum(nodes.logits, targets);
    total += g.scalar_value(loss);
    tokens += static_cast<int64_t>(targets.size());
  }
  return total / static_cast<double>(tokens);
}

}  // namespace latentforge

#include "latentforge/unlearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "latentforge/adam.hpp"
#include "latentforge/errors.hpp"
#include "latentforge/vocab.hpp"

namespace latentforge {
namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// One scored training example: feed `inputs` (BOS included), read the logit
// rows in `rows`, score them against `targets`.
struct TrainItem {
  std::vector<int> inputs;
  std::vector<int> rows;
  std::vector<int> targets;
};

// Activation example for steering: rows index token (non-BOS) positions.
struct ActItem {
  std::vector<int> inputs;
  std::vector<int> rows;
};

std::vector<TrainItem> variant_items(const Dataset& forget_set, const std::vector<int>& name,
                                     DataVariant variant) {
  if (name.empty()) throw ContractViolation("unlearn: target name is empty");
  std::vector<TrainItem> items;
  if (variant == DataVariant::kSentence) {
    if (forget_set.empty()) throw ContractViolation("unlearn: forget set is empty");
    for (const Sequence& s : forget_set.seqs) {
      TrainItem it;
      it.inputs.push_back(Vocabulary::kBos);
      it.inputs.insert(it.inputs.end(), s.tokens.begin(), s.tokens.end() - 1);
      it.targets = s.tokens;
      it.rows.resize(it.inputs.size());
      std::iota(it.rows.begin(), it.rows.end(), 0);
      items.push_back(std::move(it));
    }
  } else {
    TrainItem it;
    it.inputs.push_back(Vocabulary::kBos);
    it.inputs.insert(it.inputs.end(), name.begin(), name.end() - 1);
    if (variant == DataVariant::kEntity) {
      it.targets = name;
      it.rows.resize(it.inputs.size());
      std::iota(it.rows.begin(), it.rows.end(), 0);
    } else {
      it.targets = {name.back()};
      it.rows = {int(it.inputs.size()) - 1};
    }
    items.push_back(std::move(it));
  }
  return items;
}

std::vector<ActItem> variant_act_items(const Dataset& forget_set, const std::vector<int>& name,
                                       DataVariant variant) {
  if (name.empty()) throw ContractViolation("unlearn: target name is empty");
  std::vector<ActItem> items;
  auto full_rows = [](ActItem& it) {
    it.rows.resize(it.inputs.size() - 1);
    std::iota(it.rows.begin(), it.rows.end(), 1);  // skip the BOS position
  };
  if (variant == DataVariant::kSentence) {
    if (forget_set.empty()) throw ContractViolation("unlearn: forget set is empty");
    for (const Sequence& s : forget_set.seqs) {
      ActItem it;
      it.inputs.push_back(Vocabulary::kBos);
      it.inputs.insert(it.inputs.end(), s.tokens.begin(), s.tokens.end());
      full_rows(it);
      items.push_back(std::move(it));
    }
  } else {
    ActItem it;
    it.inputs.push_back(Vocabulary::kBos);
    it.inputs.insert(it.inputs.end(), name.begin(), name.end());
    if (variant == DataVariant::kEntity) {
      full_rows(it);
    } else {
      it.rows = {int(it.inputs.size()) - 1};
    }
    items.push_back(std::move(it));
  }
  return items;
}

// Shuffled cycle over item indices; reshuffles at each wrap.
struct Cycler {
  std::vector<int> order;
  size_t pos = 0;
  Rng rng;

  Cycler(int n, Rng r) : order(n), rng(r) { std::iota(order.begin(), order.end(), 0); }

  int next() {
    if (pos == 0) rng.shuffle(order);
    int v = order[pos++];
    if (pos == order.size()) pos = 0;
    return v;
  }
};

int batch_size_for(DataVariant variant, int n_items) {
  int b = variant == DataVariant::kSentence ? 4 : 1;
  return std::min(b, n_items);
}

// Builds a loss node for one optimization step. The step index is implicit:
// callers keep whatever per-epoch state they need (sampled layer, cyclers).
using StepLossFn = std::function<NodeId(Graph&, const ParamNodes&, const ModelParams&)>;
// Called once at the start of each epoch, before its steps.
using EpochFn = std::function<void(int epoch)>;

bool params_finite(const ModelParams& p) {
  for (const auto& [name, t] : const_cast<ModelParams&>(p).named_params())
    if (!t->all_finite()) return false;
  return true;
}

CheckpointSeries run_loop(const ModelParams& orig, const UnlearnConfig& cfg,
                          const MetricFn& metrics, const EpochFn& on_epoch,
                          const StepLossFn& step_loss) {
  cfg.validate();
  if (!metrics) throw ContractViolation("unlearn: metrics callback is empty");

  ModelParams params = orig;
  auto named = params.named_params();
  std::vector<Tensor*> ptrs;
  ptrs.reserve(named.size());
  for (auto& [name, t] : named) ptrs.push_back(t);
  AdamState adam(ptrs, AdamConfig{});

  CheckpointSeries series;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    on_epoch(epoch);
    float lam = lr_schedule(epoch, cfg.max_epochs, cfg.lambda_min, cfg.lambda_max);
    double loss_sum = 0.0;
    bool aborted = false;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      try {
        Graph g;
        ParamNodes pn = register_params(g, params, true);
        NodeId loss = step_loss(g, pn, params);
        loss_sum += g.scalar_value(loss);
        GradientMap grads = g.backward(loss);
        std::vector<const Tensor*> gptr;
        for (NodeId id : pn.all()) gptr.push_back(grads.contains(id) ? &grads.at(id) : nullptr);
        adam.step(ptrs, gptr, lam);
      } catch (const NumericFailure&) {
        aborted = true;
      }
      if (!aborted && !params_finite(params)) aborted = true;
      if (aborted) break;
    }
    if (aborted) {
      series.nan_aborted = true;
      series.abort_epoch = epoch;
      break;
    }
    series.epoch_loss.push_back(loss_sum / cfg.steps_per_epoch);
    if (epoch % cfg.eval_every == 0) {
      auto [f, r] = metrics(params);
      series.snapshots.push_back(Snapshot{epoch, params, f, r});
    }
  }
  return series;
}

void check_sae_stack(const std::vector<SaeParams>& saes, const ModelParams& params) {
  if (int(saes.size()) != params.n_layers)
    throw ContractViolation("unlearn: need one dictionary per layer");
  for (int i = 0; i < int(saes.size()); ++i) {
    if (saes[i].layer != i + 1)
      throw ContractViolation("unlearn: dictionary stack out of order");
    if (saes[i].d != params.d_model)
      throw ContractViolation("unlearn: dictionary width does not match the model");
  }
}

// Hinge terms at the last token of BOS + name for one layer. Empty latent
// lists contribute an empty sum, i.e. exactly zero.
NodeId build_hinge_loss(Graph& g, const ParamNodes& pn, const ModelParams& params,
                        const SaeParams& sae, const std::vector<int>& name,
                        const std::vector<int>& known, const std::vector<int>& unknown, float c,
                        int layer) {
  std::vector<int> x;
  x.push_back(Vocabulary::kBos);
  x.insert(x.end(), name.begin(), name.end());
  LmGraphNodes nodes = build_forward(g, pn, params, x, layer, false);
  NodeId a_last = g.gather_rows(nodes.a[layer - 1], {int(x.size()) - 1});
  NodeId w_enc = g.leaf(sae.w_enc, false, "w_enc");
  NodeId b_enc = g.leaf(sae.b_enc, false, "b_enc");
  NodeId z_pre = g.add_row(g.matmul(a_last, w_enc), b_enc);
  NodeId known_term = g.sum(g.relu(g.add_const(g.gather_cols(z_pre, known), c)));
  NodeId unknown_term = g.sum(g.relu(g.add_const(g.scale(g.gather_cols(z_pre, unknown), -1.0f), c)));
  return g.add(known_term, unknown_term);
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kProposal: return "proposal";
    case Method::kGa: return "ga";
    case Method::kNpo: return "npo";
    case Method::kRmu: return "rmu";
  }
  throw ContractViolation("unknown method");
}

Method parse_method(const std::string& name) {
  if (name == "proposal") return Method::kProposal;
  if (name == "ga") return Method::kGa;
  if (name == "npo") return Method::kNpo;
  if (name == "rmu") return Method::kRmu;
  throw ContractViolation("unknown method '" + name + "' (want proposal|ga|npo|rmu)");
}

std::string variant_name(DataVariant v) {
  switch (v) {
    case DataVariant::kSentence: return "sentence";
    case DataVariant::kEntity: return "entity";
    case DataVariant::kLastToken: return "last-token";
  }
  throw ContractViolation("unknown data variant");
}

DataVariant parse_variant(const std::string& name) {
  if (name == "sentence") return DataVariant::kSentence;
  if (name == "entity") return DataVariant::kEntity;
  if (name == "last-token") return DataVariant::kLastToken;
  throw ContractViolation("unknown data variant '" + name +
                          "' (want sentence|entity|last-token)");
}

void UnlearnConfig::validate() const {
  if (c <= 0.0f) throw ContractViolation("unlearn: margin c must be positive");
  if (!(tau > 0.0f && tau < 1.0f)) throw ContractViolation("unlearn: tau must be in (0, 1)");
  if (lambda_min < 0.0f || lambda_max < lambda_min)
    throw ContractViolation("unlearn: need 0 <= lambda_min <= lambda_max");
  if (max_epochs < 1) throw ContractViolation("unlearn: max_epochs must be >= 1");
  if (steps_per_epoch < 1) throw ContractViolation("unlearn: steps_per_epoch must be >= 1");
  if (eval_every < 1) throw ContractViolation("unlearn: eval_every must be >= 1");
  if (!(retain_tolerance >= 0.0f && retain_tolerance < 1.0f))
    throw ContractViolation("unlearn: retain_tolerance must be in [0, 1)");
  if (npo_beta <= 0.0f) throw ContractViolation("unlearn: npo_beta must be positive");
  if (rmu_scale < 0.0f) throw ContractViolation("unlearn: rmu_scale must be >= 0");
  if (rmu_alpha < 0.0f) throw ContractViolation("unlearn: rmu_alpha must be >= 0");
  if (rmu_layer < 0) throw ContractViolation("unlearn: rmu_layer must be >= 0");
}

float lr_schedule(int t, int T, float lambda_min, float lambda_max) {
  if (T < 1) throw ContractViolation("lr_schedule: T must be >= 1");
  if (t < 0 || t > T) throw ContractViolation("lr_schedule: t must be in [0, T]");
  if (lambda_max < lambda_min)
    throw ContractViolation("lr_schedule: lambda_max must be >= lambda_min");
  if (t == 0) return lambda_min;
  if (t == T) return lambda_max;
  double w = 0.5 * (1.0 - std::cos(double(t) * std::numbers::pi / double(T)));
  return float(double(lambda_min) + (double(lambda_max) - double(lambda_min)) * w);
}

double proposal_loss(const ModelParams& params, const SaeParams& sae,
                     const std::vector<int>& target_name, const RecognitionLatentSets& sets,
                     float c, int layer) {
  if (layer < 1 || layer > params.n_layers) throw ContractViolation("proposal_loss: bad layer");
  if (sae.layer != layer) throw ContractViolation("proposal_loss: dictionary is for another layer");
  if (sae.d != params.d_model)
    throw ContractViolation("proposal_loss: dictionary width does not match the model");
  if (target_name.empty()) throw ContractViolation("proposal_loss: target name is empty");
  if (layer > sets.n_layers()) throw ContractViolation("proposal_loss: no latent sets for layer");
  if (c <= 0.0f) throw ContractViolation("proposal_loss: margin c must be positive");
  Graph g;
  ParamNodes pn = register_params(g, params, false);
  NodeId loss = build_hinge_loss(g, pn, params, sae, target_name, sets.known[layer - 1],
                                 sets.unknown[layer - 1], c, layer);
  return g.scalar_value(loss);
}

CheckpointSeries unlearn_proposal(const ModelParams& orig, const std::vector<SaeParams>& saes,
                                  const std::vector<int>& target_name,
                                  const RecognitionLatentSets& sets, const UnlearnConfig& cfg,
                                  const MetricFn& metrics) {
  check_sae_stack(saes, orig);
  if (target_name.empty()) throw ContractViolation("unlearn: target name is empty");
  if (sets.n_layers() != orig.n_layers)
    throw ContractViolation("unlearn: latent sets do not cover every layer");
  size_t active = 0;
  for (int l = 0; l < sets.n_layers(); ++l)
    active += sets.known[l].size() + sets.unknown[l].size();
  if (active == 0)
    throw ContractViolation("unlearn: every latent set is empty; nothing to optimize");

  Rng layer_rng = Rng(cfg.seed).split(0);
  int L = orig.n_layers;
  int layer = 1;
  auto on_epoch = [&](int) { layer = 1 + layer_rng.uniform_int(L); };
  auto step_loss = [&](Graph& g, const ParamNodes& pn, const ModelParams& params) {
    return build_hinge_loss(g, pn, params, saes[layer - 1], target_name, sets.known[layer - 1],
                            sets.unknown[layer - 1], cfg.c, layer);
  };
  return run_loop(orig, cfg, metrics, on_epoch, step_loss);
}

CheckpointSeries unlearn_ga(const ModelParams& orig, const Dataset& forget_set,
                            const std::vector<int>& target_name, const UnlearnConfig& cfg,
                            const MetricFn& metrics) {
  auto items = variant_items(forget_set, target_name, cfg.variant);
  int batch = batch_size_for(cfg.variant, int(items.size()));
  Cycler cycle(int(items.size()), Rng(cfg.seed).split(1));

  auto step_loss = [&](Graph& g, const ParamNodes& pn, const ModelParams& params) {
    NodeId total = -1;
    int n_tokens = 0;
    for (int b = 0; b < batch; ++b) {
      const TrainItem& it = items[cycle.next()];
      LmGraphNodes nodes = build_forward(g, pn, params, it.inputs);
      NodeId xent = g.softmax_xent_sum(g.gather_rows(nodes.logits, it.rows), it.targets);
      total = total < 0 ? xent : g.add(total, xent);
      n_tokens += int(it.targets.size());
    }
    // ascend the NLL: minimize its negation, averaged per token
    return g.scale(total, -1.0f / float(n_tokens));
  };
  return run_loop(orig, cfg, metrics, [](int) {}, step_loss);
}

CheckpointSeries unlearn_npo(const ModelParams& orig, const Dataset& forget_set,
                             const std::vector<int>& target_name, const UnlearnConfig& cfg,
                             const MetricFn& metrics) {
  auto items = variant_items(forget_set, target_name, cfg.variant);
  int batch = batch_size_for(cfg.variant, int(items.size()));
  Cycler cycle(int(items.size()), Rng(cfg.seed).split(1));

  // reference token log-probabilities, frozen at the starting parameters
  std::vector<Tensor> ref_lp;
  ref_lp.reserve(items.size());
  for (const TrainItem& it : items) {
    Graph g;
    ParamNodes pn = register_params(g, orig, false);
    LmGraphNodes nodes = build_forward(g, pn, orig, it.inputs);
    NodeId lp = g.token_logprob(g.gather_rows(nodes.logits, it.rows), it.targets);
    ref_lp.push_back(g.value(lp));
  }

  float beta = cfg.npo_beta;
  auto step_loss = [&, beta](Graph& g, const ParamNodes& pn, const ModelParams& params) {
    NodeId total = -1;
    int n_tokens = 0;
    for (int b = 0; b < batch; ++b) {
      int idx = cycle.next();
      const TrainItem& it = items[idx];
      LmGraphNodes nodes = build_forward(g, pn, params, it.inputs);
      NodeId lp = g.token_logprob(g.gather_rows(nodes.logits, it.rows), it.targets);
      NodeId ref = g.leaf(ref_lp[idx], false, "ref_lp");
      NodeId sp = g.softplus(g.scale(g.sub(lp, ref), beta));
      NodeId part = g.sum(sp);
      total = total < 0 ? part : g.add(total, part);
      n_tokens += int(it.targets.size());
    }
    return g.scale(total, 2.0f / (beta * float(n_tokens)));
  };
  return run_loop(orig, cfg, metrics, [](int) {}, step_loss);
}

CheckpointSeries unlearn_rmu(const ModelParams& orig, const Dataset& forget_set,
                             const Dataset& retain_set, const std::vector<int>& target_name,
                             const UnlearnConfig& cfg, const MetricFn& metrics) {
  if (retain_set.empty()) throw ContractViolation("unlearn: retain set is empty");
  auto forget_items = variant_act_items(forget_set, target_name, cfg.variant);
  std::vector<ActItem> retain_items;
  for (const Sequence& s : retain_set.seqs) {
    ActItem it;
    it.inputs.push_back(Vocabulary::kBos);
    it.inputs.insert(it.inputs.end(), s.tokens.begin(), s.tokens.end());
    it.rows.resize(it.inputs.size() - 1);
    std::iota(it.rows.begin(), it.rows.end(), 1);
    retain_items.push_back(std::move(it));
  }

  int layer = cfg.rmu_layer > 0 ? cfg.rmu_layer : (orig.n_layers + 1) / 2;
  if (layer > orig.n_layers) throw ContractViolation("unlearn: rmu_layer exceeds the stack");

  Rng root(cfg.seed);
  Rng dir_rng = root.split(2);
  Cycler f_cycle(int(forget_items.size()), root.split(1));
  Cycler r_cycle(int(retain_items.size()), root.split(3));

  // steering direction: one random unit vector per run
  Tensor u({orig.d_model});
  double norm2 = 0.0;
  for (int i = 0; i < orig.d_model; ++i) {
    u[i] = dir_rng.normal();
    norm2 += double(u[i]) * u[i];
  }
  float inv = float(1.0 / std::sqrt(norm2));
  for (int i = 0; i < orig.d_model; ++i) u[i] *= inv;

  // frozen activations at the steering layer, plus the mean forget-position
  // activation norm that sets the steering magnitude
  auto layer_rows = [&](const ActItem& it) {
    ForwardResult r = forward(orig, it.inputs);
    Tensor out({int(it.rows.size()), orig.d_model});
    for (int k = 0; k < int(it.rows.size()); ++k)
      for (int j = 0; j < orig.d_model; ++j)
        out.at(k, j) = r.trace.a[layer - 1].at(it.rows[k], j);
    return out;
  };
  double norm_sum = 0.0;
  int norm_count = 0;
  for (const ActItem& it : forget_items) {
    Tensor rows = layer_rows(it);
    for (int k = 0; k < rows.rows(); ++k) {
      double s = 0.0;
      for (int j = 0; j < rows.cols(); ++j) s += double(rows.at(k, j)) * rows.at(k, j);
      norm_sum += std::sqrt(s);
      ++norm_count;
    }
  }
  float scale = cfg.rmu_scale > 0.0f ? cfg.rmu_scale : float(5.0 * norm_sum / norm_count);
  std::vector<Tensor> frozen_retain;
  frozen_retain.reserve(retain_items.size());
  for (const ActItem& it : retain_items) frozen_retain.push_back(layer_rows(it));

  int f_batch = batch_size_for(cfg.variant, int(forget_items.size()));
  int r_batch = std::min(4, int(retain_items.size()));
  float alpha = cfg.rmu_alpha;

  auto steer_target = [&](int n_rows) {
    Tensor t({n_rows, orig.d_model});
    for (int k = 0; k < n_rows; ++k)
      for (int j = 0; j < orig.d_model; ++j) t.at(k, j) = scale * u[j];
    return t;
  };

  auto step_loss = [&, alpha](Graph& g, const ParamNodes& pn, const ModelParams& params) {
    NodeId f_total = -1;
    int f_rows = 0;
    for (int b = 0; b < f_batch; ++b) {
      const ActItem& it = forget_items[f_cycle.next()];
      LmGraphNodes nodes = build_forward(g, pn, params, it.inputs, layer, false);
      NodeId a = g.gather_rows(nodes.a[layer - 1], it.rows);
      NodeId diff = g.sub(a, g.leaf(steer_target(int(it.rows.size())), false, "steer"));
      NodeId part = g.sum(g.mul(diff, diff));
      f_total = f_total < 0 ? part : g.add(f_total, part);
      f_rows += int(it.rows.size());
    }
    NodeId r_total = -1;
    int r_rows = 0;
    for (int b = 0; b < r_batch; ++b) {
      int idx = r_cycle.next();
      const ActItem& it = retain_items[idx];
      LmGraphNodes nodes = build_forward(g, pn, params, it.inputs, layer, false);
      NodeId a = g.gather_rows(nodes.a[layer - 1], it.rows);
      NodeId diff = g.sub(a, g.leaf(frozen_retain[idx], false, "frozen"));
      NodeId part = g.sum(g.mul(diff, diff));
      r_total = r_total < 0 ? part : g.add(r_total, part);
      r_rows += int(it.rows.size());
    }
    return g.add(g.scale(f_total, 1.0f / float(f_rows)),
                 g.scale(r_total, alpha / float(r_rows)));
  };
  return run_loop(orig, cfg, metrics, [](int) {}, step_loss);
}

EarlyStopChoice early_stop_select(const CheckpointSeries& series, double retain_baseline,
                                  double tolerance) {
  if (series.snapshots.empty()) throw ContractViolation("early_stop_select: no snapshots");
  if (!(tolerance >= 0.0 && tolerance < 1.0))
    throw ContractViolation("early_stop_select: tolerance must be in [0, 1)");
  double floor = (1.0 - tolerance) * retain_baseline;
  for (int i = int(series.snapshots.size()) - 1; i >= 0; --i)
    if (series.snapshots[i].retain >= floor) return EarlyStopChoice{i, false};
  return EarlyStopChoice{0, true};
}

void save_checkpoint_series(const std::string& dir, const CheckpointSeries& series,
                            const std::vector<std::string>& extra_manifest) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

  std::ostringstream out;
  out << "series v1\n";
  out << "nan_aborted " << (series.nan_aborted ? 1 : 0) << "\n";
  out << "abort_epoch " << series.abort_epoch << "\n";
  for (const std::string& line : extra_manifest) out << "x " << line << "\n";
  for (size_t i = 0; i < series.epoch_loss.size(); ++i)
    out << "loss " << (i + 1) << " " << fmt_double(series.epoch_loss[i]) << "\n";
  for (const Snapshot& s : series.snapshots) {
    out << "snapshot " << s.epoch << " forget " << fmt_double(s.forget) << " retain "
        << fmt_double(s.retain) << "\n";
    save_model(dir + "/epoch_" + std::to_string(s.epoch) + ".lfck", s.params);
  }
  save_text_file(dir + "/manifest.txt", out.str());
}

namespace {

std::vector<std::string> manifest_lines(const std::string& dir) {
  std::string text = load_text_file(dir + "/manifest.txt");
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.empty() || lines[0] != "series v1")
    throw ParseError("bad series manifest header in " + dir, 1);
  return lines;
}

}  // namespace

CheckpointSeries load_checkpoint_series(const std::string& dir) {
  CheckpointSeries series;
  auto lines = manifest_lines(dir);
  for (size_t i = 1; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    std::string key;
    in >> key;
    if (key == "nan_aborted") {
      int v = 0;
      in >> v;
      series.nan_aborted = v != 0;
    } else if (key == "abort_epoch") {
      in >> series.abort_epoch;
    } else if (key == "loss") {
      int idx;
      double v;
      in >> idx >> v;
      series.epoch_loss.push_back(v);
    } else if (key == "snapshot") {
      Snapshot s;
      std::string tag;
      in >> s.epoch >> tag >> s.forget >> tag >> s.retain;
      if (in.fail()) throw ParseError("bad snapshot record in " + dir, int(i + 1));
      s.params = load_model(dir + "/epoch_" + std::to_string(s.epoch) + ".lfck");
      series.snapshots.push_back(std::move(s));
    } else if (key == "x" || key.empty()) {
      continue;
    } else {
      throw ParseError("unknown series manifest record '" + key + "'", int(i + 1));
    }
  }
  return series;
}

std::vector<std::string> load_series_manifest(const std::string& dir) {
  std::vector<std::string> extras;
  for (const std::string& line : manifest_lines(dir))
    if (line.rfind("x ", 0) == 0) extras.push_back(line.substr(2));
  return extras;
}

}  // namespace latentforge

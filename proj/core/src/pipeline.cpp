#include "latentforge/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "latentforge/corpus.hpp"
#include "latentforge/errors.hpp"

namespace latentforge {
namespace {

constexpr int kLatentReportTopK = 5;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hex64(uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

bool file_exists(const std::string& p) {
  std::error_code ec;
  return std::filesystem::exists(p, ec);
}

std::string load_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset heldout_dataset(const World& world) {
  Dataset h;
  for (const auto& f : world.filler_heldout) {
    Sequence s;
    s.tokens = f;
    s.tokens.push_back(Vocabulary::kEos);
    h.seqs.push_back(std::move(s));
  }
  return h;
}

Dataset complement_dataset(const Dataset& all, const Dataset& drop) {
  std::set<std::vector<int>> del;
  for (const Sequence& s : drop.seqs) del.insert(s.tokens);
  Dataset kept;
  for (const Sequence& s : all.seqs)
    if (!del.count(s.tokens)) kept.seqs.push_back(s);
  return kept;
}

struct ProbeScores {
  double forget_fb = 0, forget_qa = 0, forget_aa = 0, forget_all = 0;
  double retain_fb = 0, retain_qa = 0, retain_mean = 0;
};

ProbeScores score_probes(const ModelParams& params, const ProbeSet& probes) {
  auto block = [&](const std::vector<Probe>& src, Probe::Kind kind) {
    std::vector<Probe> out;
    for (const Probe& p : src)
      if (p.kind == kind) out.push_back(p);
    return out;
  };
  ProbeScores s;
  s.forget_fb = exact_match_score(params, block(probes.forget, Probe::Kind::kFB));
  s.forget_qa = exact_match_score(params, block(probes.forget, Probe::Kind::kQA));
  s.forget_aa = exact_match_score(params, block(probes.forget, Probe::Kind::kAA));
  s.forget_all = exact_match_score(params, probes.forget);
  s.retain_fb = exact_match_score(params, block(probes.retain, Probe::Kind::kFB));
  s.retain_qa = exact_match_score(params, block(probes.retain, Probe::Kind::kQA));
  s.retain_mean = 0.5 * (s.retain_fb + s.retain_qa);
  return s;
}

// key/value pairs of one metrics.txt model line
using MetricRow = std::map<std::string, double>;

std::vector<std::pair<std::string, MetricRow>> parse_metrics(const std::string& text) {
  std::vector<std::pair<std::string, MetricRow>> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "metrics v1") throw ParseError("bad metrics header", 1);
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag, name;
    ls >> tag >> name;
    if (tag != "model") throw ParseError("expected model record", line_no);
    MetricRow row;
    std::string key;
    double value;
    while (ls >> key >> value) row[key] = value;
    rows.emplace_back(name, std::move(row));
  }
  return rows;
}

}  // namespace

uint64_t fnv1a(const void* data, size_t n, uint64_t h) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t fnv1a_str(const std::string& s, uint64_t h) { return fnv1a(s.data(), s.size(), h); }

uint64_t hash_inputs(const std::vector<std::string>& strings,
                     const std::vector<std::string>& files) {
  uint64_t h = 14695981039346656037ull;
  for (const std::string& s : strings) {
    h = fnv1a_str(s, h);
    h = fnv1a("\n", 1, h);
  }
  for (const std::string& f : files) {
    // hash by basename so stamps stay identical across output locations
    h = fnv1a_str(std::filesystem::path(f).filename().string(), h);
    h = fnv1a(":", 1, h);
    if (file_exists(f))
      h = fnv1a_str(load_bytes(f), h);
    else
      h = fnv1a_str("<missing>", h);
  }
  return h;
}

struct Pipeline::State {
  bool world_ok = false;
  World world;
  bool ds_ok = false;
  Dataset dataset;
  bool model_ok = false;
  ModelParams model;
  bool saes_ok = false;
  std::vector<SaeParams> saes;
  bool sets_ok = false;
  RecognitionLatentSets sets;
};

Pipeline::Pipeline(const ExperimentConfig& cfg)
    : cfg_(cfg), out_(cfg.out), st_(new State) {
  cfg_.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_, ec);
  if (ec) throw IoError("cannot create output directory " + out_ + ": " + ec.message());
}

Pipeline::~Pipeline() = default;

std::string Pipeline::path(const std::string& name) const { return out_ + "/" + name; }

const std::vector<Method>& Pipeline::all_methods() {
  static const std::vector<Method> methods = {Method::kProposal, Method::kGa, Method::kNpo,
                                              Method::kRmu};
  return methods;
}

namespace {

// cache bookkeeping shared by all stages
struct StageGuard {
  std::string stamp_path;
  uint64_t hash;
  bool cached;

  StageGuard(const std::string& out, const std::string& stage, uint64_t h,
             const std::vector<std::string>& outputs)
      : stamp_path(out + "/" + stage + ".stamp"), hash(h), cached(false) {
    if (!file_exists(stamp_path)) return;
    std::string want = hex64(h);
    std::string have = load_text_file(stamp_path);
    while (!have.empty() && (have.back() == '\n' || have.back() == '\r')) have.pop_back();
    if (have != want) return;
    for (const std::string& o : outputs)
      if (!file_exists(o)) return;
    cached = true;
  }

  void commit() const { save_text_file(stamp_path, hex64(hash) + "\n"); }
};

void log_stage(const std::string& stage, bool cached) {
  std::fprintf(stderr, "[%s] %s\n", stage.c_str(), cached ? "cached" : "running");
}

void write_notes(const std::string& path, const std::vector<std::string>& lines) {
  std::ostringstream out;
  for (const std::string& l : lines) out << l << "\n";
  save_text_file(path, out.str());
}

}  // namespace

// ---- artifact accessors (lazy, parsed once) ----

namespace {

const World& get_world(Pipeline::State& st, const std::string& out) {
  if (!st.world_ok) {
    st.world = parse_world(load_text_file(out + "/world.txt"));
    st.world_ok = true;
  }
  return st.world;
}

const Dataset& get_dataset(Pipeline::State& st, const std::string& out) {
  if (!st.ds_ok) {
    st.dataset = parse_dataset(load_text_file(out + "/dataset.txt"));
    st.ds_ok = true;
  }
  return st.dataset;
}

const ModelParams& get_model(Pipeline::State& st, const std::string& out) {
  if (!st.model_ok) {
    st.model = load_model(out + "/model.lfck");
    st.model_ok = true;
  }
  return st.model;
}

const std::vector<SaeParams>& get_saes(Pipeline::State& st, const std::string& out) {
  if (!st.saes_ok) {
    st.saes = load_saes(out + "/saes.lfck");
    st.saes_ok = true;
  }
  return st.saes;
}

const RecognitionLatentSets& get_sets(Pipeline::State& st, const std::string& out) {
  if (!st.sets_ok) {
    st.sets = parse_latents(load_text_file(out + "/latents.txt"));
    st.sets_ok = true;
  }
  return st.sets;
}

}  // namespace

bool Pipeline::gen_world() {
  std::vector<std::string> in = {"gen-world v1",
                                 std::to_string(cfg_.world.seed),
                                 std::to_string(cfg_.world.n_known),
                                 std::to_string(cfg_.world.n_unknown),
                                 std::to_string(cfg_.world.facts_per_entity),
                                 std::to_string(cfg_.world.fillers),
                                 std::to_string(cfg_.world.heldout)};
  std::vector<std::string> outs = {path("world.txt"), path("dataset.txt"), path("world.notes")};
  StageGuard guard(out_, "gen-world", hash_inputs(in, {}), outs);
  log_stage("gen-world", guard.cached);
  if (guard.cached) return false;

  World w = generate_world(cfg_.world.seed, cfg_.world.n_known, cfg_.world.n_unknown,
                           cfg_.world.facts_per_entity, cfg_.world.fillers, cfg_.world.heldout);
  save_text_file(path("world.txt"), serialize_world(w));
  Dataset ds = build_dataset(w);
  save_text_file(path("dataset.txt"), serialize_dataset(ds, cfg_.world.seed));
  write_notes(path("world.notes"),
              {"known " + std::to_string(w.known.size()),
               "unknown " + std::to_string(w.unknown.size()),
               "facts_per_entity " + std::to_string(w.facts_per_entity),
               "dataset_sequences " + std::to_string(ds.size()),
               "heldout_sequences " + std::to_string(w.filler_heldout.size())});
  *st_ = State{};
  guard.commit();
  return true;
}

bool Pipeline::pretrain_lm() {
  std::vector<std::string> in = {"pretrain v1",
                                 std::to_string(cfg_.train.epochs),
                                 std::to_string(cfg_.train.batch_size),
                                 fmt(cfg_.train.lr),
                                 std::to_string(cfg_.train.seed),
                                 std::to_string(cfg_.train.d_model),
                                 std::to_string(cfg_.train.n_layers),
                                 std::to_string(cfg_.train.maxlen)};
  std::vector<std::string> outs = {path("model.lfck"), path("pretrain.notes")};
  StageGuard guard(out_, "pretrain", hash_inputs(in, {path("dataset.txt")}), outs);
  log_stage("pretrain", guard.cached);
  if (guard.cached) return false;

  const World& w = get_world(*st_, out_);
  const Dataset& ds = get_dataset(*st_, out_);
  ModelParams model = pretrain(ds, w.vocab().size(), cfg_.train);
  save_model(path("model.lfck"), model);
  double nll = mean_nll(model, ds);
  double hppl = utility_perplexity(model, heldout_dataset(w));
  write_notes(path("pretrain.notes"), {"train_nll " + fmt(nll), "heldout_ppl " + fmt(hppl)});
  st_->model_ok = st_->saes_ok = st_->sets_ok = false;
  guard.commit();
  return true;
}

bool Pipeline::train_saes() {
  std::vector<std::string> in = {"train-sae v1",
                                 std::to_string(cfg_.sae.epochs),
                                 fmt(cfg_.sae.lr),
                                 fmt(cfg_.sae.lambda_s),
                                 std::to_string(cfg_.sae.expansion),
                                 std::to_string(cfg_.sae.seed),
                                 std::to_string(cfg_.sae.batch),
                                 fmt(cfg_.sae.bandwidth),
                                 fmt(cfg_.sae.theta_init)};
  std::vector<std::string> outs = {path("saes.lfck"), path("sae_quality.txt"), path("sae.notes")};
  StageGuard guard(out_, "train-sae",
                   hash_inputs(in, {path("model.lfck"), path("dataset.txt"), path("world.txt")}),
                   outs);
  log_stage("train-sae", guard.cached);
  if (guard.cached) return false;

  const World& w = get_world(*st_, out_);
  const ModelParams& model = get_model(*st_, out_);
  int L = model.n_layers, d = model.d_model;

  // residual-stream activations at every non-BOS position, per layer
  auto collect = [&](const Dataset& ds) {
    std::vector<std::vector<float>> rows(L);
    for (const Sequence& s : ds.seqs) {
      std::vector<int> x;
      x.push_back(Vocabulary::kBos);
      x.insert(x.end(), s.tokens.begin(), s.tokens.end());
      ForwardResult r = forward(model, x);
      for (int l = 0; l < L; ++l)
        for (size_t pos = 1; pos < x.size(); ++pos)
          for (int j = 0; j < d; ++j) rows[l].push_back(r.trace.a[l].at(int(pos), j));
    }
    std::vector<Tensor> acts;
    for (int l = 0; l < L; ++l) {
      int n = int(rows[l].size()) / d;
      acts.push_back(Tensor::from({n, d}, rows[l]));
    }
    return acts;
  };
  std::vector<Tensor> train_acts = collect(get_dataset(*st_, out_));
  std::vector<Tensor> held_acts = collect(heldout_dataset(w));

  std::vector<SaeParams> saes;
  std::vector<std::string> quality = {"sae_quality v1"};
  for (int l = 1; l <= L; ++l) {
    SaeTrainConfig c = cfg_.sae;
    c.seed = stage_seed(cfg_.sae.seed, uint64_t(l));
    SaeParams sae = train_sae(train_acts[l - 1], c, l);
    double ev = explained_variance(sae, held_acts[l - 1]);
    double l0 = mean_l0(sae, held_acts[l - 1]);
    quality.push_back("layer " + std::to_string(l) + " ev " + fmt(ev) + " l0 " + fmt(l0));
    saes.push_back(std::move(sae));
  }
  save_saes(path("saes.lfck"), saes);
  write_notes(path("sae_quality.txt"), quality);
  std::vector<std::string> notes = quality;
  notes[0] = "train_rows " + std::to_string(train_acts[0].rows()) + " heldout_rows " +
             std::to_string(held_acts[0].rows());
  write_notes(path("sae.notes"), notes);
  st_->saes_ok = st_->sets_ok = false;
  guard.commit();
  return true;
}

bool Pipeline::find_latents() {
  std::vector<std::string> in = {"find-latents v1", fmt(cfg_.unlearn.tau), cfg_.target};
  std::vector<std::string> outs = {path("latents.txt"), path("scores.csv"),
                                   path("latents.notes")};
  StageGuard guard(out_, "find-latents",
                   hash_inputs(in, {path("model.lfck"), path("saes.lfck"), path("world.txt")}),
                   outs);
  log_stage("find-latents", guard.cached);
  if (guard.cached) return false;

  const World& w = get_world(*st_, out_);
  const ModelParams& model = get_model(*st_, out_);
  const std::vector<SaeParams>& saes = get_saes(*st_, out_);
  int target = w.find_known(cfg_.target);

  std::vector<std::vector<int>> known_names, unknown_names;
  for (int i = 0; i < int(w.known.size()); ++i)
    if (i != target) known_names.push_back(w.name(w.known[i]));
  for (const Entity& e : w.unknown) unknown_names.push_back(w.name(e));

  Tensor r_known = activation_frequencies(model, saes, known_names);
  Tensor r_unknown = activation_frequencies(model, saes, unknown_names);
  Tensor scores = recognition_scores(r_known, r_unknown);

  // relaxation ladder: step down until some layer >= 2 has both sets
  std::vector<float> ladder = {cfg_.unlearn.tau};
  for (float t : {0.3f, 0.2f})
    if (t < ladder.back() - 1e-6f) ladder.push_back(t);
  auto deep_ok = [&](const RecognitionLatentSets& s) {
    for (int l = 2; l <= s.n_layers(); ++l)
      if (!s.known[l - 1].empty() && !s.unknown[l - 1].empty()) return true;
    return false;
  };
  RecognitionLatentSets sets;
  bool satisfied = false;
  float used = ladder[0];
  for (float t : ladder) {
    sets = select_latents(scores, t);
    used = t;
    if (deep_ok(sets)) {
      satisfied = true;
      break;
    }
  }

  save_text_file(path("latents.txt"), serialize_latents(sets));
  save_text_file(path("scores.csv"), serialize_scores(scores));
  std::vector<std::string> notes = {
      "tau_requested " + fmt(cfg_.unlearn.tau), "tau_used " + fmt(used),
      "tau_relaxed " + std::to_string(used != cfg_.unlearn.tau ? 1 : 0),
      "deep_layer_satisfied " + std::to_string(satisfied ? 1 : 0)};
  for (int l = 1; l <= sets.n_layers(); ++l)
    notes.push_back("layer " + std::to_string(l) + " known " +
                    std::to_string(sets.known[l - 1].size()) + " unknown " +
                    std::to_string(sets.unknown[l - 1].size()));
  write_notes(path("latents.notes"), notes);
  st_->sets_ok = false;
  guard.commit();
  return true;
}

bool Pipeline::unlearn_method(Method method) {
  std::string mn = method_name(method);
  std::string dir = path("unlearn/" + mn);
  std::vector<std::string> in = {"unlearn v1",
                                 mn,
                                 variant_name(cfg_.unlearn.variant),
                                 fmt(cfg_.unlearn.c),
                                 fmt(cfg_.unlearn.tau),
                                 fmt(cfg_.unlearn.lambda_min),
                                 fmt(cfg_.unlearn.lambda_max),
                                 std::to_string(cfg_.unlearn.max_epochs),
                                 std::to_string(cfg_.unlearn.steps_per_epoch),
                                 std::to_string(cfg_.unlearn.eval_every),
                                 fmt(cfg_.unlearn.retain_tolerance),
                                 std::to_string(cfg_.unlearn.seed),
                                 fmt(cfg_.unlearn.npo_beta),
                                 fmt(cfg_.unlearn.rmu_scale),
                                 fmt(cfg_.unlearn.rmu_alpha),
                                 std::to_string(cfg_.unlearn.rmu_layer),
                                 cfg_.target,
                                 "retain-all"};
  std::vector<std::string> files = {path("model.lfck"), path("saes.lfck"), path("latents.txt"),
                                    path("dataset.txt"), path("world.txt")};
  StageGuard guard(out_, "unlearn-" + mn, hash_inputs(in, files), {dir + "/manifest.txt"});
  log_stage("unlearn " + mn, guard.cached);
  if (guard.cached) return false;

  const World& w = get_world(*st_, out_);
  const Dataset& ds = get_dataset(*st_, out_);
  const ModelParams& model = get_model(*st_, out_);
  int target = w.find_known(cfg_.target);
  std::vector<int> name = w.name(w.known[target]);

  ProbeSet probes = build_probes(w, target);
  MetricFn metric = [&](const ModelParams& p) {
    ProbeScores s = score_probes(p, probes);
    return std::make_pair(s.forget_all, s.retain_mean);
  };

  UnlearnConfig ucfg = cfg_.unlearn;
  ucfg.method = method;

  CheckpointSeries series;
  switch (method) {
    case Method::kProposal:
      series = unlearn_proposal(model, get_saes(*st_, out_), name, get_sets(*st_, out_), ucfg,
                                metric);
      break;
    case Method::kGa:
      series = unlearn_ga(model, build_forget_set(ds, w, target), name, ucfg, metric);
      break;
    case Method::kNpo:
      series = unlearn_npo(model, build_forget_set(ds, w, target), name, ucfg, metric);
      break;
    case Method::kRmu: {
      Dataset forget = build_forget_set(ds, w, target);
      series = unlearn_rmu(model, forget, complement_dataset(ds, forget), name, ucfg, metric);
      break;
    }
  }

  const Vocabulary& vocab = w.vocab();
  std::vector<std::string> extras = {
      "method " + mn,
      "variant " + variant_name(cfg_.unlearn.variant),
      "seed " + std::to_string(cfg_.unlearn.seed),
      "target " + std::to_string(target) + " " + vocab.token(name[0]) + " " +
          vocab.token(name[1]),
      "tau_used " + fmt(get_sets(*st_, out_).tau),
      "c " + fmt(cfg_.unlearn.c),
      "lambda_min " + fmt(cfg_.unlearn.lambda_min),
      "lambda_max " + fmt(cfg_.unlearn.lambda_max),
      "retain_probes " + std::to_string(probes.retain.size())};
  save_checkpoint_series(dir, series, extras);
  guard.commit();
  return true;
}

bool Pipeline::evaluate() {
  std::vector<std::string> in = {"evaluate v1", std::to_string(cfg_.eval_top_k), cfg_.target,
                                 fmt(cfg_.unlearn.retain_tolerance),
                                 "retain-all"};
  std::vector<std::string> files = {path("model.lfck"), path("world.txt")};
  for (Method m : all_methods()) {
    std::string mf = path("unlearn/" + method_name(m) + "/manifest.txt");
    in.push_back(method_name(m) + "_present " + std::to_string(file_exists(mf) ? 1 : 0));
    if (file_exists(mf)) files.push_back(mf);
  }
  std::vector<std::string> outs = {path("metrics.txt"), path("evaluate.notes")};
  StageGuard guard(out_, "evaluate", hash_inputs(in, files), outs);
  log_stage("evaluate", guard.cached);
  if (guard.cached) return false;

  const World& w = get_world(*st_, out_);
  const ModelParams& orig = get_model(*st_, out_);
  int target = w.find_known(cfg_.target);
  ProbeSet probes = build_probes(w, target);
  Dataset held = heldout_dataset(w);

  ProbeScores base = score_probes(orig, probes);
  double base_ppl = utility_perplexity(orig, held);

  auto line_of = [](const std::string& name, const std::vector<std::pair<std::string, double>>& kv) {
    std::ostringstream ss;
    ss << "model " << name;
    for (const auto& [k, v] : kv) ss << " " << k << " " << fmt(v);
    return ss.str();
  };
  auto score_kv = [](const ProbeScores& s) {
    return std::vector<std::pair<std::string, double>>{
        {"forget_fb", s.forget_fb}, {"forget_qa", s.forget_qa}, {"forget_aa", s.forget_aa},
        {"forget", s.forget_all},   {"retain_fb", s.retain_fb}, {"retain_qa", s.retain_qa},
        {"retain", s.retain_mean}};
  };

  std::vector<std::string> lines = {"metrics v1"};
  {
    auto kv = score_kv(base);
    kv.push_back({"ppl", base_ppl});
    lines.push_back(line_of("orig", kv));
  }

  for (Method m : all_methods()) {
    std::string dir = path("unlearn/" + method_name(m));
    if (!file_exists(dir + "/manifest.txt")) continue;
    CheckpointSeries series = load_checkpoint_series(dir);
    if (series.snapshots.empty()) {
      lines.push_back("model " + method_name(m) + " empty 1");
      continue;
    }
    EarlyStopChoice choice =
        early_stop_select(series, base.retain_mean, cfg_.unlearn.retain_tolerance);
    const Snapshot& sel = series.snapshots[choice.index];
    const Snapshot& fin = series.snapshots.back();
    ProbeScores s = score_probes(sel.params, probes);
    auto kv = score_kv(s);
    kv.insert(kv.begin(), {{"epoch", double(sel.epoch)},
                           {"flagged", choice.flagged ? 1.0 : 0.0},
                           {"nan_aborted", series.nan_aborted ? 1.0 : 0.0}});
    kv.push_back({"ppl", utility_perplexity(sel.params, held)});
    kv.push_back({"final_epoch", double(fin.epoch)});
    kv.push_back({"ppl_final", utility_perplexity(fin.params, held)});
    kv.push_back({"forget_final", fin.forget});
    kv.push_back({"retain_final", fin.retain});
    lines.push_back(line_of(method_name(m), kv));
  }
  write_notes(path("metrics.txt"), lines);

  std::vector<std::string> notes = {"retain_baseline " + fmt(base.retain_mean),
                                    "heldout_ppl_baseline " + fmt(base_ppl),
                                    "eval_top_k " + std::to_string(cfg_.eval_top_k)};
  if (cfg_.eval_top_k > w.vocab().size())
    notes.push_back("eval_top_k_clamped " + std::to_string(cfg_.eval_top_k) + " -> " +
                    std::to_string(w.vocab().size()));
  write_notes(path("evaluate.notes"), notes);
  guard.commit();
  return true;
}

bool Pipeline::train_oracle_lm() {
  std::vector<std::string> in = {"oracle v1",
                                 std::to_string(cfg_.train.epochs),
                                 std::to_string(cfg_.train.batch_size),
                                 fmt(cfg_.train.lr),
                                 std::to_string(cfg_.train.seed),
                                 std::to_string(cfg_.train.d_model),
                                 std::to_string(cfg_.train.n_layers),
                                 std::to_string(cfg_.train.maxlen),
                                 cfg_.target};
  std::vector<std::string> outs = {path("oracle.lfck"), path("oracle.notes")};
  StageGuard guard(out_, "oracle", hash_inputs(in, {path("dataset.txt"), path("world.txt")}),
                   outs);
  log_stage("oracle", guard.cached);
  if (guard.cached) return false;

  const World& w = get_world(*st_, out_);
  const Dataset& ds = get_dataset(*st_, out_);
  int target = w.find_known(cfg_.target);
  Dataset forget = build_forget_set(ds, w, target);
  ModelParams oracle = train_oracle(ds, forget, w.vocab().size(), cfg_.train);
  save_model(path("oracle.lfck"), oracle);
  double hppl = utility_perplexity(oracle, heldout_dataset(w));
  write_notes(path("oracle.notes"),
              {"forget_sequences " + std::to_string(forget.size()),
               "kept_sequences " + std::to_string(ds.size() - forget.size()),
               "heldout_ppl " + fmt(hppl)});
  guard.commit();
  return true;
}

bool Pipeline::report() {
  std::vector<std::string> in = {"report v1", std::to_string(cfg_.eval_top_k), cfg_.target,
                                 std::to_string(cfg_.seed),
                                 std::to_string(cfg_.unlearn.seed)};
  std::vector<std::string> files = {path("model.lfck"), path("oracle.lfck"), path("metrics.txt"),
                                    path("latents.txt"), path("saes.lfck"), path("world.txt"),
                                    path("evaluate.notes"), path("latents.notes")};
  for (Method m : all_methods()) {
    std::string mf = path("unlearn/" + method_name(m) + "/manifest.txt");
    in.push_back(method_name(m) + "_present " + std::to_string(file_exists(mf) ? 1 : 0));
    if (file_exists(mf)) files.push_back(mf);
  }
  std::vector<std::string> outs = {path("report.csv"), path("summary.txt"),
                                   path("attribute_rate.csv"), path("latent_freq.csv"),
                                   path("manifest.txt")};
  StageGuard guard(out_, "report", hash_inputs(in, files), outs);
  log_stage("report", guard.cached);
  if (guard.cached) return false;

  const World& w = get_world(*st_, out_);
  const ModelParams& orig = get_model(*st_, out_);
  const std::vector<SaeParams>& saes = get_saes(*st_, out_);
  const RecognitionLatentSets& sets = get_sets(*st_, out_);
  ModelParams oracle = load_model(path("oracle.lfck"));
  int target = w.find_known(cfg_.target);
  std::vector<int> name = w.name(w.known[target]);

  // substitute entity for the representation-distance readout
  Rng phi_rng(stage_seed(cfg_.seed, 5));
  int r = phi_rng.uniform_int(int(w.known.size()) - 1);
  int phi = r >= target ? r + 1 : r;
  std::vector<int> phi_name = w.name(w.known[phi]);

  ProbeSet probes = build_probes(w, target);
  std::vector<Probe> qa_probes;
  for (const Probe& p : probes.forget)
    if (p.kind == Probe::Kind::kQA) qa_probes.push_back(p);

  auto tv_vs_oracle = [&](const ModelParams& p) {
    double s = 0.0;
    for (const Probe& q : qa_probes)
      s += tv_distance(output_distribution(p, q.prompt), output_distribution(oracle, q.prompt));
    return s / double(qa_probes.size());
  };
  auto cos_vs_phi = [&](const ModelParams& p) {
    std::vector<double> d = layer_cosine_distances(p, name, orig, phi_name);
    double s = 0.0;
    for (double v : d) s += v;
    return s / double(d.size());
  };

  auto metric_rows = parse_metrics(load_text_file(path("metrics.txt")));
  auto find_row = [&](const std::string& model) -> const MetricRow* {
    for (const auto& [n, row] : metric_rows)
      if (n == model) return &row;
    return nullptr;
  };
  const MetricRow* orig_row = find_row("orig");
  if (!orig_row) throw ParseError("metrics.txt lacks the orig row");
  double base_retain = orig_row->at("retain");
  double base_ppl = orig_row->at("ppl");
  double tv_before = tv_vs_oracle(orig);
  double cos_before = cos_vs_phi(orig);

  // models we can reconstruct: method name -> selected/final params
  struct Loaded {
    std::string method;
    ModelParams selected;
    const MetricRow* row;
  };
  std::vector<Loaded> models;
  for (Method m : all_methods()) {
    std::string mn = method_name(m);
    std::string dir = path("unlearn/" + mn);
    const MetricRow* row = find_row(mn);
    if (!row || row->count("empty")) continue;
    Loaded lm;
    lm.method = mn;
    lm.row = row;
    lm.selected = load_model(dir + "/epoch_" + std::to_string(int(row->at("epoch"))) + ".lfck");
    models.push_back(std::move(lm));
  }

  // report.csv
  {
    std::ostringstream out;
    out << "# report v1\n";
    out << "method,target,seed,forget,retain,retain_baseline,ppl_ratio,ppl_final_ratio,epoch,"
           "flagged,tv_oracle,cos_subst\n";
    out << "orig," << target << "," << cfg_.unlearn.seed << "," << fmt(orig_row->at("forget"))
        << "," << fmt(base_retain) << "," << fmt(base_retain) << ",1,1,0,0," << fmt(tv_before)
        << "," << fmt(cos_before) << "\n";
    for (const Loaded& lm : models) {
      const MetricRow& row = *lm.row;
      out << lm.method << "," << target << "," << cfg_.unlearn.seed << ","
          << fmt(row.at("forget")) << "," << fmt(row.at("retain")) << "," << fmt(base_retain)
          << "," << fmt(row.at("ppl") / base_ppl) << "," << fmt(row.at("ppl_final") / base_ppl)
          << "," << int(row.at("epoch")) << "," << int(row.at("flagged")) << ","
          << fmt(tv_vs_oracle(lm.selected)) << "," << fmt(cos_vs_phi(lm.selected)) << "\n";
    }
    save_text_file(path("report.csv"), out.str());
  }

  // attribute_rate.csv over every layer and relation of the target
  {
    std::ostringstream out;
    out << "model,layer,relation,rate\n";
    auto emit = [&](const std::string& model_name, const ModelParams& p) {
      for (int rel = 0; rel < 3; ++rel) {
        std::vector<int> attrs;
        try {
          attrs = attribute_set(w, target, Relation(rel));
        } catch (const LookupError&) {
          continue;  // target has no fact for this relation
        }
        std::vector<double> rates = layer_attribute_rates(p, name, attrs, cfg_.eval_top_k);
        for (int l = 1; l <= int(rates.size()); ++l)
          out << model_name << "," << l << "," << rel << "," << fmt(rates[l - 1]) << "\n";
      }
    };
    emit("orig", orig);
    for (const Loaded& lm : models) emit(lm.method, lm.selected);
    save_text_file(path("attribute_rate.csv"), out.str());
  }

  // latent_freq.csv: firing of the top recognition latents on the target
  {
    std::ostringstream out;
    out << "model,layer,known_rate,unknown_rate\n";
    auto emit = [&](const std::string& model_name, const ModelParams& p) {
      for (const LatentReportRow& row :
           latent_activation_report(p, saes, name, sets, kLatentReportTopK))
        out << model_name << "," << row.layer << "," << fmt(row.known_rate) << ","
            << fmt(row.unknown_rate) << "\n";
    };
    emit("orig", orig);
    for (const Loaded& lm : models) emit(lm.method, lm.selected);
    save_text_file(path("latent_freq.csv"), out.str());
  }

  bool ga_collapse = false;
  for (const Loaded& lm : models)
    if (lm.method == "ga" && lm.row->at("ppl_final") / base_ppl >= 2.0) ga_collapse = true;

  // summary.txt, methods ordered by forget score ascending
  {
    std::vector<const Loaded*> order;
    for (const Loaded& lm : models) order.push_back(&lm);
    std::sort(order.begin(), order.end(), [](const Loaded* a, const Loaded* b) {
      double fa = a->row->at("forget"), fb = b->row->at("forget");
      if (fa != fb) return fa < fb;
      return a->method < b->method;
    });
    const Vocabulary& vocab = w.vocab();
    std::ostringstream out;
    out << "target " << vocab.token(name[0]) << " " << vocab.token(name[1]) << " (known "
        << target << ") seed " << cfg_.unlearn.seed << "\n";
    out << "baseline forget " << fmt(orig_row->at("forget")) << " retain " << fmt(base_retain)
        << " heldout_ppl " << fmt(base_ppl) << "\n";
    for (const Loaded* lm : order) {
      const MetricRow& row = *lm->row;
      out << lm->method << " forget " << fmt(row.at("forget")) << " retain "
          << fmt(row.at("retain")) << " ppl_ratio " << fmt(row.at("ppl") / base_ppl)
          << " epoch " << int(row.at("epoch")) << (row.at("flagged") != 0.0 ? " *" : "") << "\n";
    }
    if (ga_collapse) out << "note ga heldout perplexity at final epoch >= 2x baseline\n";
    save_text_file(path("summary.txt"), out.str());
  }

  // manifest.txt: config echo plus every stage's notes
  {
    ExperimentConfig echo = cfg_;
    echo.out = ".";  // keep the manifest independent of the output location
    std::ostringstream out;
    out << "manifest v1\n## config\n" << serialize_config(echo);
    auto section = [&](const std::string& title, const std::string& file) {
      if (!file_exists(file)) return;
      out << "## " << title << "\n" << load_text_file(file);
    };
    section("gen-world", path("world.notes"));
    section("pretrain", path("pretrain.notes"));
    section("train-sae", path("sae.notes"));
    section("find-latents", path("latents.notes"));
    for (Method m : all_methods()) {
      std::string mn = method_name(m);
      std::string dir = path("unlearn/" + mn);
      if (!file_exists(dir + "/manifest.txt")) continue;
      out << "## unlearn " << mn << "\n";
      for (const std::string& line : load_series_manifest(dir)) out << line << "\n";
    }
    section("evaluate", path("evaluate.notes"));
    section("oracle", path("oracle.notes"));
    out << "## report\n";
    out << "substitute_entity " << phi << "\n";
    out << "ga_collapse " << (ga_collapse ? 1 : 0) << "\n";
    save_text_file(path("manifest.txt"), out.str());
  }

  guard.commit();
  return true;
}

void Pipeline::run_all() {
  run_stage("gen-world");
  run_stage("pretrain");
  run_stage("train-sae");
  run_stage("find-latents");
  for (Method m : all_methods()) {
    try {
      unlearn_method(m);
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError("stage unlearn " + method_name(m) + ": " + e.what());
    }
  }
  run_stage("evaluate");
  run_stage("oracle");
  run_stage("report");
}

void Pipeline::run_stage(const std::string& stage) {
  auto call = [&](auto&& fn) {
    try {
      fn();
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError("stage " + stage + ": " + e.what());
    }
  };
  if (stage == "gen-world") call([&] { gen_world(); });
  else if (stage == "pretrain") call([&] { pretrain_lm(); });
  else if (stage == "train-sae") call([&] { train_saes(); });
  else if (stage == "find-latents") call([&] { find_latents(); });
  else if (stage == "unlearn") call([&] { unlearn_method(cfg_.unlearn.method); });
  else if (stage == "evaluate") call([&] { evaluate(); });
  else if (stage == "oracle") call([&] { train_oracle_lm(); });
  else if (stage == "report") call([&] { report(); });
  else if (stage == "run-all") run_all();
  else throw ContractViolation("unknown stage '" + stage + "'");
}

}  // namespace latentforge

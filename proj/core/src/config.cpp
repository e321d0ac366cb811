#include "latentforge/config.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "latentforge/errors.hpp"
#include "latentforge/rng.hpp"

namespace latentforge {
namespace {

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct ValueParser {
  const std::string& value;
  int line;

  int as_int() const {
    try {
      size_t used = 0;
      int v = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ParseError("bad integer '" + value + "'", line);
    }
  }
  uint64_t as_u64() const {
    try {
      size_t used = 0;
      uint64_t v = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ParseError("bad unsigned integer '" + value + "'", line);
    }
  }
  float as_float() const {
    try {
      size_t used = 0;
      float v = std::stof(value, &used);
      if (used != value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ParseError("bad number '" + value + "'", line);
    }
  }
};

}  // namespace

uint64_t stage_seed(uint64_t global_seed, uint64_t stage) {
  return Rng(global_seed).split(stage).next_u64();
}

void ExperimentConfig::finalize() {
  world.seed = stage_seed(seed, 1);
  train.seed = stage_seed(seed, 2);
  sae.seed = stage_seed(seed, 3);
  unlearn.seed = stage_seed(seed, 4);
}

void ExperimentConfig::validate() const {
  if (out.empty()) throw ContractViolation("config: out directory is empty");
  if (target.empty()) throw ContractViolation("config: target selector is empty");
  if (eval_top_k < 1) throw ContractViolation("config: eval.top_k must be >= 1");
  if (world.n_known < 2 || world.n_unknown < 2)
    throw ContractViolation("config: need at least 2 known and 2 unknown entities");
  if (world.facts_per_entity < 1)
    throw ContractViolation("config: facts_per_entity must be >= 1");
  if (world.fillers < 0 || world.heldout < 0)
    throw ContractViolation("config: filler counts must be >= 0");
  if (train.epochs < 1 || train.batch_size < 1)
    throw ContractViolation("config: train.epochs and train.batch must be >= 1");
  if (train.lr <= 0.0f) throw ContractViolation("config: train.lr must be positive");
  if (train.d_model < 4 || train.d_model % 4 != 0)
    throw ContractViolation("config: train.d_model must be a positive multiple of 4");
  if (train.n_layers < 2) throw ContractViolation("config: train.n_layers must be >= 2");
  if (train.maxlen < 8) throw ContractViolation("config: train.maxlen must be >= 8");
  if (sae.epochs < 1 || sae.batch < 1)
    throw ContractViolation("config: sae.epochs and sae.batch must be >= 1");
  if (sae.lr <= 0.0f) throw ContractViolation("config: sae.lr must be positive");
  if (sae.lambda_s < 0.0f) throw ContractViolation("config: sae.lambda_s must be >= 0");
  if (sae.expansion < 1) throw ContractViolation("config: sae.expansion must be >= 1");
  if (sae.bandwidth <= 0.0f) throw ContractViolation("config: sae.bandwidth must be positive");
  if (sae.theta_init <= 0.0f) throw ContractViolation("config: sae.theta_init must be positive");
  unlearn.validate();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, int> seen;  // key -> first line
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no);
    if (value.empty()) throw ParseError("empty value for key '" + key + "'", line_no);
    auto [it, inserted] = seen.emplace(key, line_no);
    if (!inserted)
      std::fprintf(stderr, "config: duplicate key '%s' at line %d (first at line %d); last wins\n",
                   key.c_str(), line_no, it->second);
    ValueParser v{value, line_no};

    if (key == "seed") cfg.seed = v.as_u64();
    else if (key == "out") cfg.out = value;
    else if (key == "target") cfg.target = value;
    else if (key == "eval.top_k") cfg.eval_top_k = v.as_int();
    else if (key == "world.n_known") cfg.world.n_known = v.as_int();
    else if (key == "world.n_unknown") cfg.world.n_unknown = v.as_int();
    else if (key == "world.facts_per_entity") cfg.world.facts_per_entity = v.as_int();
    else if (key == "world.fillers") cfg.world.fillers = v.as_int();
    else if (key == "world.heldout") cfg.world.heldout = v.as_int();
    else if (key == "train.epochs") cfg.train.epochs = v.as_int();
    else if (key == "train.batch") cfg.train.batch_size = v.as_int();
    else if (key == "train.lr") cfg.train.lr = v.as_float();
    else if (key == "train.d_model") cfg.train.d_model = v.as_int();
    else if (key == "train.n_layers") cfg.train.n_layers = v.as_int();
    else if (key == "train.maxlen") cfg.train.maxlen = v.as_int();
    else if (key == "sae.epochs") cfg.sae.epochs = v.as_int();
    else if (key == "sae.lr") cfg.sae.lr = v.as_float();
    else if (key == "sae.lambda_s") cfg.sae.lambda_s = v.as_float();
    else if (key == "sae.expansion") cfg.sae.expansion = v.as_int();
    else if (key == "sae.batch") cfg.sae.batch = v.as_int();
    else if (key == "sae.bandwidth") cfg.sae.bandwidth = v.as_float();
    else if (key == "sae.theta_init") cfg.sae.theta_init = v.as_float();
    else if (key == "unlearn.method") {
      try {
        cfg.unlearn.method = parse_method(value);
      } catch (const ContractViolation& e) {
        throw ParseError(e.what(), line_no);
      }
    } else if (key == "unlearn.variant") {
      try {
        cfg.unlearn.variant = parse_variant(value);
      } catch (const ContractViolation& e) {
        throw ParseError(e.what(), line_no);
      }
    }
    else if (key == "unlearn.c") cfg.unlearn.c = v.as_float();
    else if (key == "unlearn.tau") cfg.unlearn.tau = v.as_float();
    else if (key == "unlearn.lambda_min") cfg.unlearn.lambda_min = v.as_float();
    else if (key == "unlearn.lambda_max") cfg.unlearn.lambda_max = v.as_float();
    else if (key == "unlearn.max_epochs") cfg.unlearn.max_epochs = v.as_int();
    else if (key == "unlearn.steps_per_epoch") cfg.unlearn.steps_per_epoch = v.as_int();
    else if (key == "unlearn.eval_every") cfg.unlearn.eval_every = v.as_int();
    else if (key == "unlearn.retain_tolerance") cfg.unlearn.retain_tolerance = v.as_float();
    else if (key == "unlearn.npo_beta") cfg.unlearn.npo_beta = v.as_float();
    else if (key == "unlearn.rmu_scale") cfg.unlearn.rmu_scale = v.as_float();
    else if (key == "unlearn.rmu_alpha") cfg.unlearn.rmu_alpha = v.as_float();
    else if (key == "unlearn.rmu_layer") cfg.unlearn.rmu_layer = v.as_int();
    else throw ParseError("unknown key '" + key + "'", line_no);
  }
  cfg.finalize();
  cfg.validate();
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "seed = " << cfg.seed << "\n";
  out << "out = " << cfg.out << "\n";
  out << "target = " << cfg.target << "\n";
  out << "eval.top_k = " << cfg.eval_top_k << "\n";
  out << "world.n_known = " << cfg.world.n_known << "\n";
  out << "world.n_unknown = " << cfg.world.n_unknown << "\n";
  out << "world.facts_per_entity = " << cfg.world.facts_per_entity << "\n";
  out << "world.fillers = " << cfg.world.fillers << "\n";
  out << "world.heldout = " << cfg.world.heldout << "\n";
  out << "train.epochs = " << cfg.train.epochs << "\n";
  out << "train.batch = " << cfg.train.batch_size << "\n";
  out << "train.lr = " << fmt_float(cfg.train.lr) << "\n";
  out << "train.d_model = " << cfg.train.d_model << "\n";
  out << "train.n_layers = " << cfg.train.n_layers << "\n";
  out << "train.maxlen = " << cfg.train.maxlen << "\n";
  out << "sae.epochs = " << cfg.sae.epochs << "\n";
  out << "sae.lr = " << fmt_float(cfg.sae.lr) << "\n";
  out << "sae.lambda_s = " << fmt_float(cfg.sae.lambda_s) << "\n";
  out << "sae.expansion = " << cfg.sae.expansion << "\n";
  out << "sae.batch = " << cfg.sae.batch << "\n";
  out << "sae.bandwidth = " << fmt_float(cfg.sae.bandwidth) << "\n";
  out << "sae.theta_init = " << fmt_float(cfg.sae.theta_init) << "\n";
  out << "unlearn.method = " << method_name(cfg.unlearn.method) << "\n";
  out << "unlearn.variant = " << variant_name(cfg.unlearn.variant) << "\n";
  out << "unlearn.c = " << fmt_float(cfg.unlearn.c) << "\n";
  out << "unlearn.tau = " << fmt_float(cfg.unlearn.tau) << "\n";
  out << "unlearn.lambda_min = " << fmt_float(cfg.unlearn.lambda_min) << "\n";
  out << "unlearn.lambda_max = " << fmt_float(cfg.unlearn.lambda_max) << "\n";
  out << "unlearn.max_epochs = " << cfg.unlearn.max_epochs << "\n";
  out << "unlearn.steps_per_epoch = " << cfg.unlearn.steps_per_epoch << "\n";
  out << "unlearn.eval_every = " << cfg.unlearn.eval_every << "\n";
  out << "unlearn.retain_tolerance = " << fmt_float(cfg.unlearn.retain_tolerance) << "\n";
  out << "unlearn.npo_beta = " << fmt_float(cfg.unlearn.npo_beta) << "\n";
  out << "unlearn.rmu_scale = " << fmt_float(cfg.unlearn.rmu_scale) << "\n";
  out << "unlearn.rmu_alpha = " << fmt_float(cfg.unlearn.rmu_alpha) << "\n";
  out << "unlearn.rmu_layer = " << cfg.unlearn.rmu_layer << "\n";
  return out.str();
}

}  // namespace latentforge

#pragma once

#include <cstdint>
#include <string>

#include "latentforge/lm.hpp"
#include "latentforge/sae.hpp"
#include "latentforge/unlearn.hpp"

namespace latentforge {

struct WorldConfig {
  int n_known = 40;
  int n_unknown = 40;
  int facts_per_entity = 3;
  int fillers = 96;
  int heldout = 24;
  uint64_t seed = 0;  // derived from the global seed, not a config key
};

// Whole-experiment settings, parsed from flat `section.key = value` text.
// Stage seeds are derived from the single global seed so that one value
// pins the full pipeline.
struct ExperimentConfig {
  uint64_t seed = 0;
  std::string out = "out";
  std::string target = "0";  // known-entity selector: index or "given family"
  int eval_top_k = 50;

  WorldConfig world;
  TrainConfig train;
  SaeTrainConfig sae;
  UnlearnConfig unlearn;

  void finalize();        // fills the derived per-stage seeds
  void validate() const;  // throws ContractViolation
};

// Deterministic per-stage seed derived from the global seed.
uint64_t stage_seed(uint64_t global_seed, uint64_t stage);

// Parses, finalizes, and validates. Unknown keys and malformed values raise
// ParseError with a line number; a duplicated key warns and keeps the last
// value.
ExperimentConfig parse_config(const std::string& text);

// Canonical form: every key, fixed order, parseable by parse_config.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace latentforge

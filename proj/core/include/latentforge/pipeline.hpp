#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "latentforge/config.hpp"
#include "latentforge/eval.hpp"

namespace latentforge {

// FNV-1a, the pipeline's content-hash primitive for stage caching.
uint64_t fnv1a(const void* data, size_t n, uint64_t h = 14695981039346656037ull);
uint64_t fnv1a_str(const std::string& s, uint64_t h = 14695981039346656037ull);

// Hash of a stage's inputs: config fragments plus upstream artifact bytes.
// Missing files hash as their name plus a marker, so they still invalidate.
uint64_t hash_inputs(const std::vector<std::string>& strings,
                     const std::vector<std::string>& files);

// Runs the experiment stages against one output directory. Every stage is
// content-cached: it re-runs only when its config slice or any upstream
// artifact changed. All outputs are deterministic in the config, so two
// runs into fresh directories produce byte-identical files.
class Pipeline {
 public:
  explicit Pipeline(const ExperimentConfig& cfg);
  ~Pipeline();

  // Returns true when the stage actually ran, false when cached.
  bool gen_world();              // world.txt, dataset.txt
  bool pretrain_lm();            // model.lfck
  bool train_saes();             // saes.lfck, sae_quality.txt
  bool find_latents();           // latents.txt, scores.csv
  bool unlearn_method(Method m); // unlearn/<method>/...
  bool evaluate();               // metrics.txt
  bool train_oracle_lm();        // oracle.lfck
  bool report();                 // report.csv, summary.txt, csv extras, manifest.txt

  void run_all();  // all stages; unlearns every method

  // gen-world | pretrain | train-sae | find-latents | unlearn | evaluate |
  // oracle | report | run-all. `unlearn` uses the configured method.
  // Unknown names raise ContractViolation.
  void run_stage(const std::string& name);

  static const std::vector<Method>& all_methods();

  const ExperimentConfig& config() const { return cfg_; }
  const std::string& out_dir() const { return out_; }

  struct State;  // lazily parsed artifacts, an implementation detail

 private:
  ExperimentConfig cfg_;
  std::string out_;
  std::unique_ptr<State> st_;

  std::string path(const std::string& name) const;
};

}  // namespace latentforge

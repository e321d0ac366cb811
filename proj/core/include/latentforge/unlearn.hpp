#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "latentforge/corpus.hpp"
#include "latentforge/lm.hpp"
#include "latentforge/recognition.hpp"
#include "latentforge/sae.hpp"

namespace latentforge {

enum class Method { kProposal, kGa, kNpo, kRmu };
enum class DataVariant { kSentence, kEntity, kLastToken };

std::string method_name(Method m);
Method parse_method(const std::string& name);
std::string variant_name(DataVariant v);
DataVariant parse_variant(const std::string& name);

struct UnlearnConfig {
  Method method = Method::kProposal;
  DataVariant variant = DataVariant::kSentence;  // baselines only
  float c = 1.0f;           // hinge margin (forgetting intensity)
  float tau = 0.4f;         // recognition threshold (echoed into manifests)
  float lambda_min = 1e-6f;
  float lambda_max = 1e-5f;
  int max_epochs = 200;     // T
  int steps_per_epoch = 5;
  int eval_every = 10;
  float retain_tolerance = 0.10f;
  uint64_t seed = 0;
  float npo_beta = 0.1f;
  float rmu_scale = 0.0f;   // 0 = 5x mean forget activation norm
  float rmu_alpha = 1.0f;
  int rmu_layer = 0;        // 0 = ceil(L/2)

  void validate() const;    // throws ContractViolation
};

// Epoch-wise learning rate, low to high:
// lambda_t = lambda_min + (lambda_max - lambda_min) * (1 - cos(t*pi/T)) / 2.
// Endpoints returned bit-exactly.
float lr_schedule(int t, int T, float lambda_min, float lambda_max);

// Hinge loss over the recognition latents of one layer, measured at the
// last token of BOS + target name: known latents pay max(z_pre + c, 0),
// unknown latents pay max(-z_pre + c, 0).
double proposal_loss(const ModelParams& params, const SaeParams& sae,
                     const std::vector<int>& target_name, const RecognitionLatentSets& sets,
                     float c, int layer);

struct Snapshot {
  int epoch = 0;
  ModelParams params;
  double forget = 0.0;
  double retain = 0.0;
};

struct CheckpointSeries {
  std::vector<Snapshot> snapshots;   // epochs strictly increasing
  std::vector<double> epoch_loss;    // mean step loss per completed epoch
  bool nan_aborted = false;
  int abort_epoch = -1;
};

// Callback computing (forget score, retain score) for a parameter snapshot.
using MetricFn = std::function<std::pair<double, double>(const ModelParams&)>;

// Each run copies theta_orig, then performs max_epochs x steps_per_epoch
// Adam updates at the scheduled rate, snapshotting metrics every eval_every
// epochs. A NaN/Inf failure aborts the run and keeps the snapshots taken so
// far. All runs are bit-reproducible in (inputs, config.seed).

// One layer drawn per epoch uniformly from [1, L]; loss from that layer's
// recognition latents; SAE weights are inputs only and never updated.
CheckpointSeries unlearn_proposal(const ModelParams& orig, const std::vector<SaeParams>& saes,
                                  const std::vector<int>& target_name,
                                  const RecognitionLatentSets& sets, const UnlearnConfig& cfg,
                                  const MetricFn& metrics);

// Maximizes next-token NLL of the variant's data.
CheckpointSeries unlearn_ga(const ModelParams& orig, const Dataset& forget_set,
                            const std::vector<int>& target_name, const UnlearnConfig& cfg,
                            const MetricFn& metrics);

// Bounded suppression: (2/beta) * softplus(beta * (logpi - logpi_ref)) per
// token, reference frozen at theta_orig.
CheckpointSeries unlearn_npo(const ModelParams& orig, const Dataset& forget_set,
                             const std::vector<int>& target_name, const UnlearnConfig& cfg,
                             const MetricFn& metrics);

// Steers forget activations at one layer toward a random direction while
// anchoring retain activations to their original values.
CheckpointSeries unlearn_rmu(const ModelParams& orig, const Dataset& forget_set,
                             const Dataset& retain_set, const std::vector<int>& target_name,
                             const UnlearnConfig& cfg, const MetricFn& metrics);

struct EarlyStopChoice {
  int index = 0;       // into series.snapshots
  bool flagged = false;  // no snapshot met the retain budget
};

// Latest snapshot with retain >= (1 - tolerance) * baseline, else the
// earliest snapshot flagged.
EarlyStopChoice early_stop_select(const CheckpointSeries& series, double retain_baseline,
                                  double tolerance);

// Directory layout: <dir>/manifest.txt plus one epoch_<n>.lfck per
// snapshot. extra_manifest lines (config echo, flags) are stored verbatim.
void save_checkpoint_series(const std::string& dir, const CheckpointSeries& series,
                            const std::vector<std::string>& extra_manifest);
CheckpointSeries load_checkpoint_series(const std::string& dir);
std::vector<std::string> load_series_manifest(const std::string& dir);

}  // namespace latentforge

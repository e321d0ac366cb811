// Command-line front end over the experiment pipeline. Exit codes:
// 0 success, 1 bad usage or bad config, 2 stage failure.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latentforge/config.hpp"
#include "latentforge/corpus.hpp"
#include "latentforge/errors.hpp"
#include "latentforge/pipeline.hpp"

namespace lf = latentforge;

int main(int argc, char** argv) {
  CLI::App app{
      "latentforge: entity unlearning workbench on a synthetic corpus.\n"
      "Stages cache by content hash; point --out at one directory and rerun\n"
      "freely. LATENTFORGE_THREADS parallelizes probe scoring (default 1)."};
  app.require_subcommand(1);

  std::string config_path, out_dir, target, method;
  std::uint64_t seed = 0;

  struct StageDef {
    const char* name;
    const char* help;
    bool takes_method;
  };
  const std::vector<StageDef> stages = {
      {"gen-world", "generate the entity world and training corpus", false},
      {"pretrain", "train the base model on the corpus", false},
      {"train-sae", "train one sparse dictionary per layer", false},
      {"find-latents", "score latents and select the recognition sets", false},
      {"unlearn", "run one unlearning method against the target", true},
      {"evaluate", "probe every unlearned checkpoint series", false},
      {"oracle", "retrain from scratch without the forget set", false},
      {"report", "write report.csv, summary.txt and the manifest", false},
      {"run-all", "all stages in order; unlearns every method", true},
  };
  std::vector<CLI::App*> subs;
  for (const StageDef& s : stages) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--seed", seed, "global seed; stage seeds derive from it");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--target", target, "known-entity selector: index or 'given family'");
    if (s.takes_method)
      sub->add_option("--method", method, "proposal | ga | npo | rmu");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  CLI::App* sub = app.get_subcommands().front();

  lf::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = lf::parse_config(lf::load_text_file(config_path));
    if (sub->count("--seed")) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!target.empty()) cfg.target = target;
    if (!method.empty()) cfg.unlearn.method = lf::parse_method(method);
    cfg.finalize();
    cfg.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }

  try {
    lf::Pipeline pipeline(cfg);
    pipeline.run_stage(sub->get_name());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

// Command-line front end of the hierarchical attention network library.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "han/commands.hpp"
#include "han/kernels.hpp"
#include "han/run_config.hpp"

namespace {

struct CommonOptions {
  std::string config_file;
  int threads = 0;
  std::map<std::string, std::string> overrides;
};

// Every config key becomes a flag of the same name: --model.hidden 64.
void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_file, "Config file of 'key = value' lines");
  cmd->add_option("--threads", opts.threads, "Cap on worker threads (results do not depend on it)");
  for (const auto& [key, def] : han::RunConfig::defaults()) {
    cmd->add_option("--" + key, opts.overrides[key],
                    "default: " + (def.empty() ? std::string("(unset)") : def))
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

han::RunConfig resolve(CLI::App* cmd, const CommonOptions& opts) {
  han::RunConfig cfg;
  if (!opts.config_file.empty()) cfg.merge_file(opts.config_file);
  for (const auto& [key, value] : opts.overrides) {
    if (cmd->get_option("--" + key)->count() > 0) cfg.set(key, value);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical attention network for two-stream sequence classification"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string checkpoint;
  std::string sample;
  std::string corrupt_block;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  auto* train = app.add_subcommand("train", "Train a model; writes a checkpoint and metrics CSV");
  auto* eval = app.add_subcommand("eval", "Accuracy and per-class accuracy of a checkpoint");
  auto* dump = app.add_subcommand("attention-dump", "Per-frame attention weights as CSV");
  auto* grad = app.add_subcommand("gradcheck", "Compare BPTT gradients with finite differences");
  for (auto* cmd : {gen, train, eval, dump, grad}) add_common(cmd, opts);
  for (auto* cmd : {eval, dump}) {
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint file (defaults to out.checkpoint)");
  }
  dump->add_option("--sample", sample, "Sample id (default: every sample in the manifest)");
  grad->add_option("--corrupt-block", corrupt_block,
                   "Perturb this block's analytic gradient (self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : han::cli::kInputError;
  }

  CLI::App* cmd = app.get_subcommands().front();
  han::RunConfig cfg;
  const int rc = han::cli::guarded(
      [&] {
        cfg = resolve(cmd, opts);
        return 0;
      },
      std::cerr);
  if (rc != 0) return rc;
  han::kernels::set_threads(opts.threads);

  if (cmd == gen) return han::cli::gen_data(cfg, std::cout, std::cerr);
  if (cmd == train) return han::cli::train(cfg, std::cout, std::cerr);
  if (cmd == eval) return han::cli::eval(cfg, checkpoint, std::cout, std::cerr);
  if (cmd == dump) return han::cli::attention_dump(cfg, checkpoint, sample, std::cout, std::cerr);
  return han::cli::gradcheck(cfg, corrupt_block, std::cout, std::cerr);
}

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace fmf;
using namespace fmf::cli;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string channels;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required, const std::string& seed_help) {
  auto* config = cmd->add_option("--config", f.config, "key = value config file with [section] headers");
  if (config_required) config->required();
  cmd->add_option("--out", f.out, "output directory (overrides output.dir)");
  cmd->add_option("--seed", f.seed, seed_help);
  cmd->add_option("--variant", f.variant,
                  "Baseline, AllFilterU, AllFilterB, BaseSharing or WeightedSharing");
  cmd->add_option("--set", f.overrides, "override any key, e.g. --set training.steps=10")
      ->take_all()
      ->allow_extra_args(false);
}

// config file, then --set in order, then the dedicated flags
ExperimentConfig resolve(const CommonFlags& f, std::string_view seed_key) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(f.config);
  for (const auto& o : f.overrides) cfg.apply_override(o);
  if (!f.variant.empty()) cfg.set("model", "variant", f.variant);
  if (!f.channels.empty()) cfg.set("model", "channels", f.channels);
  if (f.seed) {
    const auto dot = seed_key.find('.');
    cfg.set(seed_key.substr(0, dot), seed_key.substr(dot + 1), std::to_string(*f.seed));
  }
  if (!f.out.empty()) cfg.out_dir = f.out;
  return cfg;
}

std::optional<Variant> pinned_variant(const CommonFlags& f) {
  if (f.variant.empty()) return std::nullopt;
  try {
    return parse_variant(f.variant);
  } catch (const SpecError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal fusion road segmentation experiments"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, fd_f, cost_f, gen_f;
  std::string eval_ckpt, fd_ckpt;
  std::optional<std::size_t> fd_pairs;
  std::string fd_aggregate;
  bool cost_all = false;
  std::string cost_format = "table";

  auto* train = app.add_subcommand("train", "train one variant and save a checkpoint");
  add_common(train, train_f, true, "training seed (initialization and scene order)");
  train->add_option("--channels", train_f.channels, "encoder widths, e.g. 8,16,32,64");

  auto* eval = app.add_subcommand("eval", "metrics per scene kind on the test split");
  add_common(eval, eval_f, false, "data split seed");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory (default <out>/checkpoint)");

  auto* fd = app.add_subcommand("fd-profile", "per-stage feature disparity on seeded pairs");
  add_common(fd, fd_f, false, "seed of the first profiled pair");
  fd->add_option("--checkpoint", fd_ckpt, "checkpoint directory (default <out>/checkpoint)");
  fd->add_option("--pairs", fd_pairs, "number of scene pairs");
  fd->add_option("--aggregate", fd_aggregate, "none, mean or both")
      ->check(CLI::IsMember({"none", "mean", "both"}));

  auto* cost = app.add_subcommand("cost", "parameter and MAC counts");
  add_common(cost, cost_f, false, "recorded in the echoed config only");
  cost->add_option("--channels", cost_f.channels, "encoder widths, e.g. 8,16,32,64");
  cost->add_flag("--all", cost_all, "report all five variants");
  cost->add_option("--format", cost_format, "table or json")->check(CLI::IsMember({"table", "json"}));

  auto* gen = app.add_subcommand("gen-data", "write the synthetic scenes as PPM/PGM");
  add_common(gen, gen_f, false, "data split seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidConfig;
  }

  try {
    if (train->parsed()) {
      cmd_train(resolve(train_f, "training.seed"), std::cout);
    } else if (eval->parsed()) {
      const ExperimentConfig cfg = resolve(eval_f, "data.seed");
      cmd_eval(cfg, eval_ckpt.empty() ? cfg.out_dir / "checkpoint" : std::filesystem::path(eval_ckpt),
               pinned_variant(eval_f), std::cout);
    } else if (fd->parsed()) {
      ExperimentConfig cfg = resolve(fd_f, "fd_profile.seed");
      if (fd_pairs) cfg.set("fd_profile", "pairs", std::to_string(*fd_pairs));
      if (!fd_aggregate.empty()) cfg.set("fd_profile", "aggregate", fd_aggregate);
      cmd_fd_profile(cfg, fd_ckpt.empty() ? cfg.out_dir / "checkpoint" : std::filesystem::path(fd_ckpt),
                     pinned_variant(fd_f), std::cout);
    } else if (cost->parsed()) {
      const ExperimentConfig cfg = resolve(cost_f, "training.seed");
      const std::optional<std::filesystem::path> dir =
          cost_f.out.empty() ? std::nullopt : std::optional<std::filesystem::path>(cost_f.out);
      cmd_cost(cfg, cost_all, cost_format == "json" ? CostFormat::Json : CostFormat::Table, dir,
               std::cout);
    } else if (gen->parsed()) {
      cmd_gen_data(resolve(gen_f, "data.seed"), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "fmfusion: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitOk;
}

#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "fmfusion/edges.hpp"

namespace fmf::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInvalidConfig = 2,
  kExitNonFiniteLoss = 3,
  kExitBadCheckpoint = 4,
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Writes <out>/train.ini, <out>/loss.csv and <out>/checkpoint/.
void cmd_train(const ExperimentConfig& cfg, std::ostream& log);

/// Metrics over the configured test split; JSON to <out>/metrics.json and `out`.
/// The architecture comes from the checkpoint; `expected` rejects a mismatch.
void cmd_eval(ExperimentConfig cfg, const std::filesystem::path& checkpoint,
              std::optional<Variant> expected, std::ostream& out);

/// Per-stage FD over cfg.fd.pairs seeded scene pairs, to <out>/fd_profile.csv.
void cmd_fd_profile(ExperimentConfig cfg, const std::filesystem::path& checkpoint,
                    std::optional<Variant> expected, std::ostream& log);

enum class CostFormat { Table, Json };

/// One report (or all five variants) to `out`; also to <dir>/cost.{txt,json} when `dir` is set.
void cmd_cost(const ExperimentConfig& cfg, bool all_variants, CostFormat format,
              const std::optional<std::filesystem::path>& dir, std::ostream& out);

/// PPM/PGM images of both splits plus <out>/scenes.csv.
void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log);

/// pair_id,stage,fd rows; with `aggregate` "mean" or "both" one row per stage
/// with pair_id "mean" follows ("mean" alone omits the per-pair rows).
void write_fd_profile_csv(std::ostream& os, const std::vector<FeatureDisparityReport>& reports,
                          const std::string& aggregate);

}  // namespace fmf::cli

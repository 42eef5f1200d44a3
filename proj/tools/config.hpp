#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fmfusion/fusion_net.hpp"
#include "fmfusion/train.hpp"

namespace fmf::cli {

/// Anything wrong with a config file or an override. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IniEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Line-oriented `key = value` with `[section]` headers. Blank lines and lines
/// starting with '#' or ';' are ignored. Keys must be unique per section.
std::vector<IniEntry> parse_ini(std::string_view text);

struct ModelConfig {
  Variant variant = Variant::Baseline;
  std::vector<std::size_t> channels{8, 16, 32, 64};
  std::optional<std::set<std::size_t>> shared_stages;  // nullopt: the variant's default

  ArchitectureSpec spec() const;
};

struct DataConfig {
  std::uint64_t seed = 1000;
  std::size_t train_scenes = 30;
  std::size_t test_scenes = 30;
  std::size_t height = 64;
  std::size_t width = 64;
};

struct FdProfileConfig {
  std::size_t pairs = 10;
  std::uint64_t seed = 5000;
  std::string aggregate = "both";  // none | mean | both
};

struct ExperimentConfig {
  ModelConfig model;
  TrainingConfig training;
  DataConfig data;
  double threshold = 0.5;
  FdProfileConfig fd;
  std::filesystem::path out_dir = "runs/default";

  /// Defaults overlaid with every entry of `text`; unknown sections or keys
  /// and unparsable values throw ConfigError naming the line.
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// `section.key=value`, same value syntax as the file.
  void apply_override(std::string_view assignment);
  void set(std::string_view section, std::string_view key, std::string_view value);

  /// Cross-field checks (architecture, training ranges, image size).
  void validate() const;

  /// Fully resolved config; parse(to_ini()) reproduces this object.
  std::string to_ini() const;
};

/// Comma-separated non-negative integers, e.g. "8,16,32,64". Spaces around
/// entries are allowed; empty entries are not. "none" is the empty list.
std::vector<std::size_t> parse_index_list(std::string_view text);

}  // namespace fmf::cli

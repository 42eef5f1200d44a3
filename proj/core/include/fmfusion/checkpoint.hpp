#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "fmfusion/fusion_net.hpp"

namespace fmf {

/// Missing, malformed, or inconsistent checkpoint directory.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  FusionNetwork net;
  std::uint64_t step = 0;
};

/// Writes `dir/manifest.json` (spec, seed, step, parameter table) and one
/// FMTENS01 blob per named parameter under `dir/params/`.
void save_checkpoint(const std::filesystem::path& dir, const FusionNetwork& net,
                     std::uint64_t step);

/// Rebuilds the network from the manifest and overwrites every parameter from
/// its blob. Parameter values round-trip through binary32.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::string spec_to_json(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json(const std::string& text);

}  // namespace fmf

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "fmfusion/tensor.hpp"

namespace fmf {

/// Road-scene categories mimicked geometrically: marked (UM), multi-lane
/// marked (UMM), unmarked (UU).
enum class SceneKind { UM, UMM, UU };

inline constexpr SceneKind kAllSceneKinds[] = {SceneKind::UM, SceneKind::UMM, SceneKind::UU};

std::string_view scene_kind_name(SceneKind kind);
SceneKind parse_scene_kind(std::string_view name);

/// Lighting change applied to the camera image only.
struct PerturbSpec {
  double brightness = 0.0;  // additive, result clamped to [0,1]
};

struct ScenePair {
  Tensor rgb;    // [3,H,W] in [0,1]
  Tensor depth;  // [1,H,W] in [0,1], near = high
  Tensor mask;   // [1,H,W], 1 = drivable road
  SceneKind kind = SceneKind::UM;
  std::uint64_t seed = 0;
};

/// Deterministic scene: trapezoidal road from the bottom edge narrowing to the
/// horizon, value-noise textures, off-road block obstacles, planar road depth.
/// Requires h, w >= 32 and divisible by 16.
ScenePair generate_scene(std::uint64_t seed, SceneKind kind, std::size_t h, std::size_t w,
                         const PerturbSpec& perturb = {});

struct DataSplit {
  std::vector<ScenePair> train;
  std::vector<ScenePair> test;
};

/// Train scenes use seeds [seed, seed+n_train), test scenes the next n_test
/// seeds; kinds cycle UM, UMM, UU in each split.
DataSplit make_split(std::uint64_t seed, std::size_t n_train, std::size_t n_test,
                     std::size_t h = 64, std::size_t w = 64);

/// Stacked batch tensors [B,3,H,W], [B,1,H,W], [B,1,H,W].
struct Batch {
  Tensor rgb;
  Tensor depth;
  Tensor mask;
};
Batch stack_scenes(std::span<const ScenePair> scenes);
Batch stack_scenes(std::span<const ScenePair* const> scenes);

/// Binary 8-bit PPM (P6) from [3,H,W] and PGM (P5) from [1,H,W].
void write_ppm(const std::filesystem::path& path, const Tensor& rgb);
void write_pgm(const std::filesystem::path& path, const Tensor& gray);

}  // namespace fmf

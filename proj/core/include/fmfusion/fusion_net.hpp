#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fmfusion/tensor.hpp"

namespace fmf {

/// Inconsistent or invalid architecture description.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Variant { Baseline, AllFilterU, AllFilterB, BaseSharing, WeightedSharing };

inline constexpr std::array<Variant, 5> kAllVariants = {
    Variant::Baseline, Variant::AllFilterU, Variant::AllFilterB, Variant::BaseSharing,
    Variant::WeightedSharing};

std::string_view variant_name(Variant v);
/// Accepts the canonical names and the underscore spellings (AllFilter_U, ...),
/// case-insensitively. Throws SpecError on anything else.
Variant parse_variant(std::string_view name);

/// Declarative description of a two-branch fusion network.
struct ArchitectureSpec {
  Variant variant = Variant::Baseline;
  std::vector<std::size_t> stage_channels{8, 16, 32, 64};
  std::size_t rgb_channels = 3;
  std::size_t depth_channels = 1;
  std::size_t num_classes = 1;
  std::set<std::size_t> shared_stages;

  /// Spec for `v` with the default shared set ({last stage}) for sharing variants.
  static ArchitectureSpec for_variant(Variant v,
                                      std::vector<std::size_t> channels = {8, 16, 32, 64});

  std::size_t stage_count() const { return stage_channels.size(); }
  bool uses_sharing() const;
  bool uses_fusion_filters() const;
  bool uses_awn() const { return variant == Variant::WeightedSharing; }
  bool is_shared(std::size_t stage) const { return shared_stages.count(stage) != 0; }

  std::size_t rgb_in_channels(std::size_t stage) const;
  std::size_t depth_in_channels(std::size_t stage) const;
  std::size_t decoder_in_channels(std::size_t stage) const;

  void validate() const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

struct ConvLayer {
  Tensor weight;  // [Cout, Cin, K, K]
  Tensor bias;    // [Cout]
};

struct LinearLayer {
  Tensor weight;  // [Dout, D]
  Tensor bias;    // [Dout]
};

/// Produces the per-sample depth weight w in (0,1) for a shared stage:
/// w = sigmoid(fc2(relu(fc1(global_mean(probe(f_R) - probe(f_D)))))).
struct AuxiliaryWeightNetwork {
  ConvLayer probe;  // 3x3, C -> C, applied to both branches
  LinearLayer fc1;  // C -> max(1, C/2)
  LinearLayer fc2;  // max(1, C/2) -> 1

  Tensor weight(const Tensor& rgb_features, const Tensor& depth_features) const;
};

enum class FusionKind { Sum, FilterUnidirectional, FilterBidirectional, Shared };

/// How one encoder stage combines its branch feature maps.
struct StageFusion {
  FusionKind kind = FusionKind::Sum;
  ConvLayer depth_to_rgb;  // Fusion-filter W_f, 1x1 (filter kinds)
  ConvLayer rgb_to_depth;  // reverse filter, 1x1 (bidirectional only)
  std::optional<AuxiliaryWeightNetwork> awn;  // shared stages of WeightedSharing
};

/// Returns (fused RGB map, depth map passed forward).
///   Sum:            f_R + f_D,               f_D
///   FilterUni:      f_R + conv1x1(f_D; W_f), f_D
///   FilterBi:       f_R + conv1x1(f_D; W_f), f_D + conv1x1(f_R; W_g)
///   Shared:         fuse_shared(f_R, f_D, awn), f_D
std::pair<Tensor, Tensor> fuse_stage(const Tensor& rgb_features, const Tensor& depth_features,
                                     const StageFusion& stage);

/// f_R + f_D without an AWN, f_R + w * f_D with one.
Tensor fuse_shared(const Tensor& rgb_features, const Tensor& depth_features,
                   const AuxiliaryWeightNetwork* awn);

struct ForwardResult {
  Tensor logits;                                     // [N, num_classes, H, W]
  std::vector<std::pair<Tensor, Tensor>> stage_features;  // pre-fusion (f_R, f_D) per stage
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Two-branch encoder-decoder with per-stage fusion.
///
/// Encoder stage i, per branch: conv3x3 -> relu -> fuse -> maxpool2. The fused
/// RGB map feeds the next RGB stage and the decoder skip at the same depth.
/// Decoder stage i: upsample2 -> conv3x3 -> relu -> + skip_i. A final 1x1
/// conv produces logits at input resolution.
///
/// Copies share parameter storage; clone() makes an independent network.
class FusionNetwork {
 public:
  static FusionNetwork build(const ArchitectureSpec& spec, std::uint64_t seed);

  ForwardResult forward(const Tensor& rgb, const Tensor& depth) const;

  const ArchitectureSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

  /// Every trainable tensor exactly once, in a fixed order.
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  const Tensor* find_parameter(std::string_view name) const;

  ConvLayer& rgb_stage(std::size_t i) { return rgb_stages_.at(i); }
  ConvLayer& depth_stage(std::size_t i) { return depth_stages_.at(i); }
  StageFusion& fusion(std::size_t i) { return fusions_.at(i); }
  const StageFusion& fusion(std::size_t i) const { return fusions_.at(i); }
  ConvLayer& decoder_stage(std::size_t i) { return decoder_.at(i); }
  ConvLayer& head() { return head_; }

  std::size_t fusion_filter_count() const;

  FusionNetwork clone() const;
  void zero_grad();

 private:
  FusionNetwork() = default;

  ArchitectureSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<ConvLayer> rgb_stages_;
  std::vector<ConvLayer> depth_stages_;
  std::vector<StageFusion> fusions_;
  std::vector<ConvLayer> decoder_;  // indexed by stage depth
  ConvLayer head_;
  std::vector<NamedParameter> params_;
};

}  // namespace fmf

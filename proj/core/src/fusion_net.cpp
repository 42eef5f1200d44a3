#include "fmfusion/fusion_net.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "fmfusion/ops.hpp"
#include "fmfusion/rng.hpp"

namespace fmf {

namespace {

constexpr double kFusionFilterNoise = 0.01;

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '_' || c == '-') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

double fan_in_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

ConvLayer make_conv(std::size_t cin, std::size_t cout, std::size_t k, Rng& rng) {
  const double b = fan_in_bound(cin * k * k);
  ConvLayer layer{uniform_tensor({cout, cin, k, k}, -b, b, rng), Tensor::zeros({cout})};
  layer.weight.set_requires_grad();
  layer.bias.set_requires_grad();
  return layer;
}

LinearLayer make_linear(std::size_t din, std::size_t dout, Rng& rng) {
  const double b = fan_in_bound(din);
  LinearLayer layer{uniform_tensor({dout, din}, -b, b, rng), Tensor::zeros({dout})};
  layer.weight.set_requires_grad();
  layer.bias.set_requires_grad();
  return layer;
}

// Identity channel mapping plus small uniform noise.
ConvLayer make_fusion_filter(std::size_t channels, Rng& rng) {
  ConvLayer layer{uniform_tensor({channels, channels, 1, 1}, -kFusionFilterNoise,
                                 kFusionFilterNoise, rng),
                  Tensor::zeros({channels})};
  auto w = layer.weight.data();
  for (std::size_t c = 0; c < channels; ++c) w[c * channels + c] += 1.0;
  layer.weight.set_requires_grad();
  layer.bias.set_requires_grad();
  return layer;
}

Tensor conv3x3(const Tensor& x, const ConvLayer& layer) {
  return conv2d(x, layer.weight, layer.bias, 1, 1);
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "Baseline";
    case Variant::AllFilterU: return "AllFilterU";
    case Variant::AllFilterB: return "AllFilterB";
    case Variant::BaseSharing: return "BaseSharing";
    case Variant::WeightedSharing: return "WeightedSharing";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  const std::string key = lower(name);
  for (Variant v : kAllVariants) {
    if (lower(variant_name(v)) == key) return v;
  }
  throw SpecError("unknown variant '" + std::string(name) +
                  "' (expected Baseline, AllFilterU, AllFilterB, BaseSharing, WeightedSharing)");
}

ArchitectureSpec ArchitectureSpec::for_variant(Variant v, std::vector<std::size_t> channels) {
  ArchitectureSpec spec;
  spec.variant = v;
  spec.stage_channels = std::move(channels);
  if (spec.uses_sharing() && !spec.stage_channels.empty()) {
    spec.shared_stages = {spec.stage_channels.size() - 1};
  }
  return spec;
}

bool ArchitectureSpec::uses_sharing() const {
  return variant == Variant::BaseSharing || variant == Variant::WeightedSharing;
}

bool ArchitectureSpec::uses_fusion_filters() const {
  return variant == Variant::AllFilterU || variant == Variant::AllFilterB;
}

std::size_t ArchitectureSpec::rgb_in_channels(std::size_t stage) const {
  return stage == 0 ? rgb_channels : stage_channels.at(stage - 1);
}

std::size_t ArchitectureSpec::depth_in_channels(std::size_t stage) const {
  return stage == 0 ? depth_channels : stage_channels.at(stage - 1);
}

std::size_t ArchitectureSpec::decoder_in_channels(std::size_t stage) const {
  return stage + 1 == stage_channels.size() ? stage_channels.back()
                                            : stage_channels.at(stage + 1);
}

void ArchitectureSpec::validate() const {
  if (stage_channels.empty()) throw SpecError("stage_channels must list at least one stage");
  for (std::size_t c : stage_channels) {
    if (c == 0) throw SpecError("stage_channels entries must be positive");
  }
  if (rgb_channels == 0 || depth_channels == 0) {
    throw SpecError("input channel counts must be positive");
  }
  if (num_classes == 0) throw SpecError("num_classes must be positive");
  if (uses_sharing() && shared_stages.empty()) {
    throw SpecError(std::string(variant_name(variant)) + " needs at least one shared stage");
  }
  if (!uses_sharing() && !shared_stages.empty()) {
    throw SpecError(std::string(variant_name(variant)) + " does not allow shared stages");
  }
  for (std::size_t s : shared_stages) {
    if (s >= stage_count()) {
      throw SpecError("shared stage " + std::to_string(s) + " out of range for " +
                      std::to_string(stage_count()) + " stages");
    }
    if (rgb_in_channels(s) != depth_in_channels(s)) {
      throw SpecError("stage " + std::to_string(s) +
                      " cannot be shared: branch input channel counts differ");
    }
  }
}

Tensor AuxiliaryWeightNetwork::weight(const Tensor& rgb_features,
                                      const Tensor& depth_features) const {
  const Tensor diff = sub(conv3x3(rgb_features, probe), conv3x3(depth_features, probe));
  const Tensor hidden = relu(fully_connected(global_mean(diff), fc1.weight, fc1.bias));
  return sigmoid(fully_connected(hidden, fc2.weight, fc2.bias));
}

Tensor fuse_shared(const Tensor& rgb_features, const Tensor& depth_features,
                   const AuxiliaryWeightNetwork* awn) {
  if (rgb_features.shape() != depth_features.shape()) {
    throw ShapeError("fuse_shared: shape mismatch " + shape_string(rgb_features.shape()) + " vs " +
                     shape_string(depth_features.shape()));
  }
  if (awn == nullptr) return add(rgb_features, depth_features);
  const Tensor w = awn->weight(rgb_features, depth_features);
  return add(rgb_features, scale_per_sample(depth_features, w));
}

std::pair<Tensor, Tensor> fuse_stage(const Tensor& rgb_features, const Tensor& depth_features,
                                     const StageFusion& stage) {
  if (rgb_features.shape() != depth_features.shape()) {
    throw ShapeError("fuse_stage: shape mismatch " + shape_string(rgb_features.shape()) + " vs " +
                     shape_string(depth_features.shape()));
  }
  switch (stage.kind) {
    case FusionKind::Sum:
      return {add(rgb_features, depth_features), depth_features};
    case FusionKind::FilterUnidirectional:
      return {add(rgb_features, conv1x1(depth_features, stage.depth_to_rgb.weight,
                                        stage.depth_to_rgb.bias)),
              depth_features};
    case FusionKind::FilterBidirectional: {
      Tensor rgb_out = add(rgb_features, conv1x1(depth_features, stage.depth_to_rgb.weight,
                                                 stage.depth_to_rgb.bias));
      Tensor depth_out = add(depth_features, conv1x1(rgb_features, stage.rgb_to_depth.weight,
                                                     stage.rgb_to_depth.bias));
      return {std::move(rgb_out), std::move(depth_out)};
    }
    case FusionKind::Shared:
      return {fuse_shared(rgb_features, depth_features, stage.awn ? &*stage.awn : nullptr),
              depth_features};
  }
  throw SpecError("unknown fusion kind");
}

FusionNetwork FusionNetwork::build(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  FusionNetwork net;
  net.spec_ = spec;
  net.seed_ = seed;
  Rng rng(seed);
  auto reg = [&net](std::string name, const Tensor& t) {
    net.params_.push_back(NamedParameter{std::move(name), t});
  };
  auto reg_conv = [&reg](const std::string& prefix, const ConvLayer& l) {
    reg(prefix + ".weight", l.weight);
    reg(prefix + ".bias", l.bias);
  };

  const std::size_t stages = spec.stage_count();
  for (std::size_t i = 0; i < stages; ++i) {
    const std::size_t c = spec.stage_channels[i];
    const std::string idx = std::to_string(i);

    net.rgb_stages_.push_back(make_conv(spec.rgb_in_channels(i), c, 3, rng));
    reg_conv("enc.rgb." + idx, net.rgb_stages_.back());
    if (spec.is_shared(i)) {
      net.depth_stages_.push_back(net.rgb_stages_.back());  // aliases the RGB filters
    } else {
      net.depth_stages_.push_back(make_conv(spec.depth_in_channels(i), c, 3, rng));
      reg_conv("enc.depth." + idx, net.depth_stages_.back());
    }

    StageFusion fusion;
    if (spec.uses_fusion_filters()) {
      fusion.kind = spec.variant == Variant::AllFilterU ? FusionKind::FilterUnidirectional
                                                        : FusionKind::FilterBidirectional;
      fusion.depth_to_rgb = make_fusion_filter(c, rng);
      reg_conv("fusion." + idx + ".depth_to_rgb", fusion.depth_to_rgb);
      if (fusion.kind == FusionKind::FilterBidirectional) {
        fusion.rgb_to_depth = make_fusion_filter(c, rng);
        reg_conv("fusion." + idx + ".rgb_to_depth", fusion.rgb_to_depth);
      }
    } else if (spec.is_shared(i)) {
      fusion.kind = FusionKind::Shared;
      if (spec.uses_awn()) {
        const std::size_t hidden = std::max<std::size_t>(1, c / 2);
        AuxiliaryWeightNetwork awn{make_conv(c, c, 3, rng), make_linear(c, hidden, rng),
                                   make_linear(hidden, 1, rng)};
        reg_conv("awn." + idx + ".probe", awn.probe);
        reg("awn." + idx + ".fc1.weight", awn.fc1.weight);
        reg("awn." + idx + ".fc1.bias", awn.fc1.bias);
        reg("awn." + idx + ".fc2.weight", awn.fc2.weight);
        reg("awn." + idx + ".fc2.bias", awn.fc2.bias);
        fusion.awn = std::move(awn);
      }
    }
    net.fusions_.push_back(std::move(fusion));
  }

  net.decoder_.resize(stages);
  for (std::size_t k = stages; k-- > 0;) {
    net.decoder_[k] = make_conv(spec.decoder_in_channels(k), spec.stage_channels[k], 3, rng);
    reg_conv("dec." + std::to_string(k), net.decoder_[k]);
  }
  net.head_ = make_conv(spec.stage_channels.front(), spec.num_classes, 1, rng);
  reg_conv("head", net.head_);
  return net;
}

ForwardResult FusionNetwork::forward(const Tensor& rgb, const Tensor& depth) const {
  if (rgb.rank() != 4 || depth.rank() != 4) {
    throw ShapeError("forward: inputs must be [N,C,H,W], got rgb " + shape_string(rgb.shape()) +
                     ", depth " + shape_string(depth.shape()));
  }
  if (rgb.dim(1) != spec_.rgb_channels || depth.dim(1) != spec_.depth_channels) {
    throw ShapeError("forward: expected " + std::to_string(spec_.rgb_channels) + " rgb and " +
                     std::to_string(spec_.depth_channels) + " depth channels, got rgb " +
                     shape_string(rgb.shape()) + ", depth " + shape_string(depth.shape()));
  }
  if (rgb.dim(0) != depth.dim(0) || rgb.dim(2) != depth.dim(2) || rgb.dim(3) != depth.dim(3)) {
    throw ShapeError("forward: rgb " + shape_string(rgb.shape()) + " and depth " +
                     shape_string(depth.shape()) + " disagree on batch or spatial extent");
  }
  const std::size_t stages = spec_.stage_count();
  const std::size_t factor = std::size_t{1} << stages;
  if (rgb.dim(2) == 0 || rgb.dim(2) % factor != 0 || rgb.dim(3) == 0 || rgb.dim(3) % factor != 0) {
    throw ShapeError("forward: spatial dims " + shape_string(rgb.shape()) +
                     " must be divisible by " + std::to_string(factor));
  }

  ForwardResult result;
  std::vector<Tensor> skips;
  Tensor x_rgb = rgb;
  Tensor x_depth = depth;
  for (std::size_t i = 0; i < stages; ++i) {
    Tensor f_rgb = relu(conv3x3(x_rgb, rgb_stages_[i]));
    Tensor f_depth = relu(conv3x3(x_depth, depth_stages_[i]));
    result.stage_features.emplace_back(f_rgb, f_depth);
    auto [fused_rgb, fused_depth] = fuse_stage(f_rgb, f_depth, fusions_[i]);
    x_rgb = maxpool2(fused_rgb);
    if (i + 1 < stages) x_depth = maxpool2(fused_depth);
    skips.push_back(std::move(fused_rgb));
  }

  Tensor d = x_rgb;
  for (std::size_t k = stages; k-- > 0;) {
    d = add(relu(conv3x3(upsample2(d), decoder_[k])), skips[k]);
  }
  result.logits = conv1x1(d, head_.weight, head_.bias);
  return result;
}

std::size_t FusionNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

const Tensor* FusionNetwork::find_parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

std::size_t FusionNetwork::fusion_filter_count() const {
  std::size_t n = 0;
  for (const auto& f : fusions_) {
    if (f.kind == FusionKind::FilterUnidirectional) n += 1;
    if (f.kind == FusionKind::FilterBidirectional) n += 2;
  }
  return n;
}

FusionNetwork FusionNetwork::clone() const {
  FusionNetwork copy = build(spec_, seed_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = copy.params_[i].tensor.data();
    const auto src = params_[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return copy;
}

void FusionNetwork::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace fmf

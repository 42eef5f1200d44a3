#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fmfusion/fusion_net.hpp"
#include "fmfusion/synth.hpp"
#include "fmfusion/tensor.hpp"

namespace fmf {

/// Weight of the feature-disparity term in the composite loss.
inline constexpr double kDefaultAlpha = 0.3;

struct TrainingConfig {
  double alpha = kDefaultAlpha;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t steps = 500;
  std::size_t batch_size = 2;
  std::optional<std::set<std::size_t>> fd_stages;  // nullopt: every fusion stage
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate(std::size_t stage_count) const;
  std::vector<std::size_t> resolved_fd_stages(std::size_t stage_count) const;
};

struct LossBreakdown {
  double seg_loss = 0.0;
  std::vector<std::pair<std::size_t, double>> fd_losses;  // (stage, FD)
  double alpha = 0.0;
  double total = 0.0;

  /// seg_loss + alpha * (fd_0 + fd_1 + ...), summed in stage order.
  double recombined() const;
};

/// Whether the FD term exists in the graph at all. SegmentationOnly skips
/// every FD computation, including the logged values.
enum class LossPath { Full, SegmentationOnly };

/// Mean per-pixel binary cross-entropy with logits, in the stable form
/// max(z,0) - z*y + log(1 + exp(-|z|)). The mask must be 0/1.
Tensor segmentation_loss(const Tensor& logits, const Tensor& mask);

struct LossTerms {
  Tensor total;  // scalar, recorded on the active tape
  LossBreakdown breakdown;
};

/// Forward pass plus the composite loss seg + alpha * sum_i FD_i over the
/// configured stages' pre-fusion features. With alpha == 0 the FD values are
/// still reported but computed outside the tape, so they contribute nothing
/// to backward.
LossTerms total_loss(const FusionNetwork& net, const Tensor& rgb, const Tensor& depth,
                     const Tensor& mask, const TrainingConfig& cfg, LossPath path = LossPath::Full);

/// Momentum state, one buffer per parameter.
using VelocityState = std::vector<std::vector<double>>;

/// v <- momentum * v + g; w <- w - lr * v, with g read from each tensor's grad.
/// Tensors without a gradient are treated as g = 0.
void sgd_step(std::span<Tensor> params, double lr, double momentum, VelocityState& velocity);

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::size_t step, double value);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

struct TrainResult {
  FusionNetwork net;
  std::vector<LossBreakdown> history;
};

/// Deterministic SGD training; the network is initialized from cfg.seed and
/// scenes are visited in a seeded per-epoch permutation.
TrainResult train(const ArchitectureSpec& spec, const TrainingConfig& cfg,
                  std::span<const ScenePair> data, LossPath path = LossPath::Full);

/// step,seg_loss,fd_stage_<i>...,total
void write_loss_csv(std::ostream& os, const std::vector<LossBreakdown>& history);

}  // namespace fmf

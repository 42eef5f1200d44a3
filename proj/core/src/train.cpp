#include "fmfusion/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "fmfusion/edges.hpp"
#include "fmfusion/ops.hpp"
#include "fmfusion/rng.hpp"
#include "fmfusion/tape.hpp"

namespace fmf {

void TrainingConfig::validate(std::size_t stage_count) const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("alpha must be a finite value >= 0");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (fd_stages) {
    for (std::size_t s : *fd_stages) {
      if (s >= stage_count) {
        throw std::invalid_argument("fd stage " + std::to_string(s) + " out of range for " +
                                    std::to_string(stage_count) + " stages");
      }
    }
  }
}

std::vector<std::size_t> TrainingConfig::resolved_fd_stages(std::size_t stage_count) const {
  if (fd_stages) return {fd_stages->begin(), fd_stages->end()};
  std::vector<std::size_t> all(stage_count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

double LossBreakdown::recombined() const {
  double fd_sum = 0.0;
  for (const auto& [stage, fd] : fd_losses) fd_sum += fd;
  return seg_loss + alpha * fd_sum;
}

Tensor segmentation_loss(const Tensor& logits, const Tensor& mask) {
  if (logits.shape() != mask.shape()) {
    throw ShapeError("segmentation_loss: logits " + shape_string(logits.shape()) +
                     " vs mask " + shape_string(mask.shape()));
  }
  const auto z = logits.data();
  const auto y = mask.data();
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("segmentation_loss: mask must be 0/1");
  }
  if (z.empty()) throw ShapeError("segmentation_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    acc += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double inv = 1.0 / static_cast<double>(z.size());
  Tensor out = Tensor::scalar(acc * inv);
  if (should_record({&logits})) {
    record_op(out, [logits, mask, inv](std::span<const double> g) {
      const auto z = logits.data();
      const auto y = mask.data();
      auto gz = logits.mutable_grad();
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-z[i]));
        gz[i] += g[0] * (p - y[i]) * inv;
      }
    });
  }
  return out;
}

LossTerms total_loss(const FusionNetwork& net, const Tensor& rgb, const Tensor& depth,
                     const Tensor& mask, const TrainingConfig& cfg, LossPath path) {
  const ForwardResult fwd = net.forward(rgb, depth);
  LossTerms terms;
  terms.total = segmentation_loss(fwd.logits, mask);
  terms.breakdown.alpha = cfg.alpha;
  terms.breakdown.seg_loss = terms.total.item();

  if (path == LossPath::Full) {
    const auto stages = cfg.resolved_fd_stages(fwd.stage_features.size());
    if (cfg.alpha != 0.0 && !stages.empty()) {
      Tensor fd_sum;
      for (std::size_t s : stages) {
        const auto& [fr, fd] = fwd.stage_features.at(s);
        Tensor value = feature_disparity(fr, fd);
        terms.breakdown.fd_losses.emplace_back(s, value.item());
        fd_sum = fd_sum ? add(fd_sum, value) : value;
      }
      terms.total = add(terms.total, scale(fd_sum, cfg.alpha));
    } else {
      NoGradScope no_grad;
      for (std::size_t s : stages) {
        const auto& [fr, fd] = fwd.stage_features.at(s);
        terms.breakdown.fd_losses.emplace_back(s, feature_disparity(fr, fd).item());
      }
    }
  }
  terms.breakdown.total = terms.total.item();
  return terms;
}

void sgd_step(std::span<Tensor> params, double lr, double momentum, VelocityState& velocity) {
  if (velocity.size() != params.size()) velocity.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto& v = velocity[i];
    if (v.size() != p.numel()) v.assign(p.numel(), 0.0);
    auto w = p.data();
    const auto g = p.grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum * v[j] + (g.empty() ? 0.0 : g[j]);
      w[j] -= lr * v[j];
    }
  }
}

NonFiniteLossError::NonFiniteLossError(std::size_t step, double value)
    : std::runtime_error("non-finite loss " + std::to_string(value) + " at step " +
                         std::to_string(step)),
      step_(step) {}

TrainResult train(const ArchitectureSpec& spec, const TrainingConfig& cfg,
                  std::span<const ScenePair> data, LossPath path) {
  spec.validate();
  cfg.validate(spec.stage_count());
  if (data.empty()) throw std::invalid_argument("train: empty training set");

  TrainResult result{FusionNetwork::build(spec, cfg.seed), {}};
  std::vector<Tensor> params;
  for (const auto& p : result.net.parameters()) params.push_back(p.tensor);
  VelocityState velocity;

  Rng order_rng(mix_seed(cfg.seed, 0x0de7));
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::vector<const ScenePair*> batch(cfg.batch_size);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& slot : batch) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[order_rng.below(i)]);
        }
        cursor = 0;
      }
      slot = &data[order[cursor++]];
    }
    const Batch b = stack_scenes(std::span<const ScenePair* const>(batch));

    result.net.zero_grad();
    Tape tape;
    LossTerms terms;
    {
      TapeScope scope(tape);
      terms = total_loss(result.net, b.rgb, b.depth, b.mask, cfg, path);
    }
    if (!std::isfinite(terms.breakdown.total)) {
      throw NonFiniteLossError(step, terms.breakdown.total);
    }
    tape.backward(terms.total);
    sgd_step(params, cfg.lr, cfg.momentum, velocity);
    result.history.push_back(std::move(terms.breakdown));
  }
  return result;
}

void write_loss_csv(std::ostream& os, const std::vector<LossBreakdown>& history) {
  os << "step,seg_loss";
  if (!history.empty()) {
    for (const auto& [stage, fd] : history.front().fd_losses) os << ",fd_stage_" << stage;
  }
  os << ",total\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    os << i << ',' << format_real(h.seg_loss);
    for (const auto& [stage, fd] : h.fd_losses) os << ',' << format_real(fd);
    os << ',' << format_real(h.total) << '\n';
  }
}

}  // namespace fmf

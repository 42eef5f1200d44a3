#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fmfusion/edges.hpp"
#include "fmfusion/ops.hpp"
#include "fmfusion/tape.hpp"
#include "fmfusion/train.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace fmf;

namespace {

Tensor binary_mask(Shape shape, std::uint64_t seed) {
  Tensor m = oracle::random(std::move(shape), seed, 0.0, 1.0);
  for (double& v : m.data()) v = v > 0.5 ? 1.0 : 0.0;
  return m;
}

TrainingConfig tiny_config(std::size_t steps) {
  TrainingConfig cfg;
  cfg.steps = steps;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST(SegmentationLoss, ZeroLogitsGiveLn2) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const double l = segmentation_loss(Tensor::zeros({2, 1, 4, 4}), binary_mask({2, 1, 4, 4}, seed)).item();
    EXPECT_NEAR(l, std::log(2.0), 1e-15);
  }
}

TEST(SegmentationLoss, SaturatedCorrectIsNearZero) {
  const Tensor mask = binary_mask({1, 1, 8, 8}, 4);
  Tensor z(mask.shape());
  for (std::size_t i = 0; i < z.numel(); ++i) z.data()[i] = mask[i] == 1.0 ? 20.0 : -20.0;
  EXPECT_LT(segmentation_loss(z, mask).item(), 1e-8);
}

TEST(SegmentationLoss, MatchesScalarLoop) {
  const Tensor z = oracle::random({2, 1, 5, 5}, 5, -6.0, 6.0);
  const Tensor m = binary_mask({2, 1, 5, 5}, 6);
  EXPECT_NEAR(segmentation_loss(z, m).item(), oracle::bce(z, m), 1e-9);
}

TEST(SegmentationLoss, StableForLargeLogits) {
  const Tensor z({1, 1, 1, 2}, {800.0, -800.0});
  const Tensor m({1, 1, 1, 2}, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(segmentation_loss(z, m).item(), 800.0);
}

TEST(SegmentationLoss, Errors) {
  EXPECT_THROW(segmentation_loss(Tensor::zeros({1, 1, 2, 2}), Tensor::full({1, 1, 2, 2}, 0.5)), std::invalid_argument);
  EXPECT_THROW(segmentation_loss(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 3})), ShapeError);
}

TEST(SegmentationLoss, GradientMatchesFiniteDifferences) {
  Tensor z = oracle::random({2, 1, 3, 4}, 7, -3.0, 3.0);
  const Tensor m = binary_mask({2, 1, 3, 4}, 8);
  const auto r = check::gradcheck([&] { return segmentation_loss(z, m); }, {z});
  EXPECT_TRUE(r.ok()) << r.first_failure;
}

TEST(TrainingConfig, DefaultsAndValidation) {
  TrainingConfig cfg;
  EXPECT_EQ(cfg.alpha, 0.3);
  EXPECT_FALSE(cfg.fd_stages.has_value());
  EXPECT_EQ(cfg.resolved_fd_stages(4), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_NO_THROW(cfg.validate(4));
  cfg.fd_stages = std::set<std::size_t>{1, 4};
  EXPECT_THROW(cfg.validate(4), std::invalid_argument);
  cfg.fd_stages = std::set<std::size_t>{2, 1};
  EXPECT_EQ(cfg.resolved_fd_stages(4), (std::vector<std::size_t>{1, 2}));

  TrainingConfig bad;
  bad.alpha = -0.1;
  EXPECT_THROW(bad.validate(4), std::invalid_argument);
  bad = {};
  bad.lr = 0.0;
  EXPECT_THROW(bad.validate(4), std::invalid_argument);
  bad = {};
  bad.momentum = 1.0;
  EXPECT_THROW(bad.validate(4), std::invalid_argument);
  bad = {};
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(4), std::invalid_argument);
}

TEST(LossBreakdown, Recombination) {
  LossBreakdown b;
  b.seg_loss = 2.0;
  b.fd_losses = {{0, 0.25}, {1, 0.75}};
  b.alpha = 0.3;
  EXPECT_DOUBLE_EQ(b.recombined(), 2.3);
}

TEST(TotalLoss, PartsRecombineExactly) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::AllFilterB, {4, 4}), 2);
  const Tensor rgb = oracle::random({2, 3, 8, 8}, 9, 0.0, 1.0);
  const Tensor depth = oracle::random({2, 1, 8, 8}, 10, 0.0, 1.0);
  const Tensor mask = binary_mask({2, 1, 8, 8}, 11);
  TrainingConfig cfg;
  const LossTerms t = total_loss(net, rgb, depth, mask, cfg);
  ASSERT_EQ(t.breakdown.fd_losses.size(), 2u);
  EXPECT_EQ(t.breakdown.total, t.breakdown.recombined());
  EXPECT_EQ(t.total.item(), t.breakdown.total);

  const ForwardResult fwd = net.forward(rgb, depth);
  EXPECT_EQ(t.breakdown.seg_loss, segmentation_loss(fwd.logits, mask).item());
  for (const auto& [s, fd] : t.breakdown.fd_losses) {
    EXPECT_EQ(fd, feature_disparity(fwd.stage_features[s].first, fwd.stage_features[s].second).item());
  }
}

TEST(TotalLoss, AlphaZeroIsSegmentationLoss) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::Baseline, {4, 4}), 3);
  const Tensor rgb = oracle::random({1, 3, 8, 8}, 12, 0.0, 1.0);
  const Tensor depth = oracle::random({1, 1, 8, 8}, 13, 0.0, 1.0);
  const Tensor mask = binary_mask({1, 1, 8, 8}, 14);
  TrainingConfig cfg;
  cfg.alpha = 0.0;
  Tape tape;
  TapeScope scope(tape);
  const LossTerms t = total_loss(net, rgb, depth, mask, cfg);
  EXPECT_EQ(t.breakdown.total, t.breakdown.seg_loss);
  EXPECT_EQ(t.breakdown.fd_losses.size(), 2u);  // still logged

  Tape seg_tape;
  TapeScope seg_scope(seg_tape);
  const LossTerms s = total_loss(net, rgb, depth, mask, cfg, LossPath::SegmentationOnly);
  EXPECT_TRUE(s.breakdown.fd_losses.empty());
  EXPECT_EQ(seg_tape.size(), tape.size());  // logging adds nothing to the graph
}

TEST(TotalLoss, FdStagesSubset) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::Baseline, {4, 4, 4}), 4);
  const Tensor rgb = oracle::random({1, 3, 16, 16}, 15, 0.0, 1.0);
  const Tensor depth = oracle::random({1, 1, 16, 16}, 16, 0.0, 1.0);
  const Tensor mask = binary_mask({1, 1, 16, 16}, 17);
  TrainingConfig cfg;
  cfg.fd_stages = std::set<std::size_t>{2, 0};
  const LossTerms t = total_loss(net, rgb, depth, mask, cfg);
  ASSERT_EQ(t.breakdown.fd_losses.size(), 2u);
  EXPECT_EQ(t.breakdown.fd_losses[0].first, 0u);
  EXPECT_EQ(t.breakdown.fd_losses[1].first, 2u);
}

TEST(TotalLoss, GradientOnMicroNetwork) {
  for (Variant v : kAllVariants) {
    auto net = FusionNetwork::build(ArchitectureSpec::for_variant(v, {4, 4}), 21);
    const Tensor rgb = oracle::random({1, 3, 8, 8}, 18, 0.0, 1.0);
    const Tensor depth = oracle::random({1, 1, 8, 8}, 19, 0.0, 1.0);
    const Tensor mask = binary_mask({1, 1, 8, 8}, 20);
    std::vector<Tensor> params;
    for (const auto& p : net.parameters()) params.push_back(p.tensor);
    const TrainingConfig cfg;
    const auto r = check::gradcheck([&] { return total_loss(net, rgb, depth, mask, cfg).total; }, params);
    EXPECT_TRUE(r.ok()) << variant_name(v) << ": " << r.first_failure;
    EXPECT_LT(r.skipped * 100, r.checked) << variant_name(v);
  }
}

TEST(SgdStep, PlainGradientStep) {
  Tensor w({2}, {1.0, -1.0});
  w.mutable_grad()[0] = 0.5;
  w.mutable_grad()[1] = -2.0;
  VelocityState v;
  std::vector<Tensor> ps{w};
  sgd_step(ps, 0.1, 0.0, v);
  EXPECT_DOUBLE_EQ(w[0], 1.0 - 0.05);
  EXPECT_DOUBLE_EQ(w[1], -1.0 + 0.2);
}

TEST(SgdStep, ZeroGradientZeroVelocityLeavesWeights) {
  Tensor w({3}, {0.1, 0.2, 0.3});
  Tensor untouched({1}, {4.0});
  w.mutable_grad();
  VelocityState v;
  std::vector<Tensor> ps{w, untouched};
  sgd_step(ps, 0.5, 0.9, v);
  EXPECT_EQ(std::vector<double>(w.data().begin(), w.data().end()), (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(untouched[0], 4.0);
}

TEST(SgdStep, TwoStepMomentumTrajectory) {
  // v1 = 0.5, w1 = 1 - 0.1*0.5 = 0.95; v2 = 0.9*0.5 - 0.25 = 0.2, w2 = 0.95 - 0.02 = 0.93
  Tensor w({1}, {1.0});
  VelocityState v;
  std::vector<Tensor> ps{w};
  w.mutable_grad()[0] = 0.5;
  sgd_step(ps, 0.1, 0.9, v);
  EXPECT_DOUBLE_EQ(w[0], 0.95);
  EXPECT_DOUBLE_EQ(v[0][0], 0.5);
  w.mutable_grad()[0] = -0.25;
  sgd_step(ps, 0.1, 0.9, v);
  EXPECT_DOUBLE_EQ(v[0][0], 0.2);
  EXPECT_DOUBLE_EQ(w[0], 0.93);
}

TEST(Train, ZeroStepsReturnsInitialization) {
  const auto spec = ArchitectureSpec::for_variant(Variant::AllFilterU, {4, 4});
  const DataSplit d = make_split(1, 3, 1, 32, 32);
  const TrainResult r = train(spec, tiny_config(0), d.train);
  EXPECT_TRUE(r.history.empty());
  const auto init = FusionNetwork::build(spec, 3);
  for (std::size_t i = 0; i < init.parameters().size(); ++i) {
    EXPECT_TRUE(bit_equal(r.net.parameters()[i].tensor, init.parameters()[i].tensor));
  }
}

TEST(Train, RepeatedRunsAreBitIdentical) {
  const auto spec = ArchitectureSpec::for_variant(Variant::WeightedSharing, {4, 8});
  const DataSplit d = make_split(2, 5, 1, 32, 32);
  const TrainResult a = train(spec, tiny_config(6), d.train);
  const TrainResult b = train(spec, tiny_config(6), d.train);
  ASSERT_EQ(a.history.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.history[i].seg_loss, b.history[i].seg_loss);
    EXPECT_EQ(a.history[i].total, b.history[i].total);
    EXPECT_EQ(a.history[i].fd_losses, b.history[i].fd_losses);
  }
  for (std::size_t i = 0; i < a.net.parameters().size(); ++i) {
    EXPECT_TRUE(bit_equal(a.net.parameters()[i].tensor, b.net.parameters()[i].tensor));
  }
}

TEST(Train, AlphaZeroMatchesSegmentationOnlyPath) {
  const auto spec = ArchitectureSpec::for_variant(Variant::Baseline, {4, 8});
  const DataSplit d = make_split(3, 4, 1, 32, 32);
  TrainingConfig cfg = tiny_config(5);
  cfg.alpha = 0.0;
  const TrainResult a = train(spec, cfg, d.train);
  const TrainResult b = train(spec, cfg, d.train, LossPath::SegmentationOnly);
  for (std::size_t i = 0; i < a.net.parameters().size(); ++i) {
    EXPECT_TRUE(bit_equal(a.net.parameters()[i].tensor, b.net.parameters()[i].tensor));
  }
  cfg.alpha = 0.3;
  const TrainResult c = train(spec, cfg, d.train);
  bool differs = false;
  for (std::size_t i = 0; i < a.net.parameters().size(); ++i) {
    differs |= !bit_equal(a.net.parameters()[i].tensor, c.net.parameters()[i].tensor);
  }
  EXPECT_TRUE(differs);
}

TEST(Train, NonFiniteLossAborts) {
  // alpha * FD overflows to inf on the first step
  const DataSplit d = make_split(4, 2, 1, 32, 32);
  TrainingConfig cfg = tiny_config(3);
  cfg.alpha = std::numeric_limits<double>::max();
  try {
    train(ArchitectureSpec::for_variant(Variant::Baseline, {4, 4}), cfg, d.train);
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.step(), 0u);
  }
}

TEST(Train, RejectsEmptyDataAndBadConfig) {
  const auto spec = ArchitectureSpec::for_variant(Variant::Baseline, {4, 4});
  EXPECT_THROW(train(spec, tiny_config(1), {}), std::invalid_argument);
  TrainingConfig cfg = tiny_config(1);
  cfg.fd_stages = std::set<std::size_t>{5};
  const DataSplit d = make_split(5, 1, 1, 32, 32);
  EXPECT_THROW(train(spec, cfg, d.train), std::invalid_argument);
}

TEST(Train, LossCsvLayout) {
  std::vector<LossBreakdown> h(2);
  h[0] = {0.5, {{0, 0.25}, {1, 0.125}}, 0.3, 0.6125};
  h[1] = {0.25, {{0, 0.0}, {1, 1.0}}, 0.3, 0.55};
  std::ostringstream os;
  write_loss_csv(os, h);
  EXPECT_EQ(os.str(),
            "step,seg_loss,fd_stage_0,fd_stage_1,total\n"
            "0,0.5,0.25,0.125,0.6125\n"
            "1,0.25,0,1,0.55\n");
}

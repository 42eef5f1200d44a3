#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fmfusion/edges.hpp"
#include "fmfusion/ops.hpp"
#include "fmfusion/rng.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace fmf;

namespace {

// 4x4 map, columns 0-1 zero, columns 2-3 one.
Tensor vertical_step() {
  std::vector<double> v(16);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) v[y * 4 + x] = x >= 2 ? 1.0 : 0.0;
  return Tensor({1, 1, 4, 4}, std::move(v));
}

}  // namespace

TEST(Edges, ConstantMapHasNoEdges) {
  const EdgeMap e = extract_edges(Tensor::full({2, 3, 5, 4}, 0.7));
  EXPECT_EQ(e.values.shape(), (Shape{2, 3, 5, 4}));
  for (double v : e.values.data()) {
    EXPECT_NEAR(v, std::sqrt(kEdgeEpsilon), 1e-12);
    EXPECT_LE(v, 1e-5);
  }
}

TEST(Edges, AdditiveShiftInvariantExactly) {
  // dyadic values keep every sum exact
  Rng rng(3);
  Tensor f({1, 2, 6, 5});
  for (double& v : f.data()) v = static_cast<double>(rng.below(64)) / 8.0;
  const Tensor g = add(f, Tensor::full(f.shape(), 3.0));
  EXPECT_TRUE(bit_equal(extract_edges(f).values, extract_edges(g).values));
}

TEST(Edges, VerticalStepMatchesHandSobel) {
  const Tensor e = extract_edges(vertical_step()).values;
  // columns 1 and 2 see (1+2+1)*(1-0) = 4 horizontally and 0 vertically
  for (std::size_t y = 0; y < 4; ++y) {
    EXPECT_NEAR(e.at(0, 0, y, 0), 1e-6, 1e-12);
    EXPECT_DOUBLE_EQ(e.at(0, 0, y, 1), std::sqrt(16.0 + 1e-12));
    EXPECT_DOUBLE_EQ(e.at(0, 0, y, 2), std::sqrt(16.0 + 1e-12));
    EXPECT_NEAR(e.at(0, 0, y, 3), 1e-6, 1e-12);
  }
}

TEST(Edges, MatchesOracleOnRandomMaps) {
  const Tensor f = oracle::random({2, 3, 5, 7}, 4);
  EXPECT_LE(max_abs_diff(extract_edges(f).values, oracle::sobel_magnitude(f)), 1e-12);
}

TEST(Edges, RejectsSmallOrMisshapenMaps) {
  EXPECT_THROW(extract_edges(Tensor::zeros({1, 1, 2, 5})), ShapeError);
  EXPECT_THROW(extract_edges(Tensor::zeros({1, 1, 5, 2})), ShapeError);
  EXPECT_THROW(extract_edges(Tensor::zeros({5, 5})), ShapeError);
}

TEST(Edges, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Tensor f = oracle::random({1, 2, 4, 5}, seed);
    const auto r = check::gradcheck([&] { return sum(mul(extract_edges(f).values, extract_edges(f).values)); }, {f});
    EXPECT_TRUE(r.ok()) << r.first_failure;
    Tensor g = oracle::random({1, 1, 3, 3}, seed + 50);
    const auto r2 = check::gradcheck([&] { return sum(extract_edges(g).values); }, {g});
    EXPECT_TRUE(r2.ok()) << r2.first_failure;
  }
}

TEST(FeatureDisparity, FlatVersusStep) {
  const double mag = std::sqrt(16.0 + 1e-12);
  const double tiny = std::sqrt(1e-12);
  // 8 of 16 pixels differ by (mag - tiny), the rest by zero
  const double expected = 8.0 * (mag - tiny) * (mag - tiny) / 16.0;
  const double fd = feature_disparity(Tensor::zeros({1, 1, 4, 4}), vertical_step()).item();
  EXPECT_NEAR(fd, expected, 1e-12);
  EXPECT_NEAR(fd, oracle::feature_disparity(Tensor::zeros({1, 1, 4, 4}), vertical_step()), 1e-12);
}

TEST(FeatureDisparity, IdenticalAndShiftedInputsGiveZero) {
  const Tensor f = oracle::random({2, 3, 6, 6}, 5);
  EXPECT_EQ(feature_disparity(f, f).item(), 0.0);
  const Tensor g = add(f, Tensor::full(f.shape(), -1.25));
  EXPECT_NEAR(feature_disparity(f, g).item(), 0.0, 1e-20);
}

TEST(FeatureDisparity, MatchesOracleAndIsSymmetric) {
  const Tensor a = oracle::random({2, 3, 5, 6}, 6);
  const Tensor b = oracle::random({2, 3, 5, 6}, 7);
  const double ab = feature_disparity(a, b).item();
  EXPECT_NEAR(ab, oracle::feature_disparity(a, b), 1e-12);
  EXPECT_EQ(ab, feature_disparity(b, a).item());
  EXPECT_GT(ab, 0.0);
}

TEST(FeatureDisparity, ShapeMismatch) {
  EXPECT_THROW(feature_disparity(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 2, 4, 4})), ShapeError);
}

TEST(FeatureDisparity, GradientInBothOperands) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Tensor a = oracle::random({2, 2, 4, 4}, seed * 3);
    Tensor b = oracle::random({2, 2, 4, 4}, seed * 3 + 1);
    const auto r = check::gradcheck([&] { return feature_disparity(a, b); }, {a, b});
    EXPECT_TRUE(r.ok()) << r.first_failure;
  }
}

TEST(FeatureDisparityReport, CsvLayout) {
  FeatureDisparityReport rep;
  rep.input_id = "pair7";
  rep.per_stage = {{0, 0.5}, {1, 0.125}};
  std::ostringstream os;
  rep.write_csv(os, true);
  EXPECT_EQ(os.str(), "stage,fd_value,input_id\n0,0.5,pair7\n1,0.125,pair7\n");
}

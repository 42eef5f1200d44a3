#include <gtest/gtest.h>

#include "fmfusion/ops.hpp"
#include "fmfusion/tape.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace fmf;

TEST(Tensor, ShapeAndDataLength) {
  const Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_THROW(t.dim(3), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_EQ(Tensor::scalar(3.0).item(), 3.0);
  EXPECT_THROW(t.item(), ShapeError);
}

TEST(Tensor, HandlesShareStorageCloneDoesNot) {
  Tensor a({3}, {1, 2, 3});
  Tensor b = a;
  Tensor c = a.clone();
  a.data()[0] = 9.0;
  EXPECT_EQ(b[0], 9.0);
  EXPECT_EQ(c[0], 1.0);
  EXPECT_TRUE(a.shares_storage_with(b));
  EXPECT_FALSE(a.shares_storage_with(c));
}

TEST(Tensor, GradientBufferMatchesShape) {
  Tensor a({2, 2}, 0.0);
  EXPECT_FALSE(a.has_grad());
  EXPECT_EQ(a.mutable_grad().size(), a.numel());
  EXPECT_TRUE(a.has_grad());
  a.mutable_grad()[1] = 4.0;
  a.zero_grad();
  EXPECT_EQ(a.grad()[1], 0.0);
}

TEST(Tensor, UndefinedHandleThrows) {
  Tensor t;
  EXPECT_FALSE(t.defined());
  EXPECT_THROW((void)t.shape(), std::logic_error);
}

TEST(Tape, SumGivesOnes) {
  Tensor x = oracle::random({4, 3}, 1);
  x.set_requires_grad();
  Tape tape;
  Tensor l;
  {
    TapeScope scope(tape);
    l = sum(x);
  }
  tape.backward(l);
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Tape, SquareGivesTwoX) {
  Tensor x = oracle::random({6}, 2);
  x.set_requires_grad();
  Tape tape;
  Tensor l;
  {
    TapeScope scope(tape);
    l = sum(mul(x, x));
  }
  tape.backward(l);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * x[i]);
}

TEST(Tape, AccumulatesOverAllPaths) {
  Tensor x({1}, {3.0});
  x.set_requires_grad();
  Tape tape;
  Tensor l;
  {
    TapeScope scope(tape);
    const Tensor y = add(x, x);         // 2x
    l = sum(add(mul(y, x), scale(x, 5)));  // 2x^2 + 5x
  }
  tape.backward(l);
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0 * 3.0 + 5.0);
}

TEST(Tape, VisitsEveryRecordOnce) {
  Tensor x = oracle::random({2, 1, 4, 4}, 3);
  x.set_requires_grad();
  Tape tape;
  Tensor l;
  {
    TapeScope scope(tape);
    l = sum(maxpool2(relu(scale(x, 2.0))));
  }
  EXPECT_EQ(tape.size(), 4u);
  tape.backward(l);
  EXPECT_EQ(tape.visited(), 4u);
}

TEST(Tape, SecondBackwardIsAnError) {
  Tensor x = oracle::random({3}, 4);
  x.set_requires_grad();
  Tape tape;
  Tensor l;
  {
    TapeScope scope(tape);
    l = sum(x);
  }
  tape.backward(l);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(l), TapeError);
}

TEST(Tape, LossFromAnotherTapeIsRejected) {
  Tensor x = oracle::random({3}, 5);
  x.set_requires_grad();
  Tape first, second;
  Tensor l;
  {
    TapeScope scope(first);
    l = sum(x);
  }
  EXPECT_THROW(second.backward(l), TapeError);
  first.reset();
  EXPECT_THROW(first.backward(l), TapeError);
}

TEST(Tape, NonScalarLossIsRejected) {
  Tensor x = oracle::random({3}, 6);
  x.set_requires_grad();
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = scale(x, 2.0);
  }
  EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Tape, NoGradScopeRecordsNothing) {
  Tensor x = oracle::random({3}, 7);
  x.set_requires_grad();
  Tape tape;
  TapeScope scope(tape);
  const auto before = Tape::records_created();
  {
    NoGradScope off;
    (void)sum(mul(x, x));
    EXPECT_EQ(Tape::current(), nullptr);
  }
  EXPECT_EQ(Tape::records_created(), before);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_EQ(Tape::current(), &tape);
}

TEST(Tape, ConstantsAreNotRecorded) {
  const Tensor a = oracle::random({3}, 8);
  Tape tape;
  TapeScope scope(tape);
  (void)sum(mul(a, a));
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, RepeatedRunsAreBitIdentical) {
  auto run = [] {
    Tensor x = oracle::random({1, 2, 6, 6}, 9);
    Tensor w = oracle::random({3, 2, 3, 3}, 10);
    Tensor b = oracle::random({3}, 11);
    w.set_requires_grad();
    Tape tape;
    Tensor l;
    {
      TapeScope scope(tape);
      l = sum(mul(relu(conv2d(x, w, b, 1, 1)), relu(conv2d(x, w, b, 1, 1))));
    }
    tape.backward(l);
    return std::pair{l.item(), std::vector<double>(w.grad().begin(), w.grad().end())};
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

namespace {

// y = x^3 with a deliberately wrong backward of 2x^2.
Tensor bad_cube(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = x[i] * x[i] * x[i];
  if (should_record({&x})) {
    record_op(out, [x](std::span<const double> g) {
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * 2.0 * x[i] * x[i];
    });
  }
  return out;
}

}  // namespace

TEST(GradCheck, CatchesWrongBackward) {
  Tensor x({3}, {0.5, -1.0, 2.0});
  const auto r = check::gradcheck([&] { return sum(bad_cube(x)); }, {x});
  EXPECT_EQ(r.failed, 3u);
  EXPECT_FALSE(r.ok());
}

TEST(GradCheck, SkipsOnlyTrueKinks) {
  // relu at exactly 0 has disagreeing one-sided slopes at every step size
  Tensor x({3}, {0.0, 0.7, -0.4});
  const auto r = check::gradcheck([&] { return sum(relu(x)); }, {x});
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.checked, 2u);
  EXPECT_TRUE(r.ok());
}

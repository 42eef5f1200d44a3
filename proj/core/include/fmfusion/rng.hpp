#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "fmfusion/tensor.hpp"

namespace fmf {

/// Seeded generator with a platform-independent value mapping.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// standard distributions are not, so the conversions to doubles and bounded
/// integers are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; derives independent stream seeds from (seed, salt).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Tensor of i.i.d. uniform values in [lo, hi).
Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng);

}  // namespace fmf

#pragma once

#include <cstdint>
#include <vector>

#include "fmfusion/fusion_net.hpp"
#include "fmfusion/tensor.hpp"

// Independent reference implementations used to pin library outputs. These
// are deliberately naive: direct loops over every index, no shared helpers
// with the library.

namespace fmf::oracle {

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

Tensor maxpool2(const Tensor& input);

/// Sobel magnitude per channel with mirrored borders, each tap written out.
Tensor sobel_magnitude(const Tensor& f);

/// sum((E(a) - E(b))^2) / numel from sobel_magnitude.
double feature_disparity(const Tensor& a, const Tensor& b);

/// Mean BCE-with-logits, textbook form -[y log s + (1-y) log(1-s)].
double bce(const Tensor& logits, const Tensor& mask);

enum class CrossConnections { AsBuilt, None };

/// Forward pass re-derived from the network's parameter tensors using only
/// the primitive ops. With CrossConnections::None every stage passes both
/// branch maps through untouched (no sum, no filters).
Tensor forward(FusionNetwork& net, const Tensor& rgb, const Tensor& depth,
               CrossConnections mode = CrossConnections::AsBuilt);

/// Seeded random tensor in [lo, hi).
Tensor random(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace fmf::oracle

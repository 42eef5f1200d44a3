#pragma once

#include <cstddef>

#include "fmfusion/tensor.hpp"

// Differentiable tensor operations. Each op records a backward rule on the
// active Tape when any operand requires a gradient; otherwise it is a plain
// forward computation with no allocation beyond its output.

namespace fmf {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

/// x[n, ...] * w[n] for a per-sample weight w of shape [N, 1].
Tensor scale_per_sample(const Tensor& x, const Tensor& w);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Sum of all elements as a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Cross-correlation (no kernel flip) with zero padding.
/// input [N,Cin,H,W], weight [Cout,Cin,K,K], bias [Cout].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride = 1, std::size_t padding = 0);

/// conv2d restricted to 1x1 kernels: a per-pixel channel mixing.
Tensor conv1x1(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// 2x2 max pooling, stride 2. Ties route to the first element in row-major order.
Tensor maxpool2(const Tensor& input);

/// Nearest-neighbour 2x upsampling.
Tensor upsample2(const Tensor& input);

/// input [N,D], weight [Dout,D], bias [Dout] -> [N,Dout].
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Spatial mean per channel: [N,C,H,W] -> [N,C].
Tensor global_mean(const Tensor& input);

}  // namespace fmf

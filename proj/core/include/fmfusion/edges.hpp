#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fmfusion/tensor.hpp"

namespace fmf {

class FusionNetwork;

/// Stabilizer inside the gradient-magnitude square root.
inline constexpr double kEdgeEpsilon = 1e-12;

/// Nonnegative per-channel edge magnitudes, same shape as the source map.
struct EdgeMap {
  Tensor values;
};

/// Channel-wise Sobel gradient magnitude, sqrt(Gx^2 + Gy^2 + eps), with
/// reflect-101 border handling. Differentiable. Requires H, W >= 3.
EdgeMap extract_edges(const Tensor& features);

/// Edge-based disparity between two same-shape feature maps: squared edge
/// differences averaged over pixels, channels and batch. Returns a scalar tensor; differentiable in both operands.
Tensor feature_disparity(const Tensor& rgb_features, const Tensor& depth_features);

struct FeatureDisparityReport {
  std::string input_id;
  std::vector<std::pair<std::size_t, double>> per_stage;  // ascending stage index

  /// Header "stage,fd_value,input_id" plus one row per stage.
  void write_csv(std::ostream& os, bool header = true) const;
};

/// Forward pass without recording; FD between the pre-fusion branch maps at
/// every fusion stage.
FeatureDisparityReport fd_profile(const FusionNetwork& net, const Tensor& rgb, const Tensor& depth,
                                  std::string input_id = {});

/// Shortest round-trip decimal rendering used by every CSV/JSON writer.
std::string format_real(double v);

}  // namespace fmf

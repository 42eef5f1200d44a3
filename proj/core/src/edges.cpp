#include "fmfusion/edges.hpp"

#include <charconv>
#include <cmath>
#include <memory>
#include <ostream>

#include "fmfusion/fusion_net.hpp"
#include "fmfusion/ops.hpp"
#include "fmfusion/tape.hpp"

namespace fmf {

namespace {

constexpr double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr double kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

// reflect-101: -1 -> 1, n -> n-2.
inline std::size_t reflect(long i, long n) {
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i >= n) return static_cast<std::size_t>(2 * n - 2 - i);
  return static_cast<std::size_t>(i);
}

}  // namespace

EdgeMap extract_edges(const Tensor& f) {
  if (f.rank() != 4) {
    throw ShapeError("extract_edges: expected [N,C,H,W], got " + shape_string(f.shape()));
  }
  const std::size_t planes = f.dim(0) * f.dim(1);
  const long h = static_cast<long>(f.dim(2));
  const long w = static_cast<long>(f.dim(3));
  if (h < 3 || w < 3) {
    throw ShapeError("extract_edges: spatial dims must be at least 3x3, got " +
                     shape_string(f.shape()));
  }
  const std::size_t hw = static_cast<std::size_t>(h * w);

  Tensor out(f.shape());
  auto gx = std::make_shared<std::vector<double>>(f.numel());
  auto gy = std::make_shared<std::vector<double>>(f.numel());
  const auto x = f.data();
  auto e = out.data();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data() + p * hw;
    for (long r = 0; r < h; ++r) {
      const std::size_t rows[3] = {reflect(r - 1, h), static_cast<std::size_t>(r),
                                   reflect(r + 1, h)};
      for (long c = 0; c < w; ++c) {
        const std::size_t cols[3] = {reflect(c - 1, w), static_cast<std::size_t>(c),
                                     reflect(c + 1, w)};
        double sx = 0.0, sy = 0.0;
        for (int dy = 0; dy < 3; ++dy) {
          for (int dx = 0; dx < 3; ++dx) {
            const double v = src[rows[dy] * w + cols[dx]];
            sx += kSobelX[dy][dx] * v;
            sy += kSobelY[dy][dx] * v;
          }
        }
        const std::size_t o = p * hw + static_cast<std::size_t>(r * w + c);
        (*gx)[o] = sx;
        (*gy)[o] = sy;
        e[o] = std::sqrt(sx * sx + sy * sy + kEdgeEpsilon);
      }
    }
  }

  if (should_record({&f})) {
    Tensor mag = out;
    record_op(out, [f, mag, gx, gy, planes, h, w, hw](std::span<const double> g) {
      auto gf = f.mutable_grad();
      const auto m = mag.data();
      for (std::size_t p = 0; p < planes; ++p) {
        double* dst = gf.data() + p * hw;
        for (long r = 0; r < h; ++r) {
          const std::size_t rows[3] = {reflect(r - 1, h), static_cast<std::size_t>(r),
                                       reflect(r + 1, h)};
          for (long c = 0; c < w; ++c) {
            const std::size_t o = p * hw + static_cast<std::size_t>(r * w + c);
            const double ax = g[o] * (*gx)[o] / m[o];
            const double ay = g[o] * (*gy)[o] / m[o];
            const std::size_t cols[3] = {reflect(c - 1, w), static_cast<std::size_t>(c),
                                         reflect(c + 1, w)};
            for (int dy = 0; dy < 3; ++dy) {
              for (int dx = 0; dx < 3; ++dx) {
                dst[rows[dy] * w + cols[dx]] += ax * kSobelX[dy][dx] + ay * kSobelY[dy][dx];
              }
            }
          }
        }
      }
    });
  }
  return EdgeMap{out};
}

Tensor feature_disparity(const Tensor& rgb_features, const Tensor& depth_features) {
  if (rgb_features.shape() != depth_features.shape()) {
    throw ShapeError("feature_disparity: shape mismatch " + shape_string(rgb_features.shape()) +
                     " vs " + shape_string(depth_features.shape()));
  }
  const Tensor diff = sub(extract_edges(rgb_features).values, extract_edges(depth_features).values);
  const double norm = static_cast<double>(rgb_features.numel());
  return scale(sum(mul(diff, diff)), 1.0 / norm);
}

void FeatureDisparityReport::write_csv(std::ostream& os, bool header) const {
  if (header) os << "stage,fd_value,input_id\n";
  for (const auto& [stage, fd] : per_stage) {
    os << stage << ',' << format_real(fd) << ',' << input_id << '\n';
  }
}

FeatureDisparityReport fd_profile(const FusionNetwork& net, const Tensor& rgb, const Tensor& depth,
                                  std::string input_id) {
  NoGradScope no_grad;
  const ForwardResult fwd = net.forward(rgb, depth);
  FeatureDisparityReport report;
  report.input_id = std::move(input_id);
  for (std::size_t i = 0; i < fwd.stage_features.size(); ++i) {
    const auto& [fr, fd] = fwd.stage_features[i];
    report.per_stage.emplace_back(i, feature_disparity(fr, fd).item());
  }
  return report;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace fmf

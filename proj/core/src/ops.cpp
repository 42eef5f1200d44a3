#include "fmfusion/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "fmfusion/tape.hpp"

namespace fmf {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const char* op, const char* what, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must be rank " + std::to_string(rank) +
                     ", got " + shape_string(t.shape()));
  }
}

struct ConvGeometry {
  std::size_t cin, h, w, k, stride, padding, ho, wo;
};

// Unfolds one sample [cin,h,w] into rows (ci,ky,kx) of ho*wo samples; padding reads as zero.
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const long st = static_cast<long>(g.stride), pad = static_cast<long>(g.padding);
  const long h = static_cast<long>(g.h), w = static_cast<long>(g.w);
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const double* xp = x + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((ci * g.k + ky) * g.k + kx) * g.ho * g.wo;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * st + static_cast<long>(ky) - pad;
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * st + static_cast<long>(kx) - pad;
            dst[ox] = (ix < 0 || ix >= w) ? 0.0 : xp[iy * w + ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates column gradients back into [cin,h,w].
void col2im(const ConvGeometry& g, const double* cols, double* gx) {
  const long st = static_cast<long>(g.stride), pad = static_cast<long>(g.padding);
  const long h = static_cast<long>(g.h), w = static_cast<long>(g.w);
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    double* gp = gx + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((ci * g.k + ky) * g.k + kx) * g.ho * g.wo;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * st + static_cast<long>(ky) - pad;
          if (iy < 0 || iy >= h) continue;
          const double* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * st + static_cast<long>(kx) - pad;
            if (ix >= 0 && ix < w) gp[iy * w + ix] += src[ox];
          }
        }
      }
    }
  }
}

// c[m,p] += sum_r a[m,r] * b[r,p], row-major; rows of c are updated four at a time.
void gemm_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t r,
                     std::size_t p) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = c + i * p;
    double* c1 = c0 + p;
    double* c2 = c1 + p;
    double* c3 = c2 + p;
    for (std::size_t k = 0; k < r; ++k) {
      const double w0 = a[i * r + k], w1 = a[(i + 1) * r + k];
      const double w2 = a[(i + 2) * r + k], w3 = a[(i + 3) * r + k];
      const double* bk = b + k * p;
      for (std::size_t j = 0; j < p; ++j) {
        const double v = bk[j];
        c0[j] += w0 * v;
        c1[j] += w1 * v;
        c2[j] += w2 * v;
        c3[j] += w3 * v;
      }
    }
  }
  for (; i < m; ++i) {
    double* ci = c + i * p;
    for (std::size_t k = 0; k < r; ++k) {
      const double w = a[i * r + k];
      const double* bk = b + k * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += w * bk[j];
    }
  }
}

// Fixed-order four-way dot product; b == nullptr sums a.
double dot(const double* a, const double* b, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  if (b) {
    for (; i + 4 <= n; i += 4) {
      a0 += a[i] * b[i];
      a1 += a[i + 1] * b[i + 1];
      a2 += a[i + 2] * b[i + 2];
      a3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) a0 += a[i] * b[i];
  } else {
    for (; i + 4 <= n; i += 4) {
      a0 += a[i];
      a1 += a[i + 1];
      a2 += a[i + 2];
      a3 += a[i + 3];
    }
    for (; i < n; ++i) a0 += a[i];
  }
  return (a0 + a1) + (a2 + a3);
}

// Shared body of the elementwise binary ops.
template <typename Fwd, typename Bwd>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  require_same_shape(name, a, b);
  Tensor out(a.shape());
  auto o = out.data();
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(da[i], db[i]);
  if (should_record({&a, &b})) {
    record_op(out, [a, b, bwd](std::span<const double> g) {
      bwd(a, b, g);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](const Tensor& x, const Tensor& y, std::span<const double> g) {
        if (x.requires_grad()) {
          auto gx = x.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (y.requires_grad()) {
          auto gy = y.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i];
        }
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](const Tensor& x, const Tensor& y, std::span<const double> g) {
        if (x.requires_grad()) {
          auto gx = x.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (y.requires_grad()) {
          auto gy = y.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gy[i] -= g[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](const Tensor& x, const Tensor& y, std::span<const double> g) {
        const auto dx = x.data();
        const auto dy = y.data();
        if (x.requires_grad()) {
          auto gx = x.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dy[i];
        }
        if (y.requires_grad()) {
          auto gy = y.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * dx[i];
        }
      });
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  auto o = out.data();
  const auto da = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] * s;
  if (should_record({&a})) {
    record_op(out, [a, s](std::span<const double> g) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

Tensor scale_per_sample(const Tensor& x, const Tensor& w) {
  if (x.rank() < 1 || w.shape() != Shape{x.dim(0), 1}) {
    throw ShapeError("scale_per_sample: weight must be [N,1] for input " + shape_string(x.shape()) +
                     ", got " + shape_string(w.shape()));
  }
  const std::size_t n = x.dim(0);
  const std::size_t per = x.numel() / std::max<std::size_t>(n, 1);
  Tensor out(x.shape());
  auto o = out.data();
  const auto dx = x.data();
  const auto dw = w.data();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < per; ++i) o[s * per + i] = dx[s * per + i] * dw[s];
  }
  if (should_record({&x, &w})) {
    record_op(out, [x, w, n, per](std::span<const double> g) {
      const auto dx = x.data();
      const auto dw = w.data();
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t i = 0; i < per; ++i) gx[s * per + i] += g[s * per + i] * dw[s];
        }
      }
      if (w.requires_grad()) {
        auto gw = w.mutable_grad();
        for (std::size_t s = 0; s < n; ++s) {
          double acc = 0.0;
          for (std::size_t i = 0; i < per; ++i) acc += g[s * per + i] * dx[s * per + i];
          gw[s] += acc;
        }
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.data();
  const auto dx = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = dx[i] > 0.0 ? dx[i] : 0.0;
  if (should_record({&x})) {
    record_op(out, [x](std::span<const double> g) {
      const auto dx = x.data();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (dx[i] > 0.0) gx[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.data();
  const auto dx = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-dx[i]));
  if (should_record({&x})) {
    Tensor y = out;
    record_op(out, [x, y](std::span<const double> g) {
      const auto dy = y.data();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dy[i] * (1.0 - dy[i]);
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (should_record({&x})) {
    record_op(out, [x](std::span<const double> g) {
      auto gx = x.mutable_grad();
      for (double& v : gx) v += g[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank("conv2d", "input", input, 4);
  require_rank("conv2d", "weight", weight, 4);
  require_rank("conv2d", "bias", bias, 1);
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                     " input channels, input " + shape_string(input.shape()) + " has " +
                     std::to_string(cin));
  }
  if (weight.dim(3) != k) {
    throw ShapeError("conv2d: kernel must be square, got " + shape_string(weight.shape()));
  }
  if (bias.dim(0) != cout) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                     std::to_string(cout) + " output channels");
  }
  if (k == 0 || k > h + 2 * padding || k > w + 2 * padding) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " exceeds padded input " +
                     shape_string(input.shape()) + " with padding " + std::to_string(padding));
  }
  ConvGeometry geo{cin, h, w, k, stride, padding, (h + 2 * padding - k) / stride + 1,
                   (w + 2 * padding - k) / stride + 1};
  const std::size_t ho = geo.ho, wo = geo.wo;
  const std::size_t plane = ho * wo, rows = cin * k * k;

  Tensor out({n, cout, ho, wo});
  {
    const double* x = input.data().data();
    const double* wt = weight.data().data();
    const double* b = bias.data().data();
    double* y = out.data().data();
    std::vector<double> cols(rows * plane);
    for (std::size_t s = 0; s < n; ++s) {
      im2col(geo, x + s * cin * h * w, cols.data());
      double* ys = y + s * cout * plane;
      for (std::size_t co = 0; co < cout; ++co) std::fill(ys + co * plane, ys + (co + 1) * plane, b[co]);
      gemm_accumulate(wt, cols.data(), ys, cout, rows, plane);
    }
  }

  if (should_record({&input, &weight, &bias})) {
    record_op(out, [input, weight, bias, n, cout, geo](std::span<const double> g) {
      const std::size_t cin = geo.cin, h = geo.h, w = geo.w;
      const std::size_t plane = geo.ho * geo.wo, rows = cin * geo.k * geo.k;
      const double* x = input.data().data();
      const double* wt = weight.data().data();
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t co = 0; co < cout; ++co) {
            gb[co] += dot(g.data() + (s * cout + co) * plane, nullptr, plane);
          }
        }
      }
      double* gw = weight.requires_grad() ? weight.mutable_grad().data() : nullptr;
      double* gx = input.requires_grad() ? input.mutable_grad().data() : nullptr;
      std::vector<double> cols(gw ? rows * plane : 0);
      std::vector<double> gcols(gx ? rows * plane : 0);
      std::vector<double> wt_scratch;
      for (std::size_t s = 0; s < n; ++s) {
        const double* gs = g.data() + s * cout * plane;
        if (gw) {
          im2col(geo, x + s * cin * h * w, cols.data());
          for (std::size_t co = 0; co < cout; ++co) {
            for (std::size_t r = 0; r < rows; ++r) {
              gw[co * rows + r] += dot(gs + co * plane, cols.data() + r * plane, plane);
            }
          }
        }
        if (gx) {
          std::fill(gcols.begin(), gcols.end(), 0.0);
          wt_scratch.resize(rows * cout);
          for (std::size_t co = 0; co < cout; ++co) {
            for (std::size_t r = 0; r < rows; ++r) wt_scratch[r * cout + co] = wt[co * rows + r];
          }
          gemm_accumulate(wt_scratch.data(), gs, gcols.data(), rows, cout, plane);
          col2im(geo, gcols.data(), gx + s * cin * h * w);
        }
      }
    });
  }
  return out;
}

Tensor conv1x1(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank("conv1x1", "weight", weight, 4);
  if (weight.dim(2) != 1 || weight.dim(3) != 1) {
    throw ShapeError("conv1x1: weight must be [Cout,Cin,1,1], got " + shape_string(weight.shape()));
  }
  return conv2d(input, weight, bias, 1, 0);
}

Tensor maxpool2(const Tensor& input) {
  require_rank("maxpool2", "input", input, 4);
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: spatial dims must be even, got " + shape_string(input.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor out({n, c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  const auto x = input.data();
  auto y = out.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t i0 = base + (2 * oy) * w + 2 * ox;
        const std::size_t cand[4] = {i0, i0 + 1, i0 + w, i0 + w + 1};
        std::size_t best = cand[0];
        for (int j = 1; j < 4; ++j) {
          if (x[cand[j]] > x[best]) best = cand[j];
        }
        const std::size_t o = (p * ho + oy) * wo + ox;
        y[o] = x[best];
        (*argmax)[o] = best;
      }
    }
  }
  if (should_record({&input})) {
    record_op(out, [input, argmax](std::span<const double> g) {
      auto gx = input.mutable_grad();
      for (std::size_t o = 0; o < g.size(); ++o) gx[(*argmax)[o]] += g[o];
    });
  }
  return out;
}

Tensor upsample2(const Tensor& input) {
  require_rank("upsample2", "input", input, 4);
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ho = 2 * h, wo = 2 * w;
  Tensor out({n, c, ho, wo});
  const auto x = input.data();
  auto y = out.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const double* xr = x.data() + p * h * w + (oy / 2) * w;
      double* yr = y.data() + (p * ho + oy) * wo;
      for (std::size_t ox = 0; ox < wo; ++ox) yr[ox] = xr[ox / 2];
    }
  }
  if (should_record({&input})) {
    record_op(out, [input, n, c, h, w](std::span<const double> g) {
      auto gx = input.mutable_grad();
      const std::size_t wo = 2 * w;
      for (std::size_t p = 0; p < n * c; ++p) {
        for (std::size_t iy = 0; iy < h; ++iy) {
          for (std::size_t ix = 0; ix < w; ++ix) {
            const std::size_t o = (p * 2 * h + 2 * iy) * wo + 2 * ix;
            gx[(p * h + iy) * w + ix] += (g[o] + g[o + 1]) + (g[o + wo] + g[o + wo + 1]);
          }
        }
      }
    });
  }
  return out;
}

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank("fully_connected", "input", input, 2);
  require_rank("fully_connected", "weight", weight, 2);
  require_rank("fully_connected", "bias", bias, 1);
  const std::size_t n = input.dim(0), d = input.dim(1), dout = weight.dim(0);
  if (weight.dim(1) != d || bias.dim(0) != dout) {
    throw ShapeError("fully_connected: input " + shape_string(input.shape()) + ", weight " +
                     shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()) +
                     " are incompatible");
  }
  Tensor out({n, dout});
  const auto x = input.data();
  const auto wt = weight.data();
  const auto b = bias.data();
  auto y = out.data();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < dout; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < d; ++i) acc += wt[o * d + i] * x[s * d + i];
      y[s * dout + o] = acc;
    }
  }
  if (should_record({&input, &weight, &bias})) {
    record_op(out, [input, weight, bias, n, d, dout](std::span<const double> g) {
      const auto x = input.data();
      const auto wt = weight.data();
      if (input.requires_grad()) {
        auto gx = input.mutable_grad();
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t o = 0; o < dout; ++o) {
            for (std::size_t i = 0; i < d; ++i) gx[s * d + i] += g[s * dout + o] * wt[o * d + i];
          }
        }
      }
      if (weight.requires_grad()) {
        auto gw = weight.mutable_grad();
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t o = 0; o < dout; ++o) {
            for (std::size_t i = 0; i < d; ++i) gw[o * d + i] += g[s * dout + o] * x[s * d + i];
          }
        }
      }
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t o = 0; o < dout; ++o) gb[o] += g[s * dout + o];
        }
      }
    });
  }
  return out;
}

Tensor global_mean(const Tensor& input) {
  require_rank("global_mean", "input", input, 4);
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (hw == 0) throw ShapeError("global_mean: empty spatial extent");
  Tensor out({n, c});
  const auto x = input.data();
  auto y = out.data();
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t p = 0; p < n * c; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += x[p * hw + i];
    y[p] = acc * inv;
  }
  if (should_record({&input})) {
    record_op(out, [input, n, c, hw, inv](std::span<const double> g) {
      auto gx = input.mutable_grad();
      for (std::size_t p = 0; p < n * c; ++p) {
        const double v = g[p] * inv;
        for (std::size_t i = 0; i < hw; ++i) gx[p * hw + i] += v;
      }
    });
  }
  return out;
}

}  // namespace fmf

#include "fmfusion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fmfusion/rng.hpp"

namespace fmf {

namespace {

// Bilinear interpolation of a seeded random lattice with `cell`-pixel spacing.
class ValueNoise {
 public:
  ValueNoise(Rng& rng, std::size_t h, std::size_t w, double cell)
      : cell_(cell), gw_(static_cast<std::size_t>(w / cell) + 2) {
    const std::size_t gh = static_cast<std::size_t>(h / cell) + 2;
    lattice_.resize(gh * gw_);
    for (double& v : lattice_) v = rng.uniform();
  }

  double operator()(double y, double x) const {
    const double fy = y / cell_, fx = x / cell_;
    const auto iy = static_cast<std::size_t>(fy), ix = static_cast<std::size_t>(fx);
    const double ty = fy - static_cast<double>(iy), tx = fx - static_cast<double>(ix);
    const double a = at(iy, ix), b = at(iy, ix + 1), c = at(iy + 1, ix), d = at(iy + 1, ix + 1);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
  }

 private:
  double at(std::size_t y, std::size_t x) const { return lattice_[y * gw_ + x]; }
  double cell_;
  std::size_t gw_;
  std::vector<double> lattice_;
};

struct RoadGeometry {
  double horizon;  // first road row
  double center_top, center_bottom;
  double half_top, half_bottom;
  std::size_t h;

  // 0 at the horizon, 1 at the bottom row.
  double progress(double y) const { return (y - horizon) / (static_cast<double>(h) - 1 - horizon); }
  double center(double t) const { return center_top + (center_bottom - center_top) * t; }
  double half_width(double t) const { return half_top + (half_bottom - half_top) * t; }
  bool contains(std::size_t y, std::size_t x) const {
    if (static_cast<double>(y) < horizon) return false;
    const double t = progress(static_cast<double>(y));
    return std::abs(static_cast<double>(x) + 0.5 - center(t)) <= half_width(t);
  }
};

RoadGeometry sample_geometry(Rng& rng, SceneKind kind, std::size_t h, std::size_t w) {
  const double fw = static_cast<double>(w);
  RoadGeometry g{};
  g.h = h;
  g.horizon = std::floor(static_cast<double>(h) * rng.uniform(0.30, 0.42));
  g.center_bottom = fw * (0.5 + rng.uniform(-0.08, 0.08));
  g.center_top = fw * (0.5 + rng.uniform(-0.15, 0.15));
  switch (kind) {
    case SceneKind::UM:
      g.half_bottom = fw * rng.uniform(0.26, 0.34);
      g.half_top = fw * rng.uniform(0.02, 0.04);
      break;
    case SceneKind::UMM:
      g.half_bottom = fw * rng.uniform(0.38, 0.48);
      g.half_top = fw * rng.uniform(0.04, 0.07);
      break;
    case SceneKind::UU:
      g.half_bottom = fw * rng.uniform(0.22, 0.30);
      g.half_top = fw * rng.uniform(0.015, 0.035);
      break;
  }
  return g;
}

// Lateral positions (in units of the half width) of painted lines.
struct Marking {
  double offset;
  bool dashed;
};

std::vector<Marking> markings_for(SceneKind kind) {
  switch (kind) {
    case SceneKind::UM: return {{0.0, true}, {-0.92, false}, {0.92, false}};
    case SceneKind::UMM:
      return {{-1.0 / 3.0, true}, {1.0 / 3.0, true}, {-0.92, false}, {0.92, false}};
    case SceneKind::UU: return {};
  }
  return {};
}

struct Obstacle {
  std::size_t y0, y1, x0, x1;
  double r, g, b;
  double depth;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::string_view scene_kind_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::UM: return "UM";
    case SceneKind::UMM: return "UMM";
    case SceneKind::UU: return "UU";
  }
  return "?";
}

SceneKind parse_scene_kind(std::string_view name) {
  for (SceneKind k : kAllSceneKinds) {
    if (scene_kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown scene kind '" + std::string(name) +
                              "' (expected UM, UMM or UU)");
}

ScenePair generate_scene(std::uint64_t seed, SceneKind kind, std::size_t h, std::size_t w,
                         const PerturbSpec& perturb) {
  if (h < 32 || w < 32 || h % 16 != 0 || w % 16 != 0) {
    throw std::invalid_argument("scene dims must be >= 32 and divisible by 16, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
  const auto kind_salt = static_cast<std::uint64_t>(kind);
  Rng geo_rng(mix_seed(seed, 100 + kind_salt));
  Rng tex_rng(mix_seed(seed, 200 + kind_salt));
  const RoadGeometry road = sample_geometry(geo_rng, kind, h, w);

  const ValueNoise coarse(tex_rng, h, w, 8.0);
  const ValueNoise fine(tex_rng, h, w, 3.0);
  const ValueNoise ground_depth_noise(tex_rng, h, w, 6.0);
  const double grass_r = tex_rng.uniform(0.25, 0.40);
  const double grass_g = tex_rng.uniform(0.38, 0.52);
  const double grass_b = tex_rng.uniform(0.15, 0.28);
  const double asphalt = tex_rng.uniform(0.30, 0.42);

  std::vector<Obstacle> obstacles;
  const std::size_t n_obstacles = 1 + geo_rng.below(3);
  const auto horizon = static_cast<std::size_t>(road.horizon);
  for (std::size_t i = 0; i < n_obstacles; ++i) {
    Obstacle o{};
    const std::size_t base = horizon + 2 + geo_rng.below((h - horizon) / 2);
    const std::size_t height = 3 + geo_rng.below(h / 6);
    const std::size_t width = 3 + geo_rng.below(w / 6);
    o.y1 = std::min(base, h - 1) + 1;
    o.y0 = o.y1 > height ? o.y1 - height : 0;
    // Left or right of the road at the obstacle's base row.
    const double t = road.progress(static_cast<double>(base));
    const double edge_l = road.center(t) - road.half_width(t);
    const double edge_r = road.center(t) + road.half_width(t);
    if (geo_rng.below(2) == 0) {
      const double right = std::max(0.0, edge_l - 1.0 - static_cast<double>(geo_rng.below(4)));
      o.x1 = static_cast<std::size_t>(right);
      o.x0 = o.x1 > width ? o.x1 - width : 0;
    } else {
      o.x0 = std::min<std::size_t>(w, static_cast<std::size_t>(std::max(0.0, edge_r + 1.0)) +
                                          geo_rng.below(4));
      o.x1 = std::min(w, o.x0 + width);
    }
    o.r = geo_rng.uniform(0.1, 0.7);
    o.g = geo_rng.uniform(0.1, 0.7);
    o.b = geo_rng.uniform(0.1, 0.7);
    o.depth = 0.3 + 0.65 * std::clamp(t, 0.0, 1.0);
    obstacles.push_back(o);
  }

  const auto lines = markings_for(kind);
  ScenePair scene;
  scene.kind = kind;
  scene.seed = seed;
  scene.rgb = Tensor({3, h, w});
  scene.depth = Tensor({1, h, w});
  scene.mask = Tensor({1, h, w});
  auto rgb = scene.rgb.data();
  auto depth = scene.depth.data();
  auto mask = scene.mask.data();
  const std::size_t plane = h * w;

  for (std::size_t y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y);
    const double t = road.progress(fy);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x);
      const std::size_t o = y * w + x;
      const double nc = coarse(fy, fx);
      const double nf = fine(fy, fx);
      double r, g, b, d;
      if (road.contains(y, x)) {
        mask[o] = 1.0;
        const double v = asphalt + 0.10 * (nf - 0.5) + 0.05 * (nc - 0.5);
        r = v;
        g = v;
        b = v * 1.04;
        const double hw = road.half_width(t);
        const double lateral = fx + 0.5 - road.center(t);
        const double line_half = 0.35 + 0.9 * t;
        const bool dash_on = static_cast<long>(std::floor(std::log(t + 0.05) * 5.0)) % 2 == 0;
        for (const Marking& m : lines) {
          if (std::abs(lateral - m.offset * hw) <= line_half && (!m.dashed || dash_on)) {
            r = g = b = 0.92;
          }
        }
        d = 0.15 + 0.8 * t;
      } else if (fy < road.horizon) {
        const double lift = 0.15 * (fy / std::max(1.0, road.horizon));
        r = 0.50 + lift + 0.06 * (nc - 0.5);
        g = 0.65 + lift + 0.06 * (nc - 0.5);
        b = 0.85 + 0.5 * lift;
        d = 0.0;
      } else {
        r = grass_r + 0.16 * (nc - 0.5) + 0.08 * (nf - 0.5);
        g = grass_g + 0.16 * (nc - 0.5) + 0.08 * (nf - 0.5);
        b = grass_b + 0.10 * (nc - 0.5);
        d = 0.08 + 0.6 * t + 0.12 * (ground_depth_noise(fy, fx) - 0.5);
      }
      if (mask[o] == 0.0) {
        for (const Obstacle& ob : obstacles) {
          if (y >= ob.y0 && y < ob.y1 && x >= ob.x0 && x < ob.x1) {
            r = ob.r + 0.05 * (nf - 0.5);
            g = ob.g + 0.05 * (nf - 0.5);
            b = ob.b + 0.05 * (nf - 0.5);
            d = ob.depth;
          }
        }
      }
      rgb[o] = clamp01(r + perturb.brightness);
      rgb[plane + o] = clamp01(g + perturb.brightness);
      rgb[2 * plane + o] = clamp01(b + perturb.brightness);
      depth[o] = clamp01(d);
    }
  }
  return scene;
}

DataSplit make_split(std::uint64_t seed, std::size_t n_train, std::size_t n_test, std::size_t h,
                     std::size_t w) {
  if (n_train == 0 || n_test == 0) {
    throw std::invalid_argument("make_split needs at least one train and one test scene");
  }
  DataSplit split;
  for (std::size_t i = 0; i < n_train; ++i) {
    split.train.push_back(generate_scene(seed + i, kAllSceneKinds[i % 3], h, w));
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    split.test.push_back(generate_scene(seed + n_train + i, kAllSceneKinds[i % 3], h, w));
  }
  return split;
}

Batch stack_scenes(std::span<const ScenePair* const> scenes) {
  if (scenes.empty()) throw std::invalid_argument("stack_scenes: empty batch");
  const Shape& s = scenes.front()->rgb.shape();
  const std::size_t n = scenes.size(), h = s[1], w = s[2];
  Batch b{Tensor({n, 3, h, w}), Tensor({n, 1, h, w}), Tensor({n, 1, h, w})};
  for (std::size_t i = 0; i < n; ++i) {
    const ScenePair& sc = *scenes[i];
    if (sc.rgb.shape() != s) throw ShapeError("stack_scenes: scenes differ in size");
    std::copy(sc.rgb.data().begin(), sc.rgb.data().end(), b.rgb.data().begin() + i * 3 * h * w);
    std::copy(sc.depth.data().begin(), sc.depth.data().end(), b.depth.data().begin() + i * h * w);
    std::copy(sc.mask.data().begin(), sc.mask.data().end(), b.mask.data().begin() + i * h * w);
  }
  return b;
}

Batch stack_scenes(std::span<const ScenePair> scenes) {
  std::vector<const ScenePair*> ptrs;
  for (const auto& s : scenes) ptrs.push_back(&s);
  return stack_scenes(std::span<const ScenePair* const>(ptrs));
}

namespace {

void write_pnm(const std::filesystem::path& path, const Tensor& img, std::size_t channels,
               const char* magic) {
  if (img.rank() != 3 || img.dim(0) != channels) {
    throw ShapeError(std::string("expected [") + std::to_string(channels) + ",H,W] image, got " +
                     shape_string(img.shape()));
  }
  const std::size_t h = img.dim(1), w = img.dim(2);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << magic << '\n' << w << ' ' << h << "\n255\n";
  const auto d = img.data();
  std::vector<char> row(w * channels);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = clamp01(d[(c * h + y) * w + x]);
        row[x * channels + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
    }
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& rgb) {
  write_pnm(path, rgb, 3, "P6");
}

void write_pgm(const std::filesystem::path& path, const Tensor& gray) {
  write_pnm(path, gray, 1, "P5");
}

}  // namespace fmf

#include "qicvt/harness/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "qicvt/harness/parallel.hpp"

namespace qicvt {

namespace {

constexpr double kCell = 5.0;
constexpr double kJitter = 1.5;
constexpr double kClassSizes[kNumClasses][3] = {{4.2, 1.8, 1.6}, {0.8, 0.8, 1.8}, {1.8, 0.6, 1.7}};
constexpr double kClassColor[kNumClasses][3] = {{0.85, 0.2, 0.15}, {0.2, 0.8, 0.25}, {0.2, 0.35, 0.9}};
constexpr double kClassReflectance[kNumClasses] = {0.6, 0.3, 0.45};
// Front halves return brighter and the front face is painted lighter, so the
// heading (not just the axis) is observable.
constexpr double kFrontReflectance = 0.3;
constexpr double kFrontTint = 0.35;
// Returns sit this far inside the surface so the interior counts do not hinge
// on how a point exactly on a face rounds.
constexpr double kSkin = 0.02;

// The volatile keeps the narrowing: GCC 11 at -O3 vectorized the seven
// conversions in rounded() and silently skipped two of them.
double f32(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

Box3 rounded(Box3 b) {
  b = {f32(b.cx), f32(b.cy), f32(b.cz), f32(b.l), f32(b.w), f32(b.h), f32(b.yaw)};
  // Rounding can step just past pi.
  if (b.yaw > kPi) b.yaw = std::nextafter(static_cast<float>(kPi), 0.0f);
  return b;
}

struct Face {
  std::array<double, 3> centre, normal, u, v;  // u, v: half-extent vectors
};

std::array<Face, 6> faces(const Box3& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const std::array<double, 3> ex{c, s, 0}, ey{-s, c, 0}, ez{0, 0, 1};
  auto sc = [](const std::array<double, 3>& a, double k) { return std::array<double, 3>{a[0] * k, a[1] * k, a[2] * k}; };
  auto at = [&](const std::array<double, 3>& d) { return std::array<double, 3>{b.cx + d[0], b.cy + d[1], b.cz + d[2]}; };
  const double hl = b.l / 2, hw = b.w / 2, hh = b.h / 2;
  return {{{at(sc(ex, hl)), ex, sc(ey, hw), sc(ez, hh)},
           {at(sc(ex, -hl)), sc(ex, -1), sc(ey, hw), sc(ez, hh)},
           {at(sc(ey, hw)), ey, sc(ex, hl), sc(ez, hh)},
           {at(sc(ey, -hw)), sc(ey, -1), sc(ex, hl), sc(ez, hh)},
           {at(sc(ez, hh)), ez, sc(ex, hl), sc(ey, hw)},
           {at(sc(ez, -hh)), sc(ez, -1), sc(ex, hl), sc(ey, hw)}}};
}

bool faces_sensor(const Face& f) {
  double d = 0;
  for (int a = 0; a < 3; ++a) d += f.normal[a] * (kSensorOrigin[a] - f.centre[a]);
  return d > 0;
}

double norm(const std::array<double, 3>& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

double face_area(const Face& f) { return 4 * norm(f.u) * norm(f.v); }

double range_factor(const Box3& b, const DataConfig& data) {
  const double r = std::max(std::hypot(b.cx - kSensorOrigin[0], b.cy - kSensorOrigin[1]), 1e-6);
  return std::min(4.0, (data.reference_range / r) * (data.reference_range / r));
}

bool inside_hull(const std::vector<Vec2>& hull, double x, double y) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    if ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x) < 0) return false;
  }
  return true;
}

void paint(Tensor& image, const std::vector<PlacedObject>& objects, const Camera& cam) {
  const std::size_t H = image.dim(0), W = image.dim(1);
  // Sky above the horizon row, ground below.
  for (std::size_t v = 0; v < H; ++v) {
    const bool sky = static_cast<double>(v) + 0.5 < cam.cy;
    for (std::size_t u = 0; u < W; ++u) {
      double* px = image.data() + (v * W + u) * 3;
      px[0] = sky ? 0.55 : 0.35;
      px[1] = sky ? 0.65 : 0.3;
      px[2] = sky ? 0.8 : 0.25;
    }
  }
  std::vector<std::size_t> order(objects.size());
  std::iota(order.begin(), order.end(), 0);
  auto dist = [&](std::size_t i) { return std::hypot(objects[i].box.cx, objects[i].box.cy); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist(a) > dist(b); });
  for (std::size_t i : order) {
    const Box3& b = objects[i].box;
    std::vector<Vec2> pts;
    bool behind = false;
    for (const auto& c : corners_3d(b)) {
      const auto p = cam.project(c[0], c[1], c[2]);
      if (!p) {
        behind = true;
        break;
      }
      pts.push_back({(*p)[0], (*p)[1]});
    }
    if (behind) continue;
    const double shade = 1.0 / (1.0 + dist(i) / 40.0);
    const auto& col = kClassColor[static_cast<std::size_t>(objects[i].cls)];
    auto fill = [&](const std::vector<Vec2>& hull, double tint) {
      for (std::size_t v = 0; v < H; ++v) {
        for (std::size_t u = 0; u < W; ++u) {
          if (!inside_hull(hull, u + 0.5, v + 0.5)) continue;
          double* px = image.data() + (v * W + u) * 3;
          for (int k = 0; k < 3; ++k) px[k] = (col[k] + tint * (1 - col[k])) * shade;
        }
      }
    };
    fill(convex_hull(pts), 0.0);
    const Face front = faces(b)[0];
    if (faces_sensor(front)) {
      std::vector<Vec2> quad;
      for (double a : {-1.0, 1.0}) {
        for (double c : {-1.0, 1.0}) {
          const auto p = cam.project(front.centre[0] + a * front.u[0] + c * front.v[0],
                                     front.centre[1] + a * front.u[1] + c * front.v[1],
                                     front.centre[2] + a * front.u[2] + c * front.v[2]);
          quad.push_back({(*p)[0], (*p)[1]});
        }
      }
      fill(convex_hull(quad), kFrontTint);
    }
  }
  for (double& x : image.values()) x = f32(x);
}

}  // namespace

std::vector<PlacedObject> sample_layout(const ExperimentConfig& cfg, Rng& rng) {
  const auto upper = cfg.grid.upper_corner();
  const std::size_t nx = static_cast<std::size_t>((upper[0] - cfg.grid.origin[0]) / kCell);
  const std::size_t ny = static_cast<std::size_t>((upper[1] - cfg.grid.origin[1]) / kCell);
  std::vector<std::size_t> cells(nx * ny);
  std::iota(cells.begin(), cells.end(), 0);
  for (std::size_t i = cells.size(); i > 1; --i) std::swap(cells[i - 1], cells[rng.index(i)]);
  const std::size_t n = std::min(cells.size(), cfg.data.min_objects + rng.index(cfg.data.max_objects - cfg.data.min_objects + 1));
  std::vector<PlacedObject> out;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cell = cells[k];
    const auto cls = static_cast<ObjectClass>(rng.index(kNumClasses));
    const auto& size = kClassSizes[static_cast<std::size_t>(cls)];
    Box3 b;
    b.cx = cfg.grid.origin[0] + (cell / ny + 0.5) * kCell + rng.uniform(-kJitter, kJitter);
    b.cy = cfg.grid.origin[1] + (cell % ny + 0.5) * kCell + rng.uniform(-kJitter, kJitter);
    b.l = size[0] * rng.uniform(0.9, 1.1);
    b.w = size[1] * rng.uniform(0.9, 1.1);
    b.h = size[2] * rng.uniform(0.9, 1.1);
    b.cz = cfg.rpn.ground_z + b.h / 2;
    b.yaw = wrap_angle(rng.uniform(-kPi, kPi));
    out.push_back({rounded(b), cls});
  }
  return out;
}

double expected_surface_points(const Box3& box, const DataConfig& data) {
  double area = 0;
  for (const Face& f : faces(box)) {
    if (faces_sensor(f)) area += face_area(f);
  }
  return data.surface_density * area * range_factor(box, data);
}

SyntheticScene render_scene(const std::vector<PlacedObject>& objects, const ExperimentConfig& cfg, Rng& rng) {
  SyntheticScene s;
  for (const auto& o : objects) {
    const double factor = range_factor(o.box, cfg.data);
    const double refl = kClassReflectance[static_cast<std::size_t>(o.cls)];
    for (const Face& f : faces(o.box)) {
      if (!faces_sensor(f)) continue;
      std::poisson_distribution<int> count(cfg.data.surface_density * face_area(f) * factor);
      const int n = count(rng.engine());
      const double su = 1 - kSkin / norm(f.u), sv = 1 - kSkin / norm(f.v);
      for (int i = 0; i < n; ++i) {
        const double a = su * rng.uniform(-1, 1), b = sv * rng.uniform(-1, 1);
        Point p;
        p.x = f32(f.centre[0] + a * f.u[0] + b * f.v[0] - kSkin * f.normal[0]);
        p.y = f32(f.centre[1] + a * f.u[1] + b * f.v[1] - kSkin * f.normal[1]);
        p.z = f32(f.centre[2] + a * f.u[2] + b * f.v[2] - kSkin * f.normal[2]);
        const double ahead = (p.x - o.box.cx) * std::cos(o.box.yaw) + (p.y - o.box.cy) * std::sin(o.box.yaw);
        p.g = f32(std::clamp(refl + (ahead > 0 ? kFrontReflectance : 0.0) + rng.normal(0, 0.05), 0.0, 1.0));
        s.cloud.push_back(p);
      }
    }
  }
  const auto upper = cfg.grid.upper_corner();
  for (std::size_t i = 0; i < cfg.data.clutter_points; ++i) {
    Point p;
    p.x = f32(rng.uniform(cfg.grid.origin[0], upper[0]));
    p.y = f32(rng.uniform(cfg.grid.origin[1], upper[1]));
    p.z = f32(cfg.rpn.ground_z + rng.uniform(-0.05, 0.05));
    p.g = f32(rng.uniform(0.0, 0.2));
    s.cloud.push_back(p);
  }
  s.image = Tensor(Shape{cfg.data.image_size, cfg.data.image_size, 3});
  paint(s.image, objects, cfg.camera);
  for (const auto& o : objects) {
    GroundTruthBox g{o.box, o.cls, 0};
    for (const Point& p : s.cloud) g.points += box_contains(o.box, p.x, p.y, p.z) ? 1 : 0;
    s.gts.push_back(g);
  }
  return s;
}

SyntheticScene generate_scene(const ExperimentConfig& cfg, Rng& rng) {
  const auto layout = sample_layout(cfg, rng);
  return render_scene(layout, cfg, rng);
}

Rng scene_rng(std::uint64_t seed, const std::string& split, std::size_t index) {
  return Rng(seed).derive(split == "train" ? 0 : 1).derive(index);
}

void generate_dataset(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir) {
  cfg.validate();
  for (const std::string split : {"train", "val"}) {
    std::filesystem::create_directories(dir / split);
    const std::size_t n = split == "train" ? cfg.data.train_scenes : cfg.data.val_scenes;
    parallel_for(n, [&](std::size_t i) {
      Rng rng = scene_rng(seed, split, i);
      save_scene(scene_path(dir, split, i), generate_scene(cfg, rng));
    });
  }
  std::ofstream meta(dir / "config.txt");
  if (!meta) throw std::runtime_error("cannot write '" + (dir / "config.txt").string() + "'");
  meta << "# dataset seed " << seed << "\n" << cfg.to_text();
}

}  // namespace qicvt

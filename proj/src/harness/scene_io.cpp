#include "qicvt/harness/scene_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "qicvt/tensor/serialize.hpp"

namespace qicvt {

namespace {

constexpr char kMagic[4] = {'Q', 'I', 'C', 'V'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxPoints = 1u << 24;
constexpr std::uint32_t kMaxBoxes = 1u << 16;

}  // namespace

void write_scene(std::ostream& os, const SyntheticScene& scene) {
  if (scene.cloud.size() > kMaxPoints || scene.gts.size() > kMaxBoxes) throw FormatError("scene too large");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(scene.cloud.size()));
  for (const Point& p : scene.cloud) {
    for (double v : {p.x, p.y, p.z, p.g}) write_f32(os, static_cast<float>(v));
  }
  write_tensor(os, scene.image, Precision::kF32);
  write_u32(os, static_cast<std::uint32_t>(scene.gts.size()));
  for (const GroundTruthBox& g : scene.gts) {
    const Box3& b = g.box;
    for (double v : {b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw}) write_f32(os, static_cast<float>(v));
    write_u8(os, static_cast<std::uint8_t>(g.cls));
    write_u32(os, g.points);
  }
  if (!os) throw FormatError("write failed");
}

SyntheticScene read_scene(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) throw FormatError("not a QICV scene file");
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) throw FormatError("unsupported scene version " + std::to_string(version));
  SyntheticScene s;
  const std::uint32_t n = read_u32(is);
  if (n > kMaxPoints) throw FormatError("implausible point count");
  s.cloud.resize(n);
  for (Point& p : s.cloud) {
    p.x = read_f32(is);
    p.y = read_f32(is);
    p.z = read_f32(is);
    p.g = read_f32(is);
  }
  try {
    validate_cloud(s.cloud);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  s.image = read_tensor(is, Precision::kF32);
  if (s.image.rank() != 3 || s.image.dim(2) != 3) throw FormatError("scene image must be (H, W, 3)");
  const std::uint32_t m = read_u32(is);
  if (m > kMaxBoxes) throw FormatError("implausible box count");
  s.gts.resize(m);
  for (GroundTruthBox& g : s.gts) {
    Box3& b = g.box;
    for (double* v : {&b.cx, &b.cy, &b.cz, &b.l, &b.w, &b.h, &b.yaw}) *v = read_f32(is);
    const std::uint8_t cls = read_u8(is);
    if (cls >= kNumClasses) throw FormatError("bad class id " + std::to_string(cls));
    g.cls = static_cast<ObjectClass>(cls);
    g.points = read_u32(is);
    if (!(b.l > 0 && b.w > 0 && b.h > 0) || !std::isfinite(b.cx + b.cy + b.cz + b.yaw)) {
      throw FormatError("invalid box in scene file");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after scene");
  return s;
}

void save_scene(const std::filesystem::path& path, const SyntheticScene& scene) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_scene(out, scene);
}

SyntheticScene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  try {
    return read_scene(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::filesystem::path scene_path(const std::filesystem::path& dir, const std::string& split, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "scene_%04zu.qicv", index);
  return dir / split / name;
}

std::vector<SyntheticScene> load_split(const std::filesystem::path& dir, const std::string& split) {
  std::vector<SyntheticScene> out;
  for (std::size_t i = 0;; ++i) {
    const auto p = scene_path(dir, split, i);
    if (!std::filesystem::exists(p)) break;
    out.push_back(load_scene(p));
  }
  if (out.empty()) throw std::runtime_error("no scenes under '" + (dir / split).string() + "'");
  return out;
}

}  // namespace qicvt

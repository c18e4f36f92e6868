#include "qicvt/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <vector>

namespace qicvt {

namespace {

struct Field {
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
T parse_int(const std::string& s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("expected a non-negative integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "on" || s == "1") return true;
  if (s == "false" || s == "off" || s == "0") return false;
  throw ConfigError("expected true/false, got '" + s + "'");
}

Field size_field(std::size_t& v) {
  return {[&v] { return std::to_string(v); }, [&v](const std::string& s) { v = parse_int<std::size_t>(s); }};
}
Field u64_field(std::uint64_t& v) {
  return {[&v] { return std::to_string(v); }, [&v](const std::string& s) { v = parse_int<std::uint64_t>(s); }};
}
Field real_field(double& v) {
  return {[&v] { return fmt(v); }, [&v](const std::string& s) { v = parse_real(s); }};
}
Field bool_field(bool& v) {
  return {[&v] { return std::string(v ? "true" : "false"); }, [&v](const std::string& s) { v = parse_bool(s); }};
}

std::vector<std::pair<std::string, Field>> fields(ExperimentConfig& c) {
  std::vector<std::pair<std::string, Field>> f;
  f.emplace_back("seed", u64_field(c.seed));
  f.emplace_back("data.train_scenes", size_field(c.data.train_scenes));
  f.emplace_back("data.val_scenes", size_field(c.data.val_scenes));
  f.emplace_back("data.min_objects", size_field(c.data.min_objects));
  f.emplace_back("data.max_objects", size_field(c.data.max_objects));
  f.emplace_back("data.surface_density", real_field(c.data.surface_density));
  f.emplace_back("data.reference_range", real_field(c.data.reference_range));
  f.emplace_back("data.clutter_points", size_field(c.data.clutter_points));
  f.emplace_back("data.image_size", size_field(c.data.image_size));
  const char* axes = "xyz";
  for (int a = 0; a < 3; ++a) {
    f.emplace_back(std::string("grid.origin_") + axes[a], real_field(c.grid.origin[a]));
    f.emplace_back(std::string("grid.voxel_") + axes[a], real_field(c.grid.voxel_size[a]));
    f.emplace_back(std::string("grid.extent_") + axes[a], size_field(c.grid.extents[a]));
  }
  f.emplace_back("backbone.widths",
                 Field{[&c] {
                         std::string s;
                         for (std::size_t i = 1; i < c.backbone.widths.size(); ++i)
                           s += (i > 1 ? "," : "") + std::to_string(c.backbone.widths[i]);
                         return s;
                       },
                       [&c](const std::string& s) {
                         std::stringstream ss(s);
                         std::string tok;
                         std::size_t i = 1;
                         while (std::getline(ss, tok, ',')) {
                           if (i >= c.backbone.widths.size()) throw ConfigError("backbone.widths takes 4 values");
                           c.backbone.widths[i++] = parse_int<std::size_t>(trim(tok));
                         }
                         if (i != c.backbone.widths.size()) throw ConfigError("backbone.widths takes 4 values");
                       }});
  f.emplace_back("rpn.hidden", size_field(c.rpn.hidden));
  f.emplace_back("rpn.nms_iou", real_field(c.rpn.nms_iou));
  f.emplace_back("rpn.ground_z", real_field(c.rpn.ground_z));
  f.emplace_back("roi.channels", size_field(c.roi.out_channels));
  f.emplace_back("roi.margin", real_field(c.roi.margin));
  f.emplace_back("image.width1", size_field(c.image.width1));
  f.emplace_back("image.width2", size_field(c.image.width2));
  f.emplace_back("image.channels", size_field(c.image.out_channels));
  f.emplace_back("gat.on", bool_field(c.gat_on));
  f.emplace_back("gat.depth", size_field(c.gat.depth));
  f.emplace_back("gat.heads", size_field(c.gat.heads));
  f.emplace_back("gat.global_tokens", size_field(c.gat.global_tokens));
  f.emplace_back("gat.align_dim", size_field(c.gat.align_dim));
  f.emplace_back("gat.recompute", bool_field(c.gat.recompute));
  f.emplace_back("self.on", bool_field(c.self.enabled));
  f.emplace_back("self.experts", size_field(c.self.gate.experts));
  f.emplace_back("self.k", size_field(c.self.gate.k));
  f.emplace_back("self.noise", bool_field(c.self.gate.noise));
  f.emplace_back("self.formula",
                 Field{[&c] { return std::string(c.self.gate.formula == GateFormula::kCited ? "cited" : "literal"); },
                       [&c](const std::string& s) {
                         if (s == "cited") {
                           c.self.gate.formula = GateFormula::kCited;
                         } else if (s == "literal") {
                           c.self.gate.formula = GateFormula::kLiteral;
                         } else {
                           throw ConfigError("self.formula must be cited or literal");
                         }
                       }});
  f.emplace_back("self.literal_sigma", real_field(c.self.gate.literal_sigma));
  f.emplace_back("self.expert_hidden", size_field(c.self.expert_hidden));
  f.emplace_back("self.expert_out", size_field(c.self.expert_out));
  f.emplace_back("self.fusion_hidden", size_field(c.self.fusion_hidden));
  f.emplace_back("self.fused", size_field(c.self.fused));
  f.emplace_back("self.load_balance", bool_field(c.self.load_balance));
  f.emplace_back("self.load_balance_coeff", real_field(c.self.load_balance_coeff));
  f.emplace_back("head.hidden", size_field(c.head.hidden));
  f.emplace_back("model.max_proposals", size_field(c.max_proposals));
  f.emplace_back("model.refine_passes", size_field(c.refine_passes));
  f.emplace_back("model.keypoints", bool_field(c.keypoints));
  f.emplace_back("model.keypoint_count", size_field(c.keypoint_count));
  f.emplace_back("train.steps", size_field(c.train.steps));
  f.emplace_back("train.lr", real_field(c.train.lr));
  f.emplace_back("train.momentum", real_field(c.train.momentum));
  f.emplace_back("train.weight_decay", real_field(c.train.weight_decay));
  f.emplace_back("train.clip_norm", real_field(c.train.clip_norm));
  f.emplace_back("train.warmup", size_field(c.train.warmup));
  f.emplace_back("train.rpn_weight", real_field(c.train.rpn_weight));
  f.emplace_back("train.head_weight", real_field(c.train.head_weight));
  f.emplace_back("train.box_weight", real_field(c.train.box_weight));
  f.emplace_back("train.box_beta", real_field(c.train.box_beta));
  f.emplace_back("train.positive_iou", real_field(c.train.positive_iou));
  f.emplace_back("train.jitter_proposals", size_field(c.train.jitter_proposals));
  f.emplace_back("train.log_every", size_field(c.train.log_every));
  f.emplace_back("eval.iou_veh", real_field(c.eval.iou_thresholds[0]));
  f.emplace_back("eval.iou_ped", real_field(c.eval.iou_thresholds[1]));
  f.emplace_back("eval.iou_cyc", real_field(c.eval.iou_thresholds[2]));
  return f;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  // 20 m x 20 m in front of the sensor, 4 m tall.
  grid.origin = {0, -10, -1};
  grid.voxel_size = {1.25, 1.25, 0.5};
  grid.extents = {16, 16, 8};
  finalize();
}

void ExperimentConfig::finalize() {
  const std::size_t fmap = data.image_size / kImageStride;
  gat.image_channels = image.out_channels;
  gat.image_tokens = fmap * fmap;
  gat.voxel_channels = backbone.widths[2] + backbone.widths[2] % 2;
  gat.voxel_tokens = (grid.extents[0] / 2) * (grid.extents[1] / 2) * (grid.extents[2] / 2);
  self.lidar_in = roi.out_channels + (keypoints ? kKeypointDescriptor : 0);
  self.image_in = image.out_channels;
  head.in = self.fused;
  camera.width = camera.height = data.image_size;
  camera.fx = camera.fy = camera.cx = camera.cy = static_cast<double>(data.image_size) / 2;
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(data.train_scenes >= 1, "data.train_scenes must be >= 1");
  need(data.train_scenes + data.val_scenes <= 500, "at most 500 scenes in total");
  need(data.min_objects >= 1 && data.min_objects <= data.max_objects, "need 1 <= data.min_objects <= data.max_objects");
  need(data.max_objects <= 16, "data.max_objects must be <= 16 (one object per 5 m cell)");
  need(data.surface_density > 0 && data.reference_range > 0, "data densities must be positive");
  need(data.image_size >= 8 && data.image_size % kImageStride == 0, "data.image_size must be a multiple of 4, >= 8");
  need(max_proposals >= 1 && max_proposals <= 128, "model.max_proposals must be in [1, 128]");
  need(refine_passes >= 1 && refine_passes <= 4, "model.refine_passes must be in [1, 4]");
  need(!keypoints || keypoint_count >= 1, "model.keypoint_count must be >= 1");
  need(train.lr > 0 && train.momentum >= 0 && train.momentum < 1, "train.lr > 0 and train.momentum in [0, 1)");
  need(train.clip_norm > 0, "train.clip_norm must be positive");
  need(train.box_beta > 0 && train.box_weight >= 0, "train.box_beta must be positive, train.box_weight >= 0");
  need(train.positive_iou > 0 && train.positive_iou < 1, "train.positive_iou must be in (0, 1)");
  for (double t : eval.iou_thresholds) need(t > 0 && t <= 1, "eval IoU thresholds must be in (0, 1]");
  for (std::size_t w : backbone.widths) need(w >= 1, "backbone widths must be >= 1");
  try {
    grid.validate();
    for (std::size_t e : grid.extents) {
      if (e % 8 != 0) throw std::invalid_argument("grid extents must be divisible by 8");
    }
    gat.validate();
    self.gate.validate();
    const std::size_t fmap = data.image_size / kImageStride;
    if (gat.image_tokens != fmap * fmap || gat.image_channels != image.out_channels ||
        self.lidar_in != roi.out_channels + (keypoints ? kKeypointDescriptor : 0) || head.in != self.fused) {
      throw std::invalid_argument("derived widths are stale; call finalize()");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::to_text() const {
  ExperimentConfig copy = *this;
  std::string out;
  for (const auto& [key, field] : fields(copy)) out += key + " = " + field.get() + "\n";
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  auto table = fields(cfg);
  std::istringstream is(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    const std::string value = trim(line.substr(eq + 1));
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& kv) { return kv.first == key; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second.set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  cfg.finalize();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace qicvt

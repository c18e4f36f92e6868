#include "qicvt/harness/checkpoint.hpp"

#include <fstream>
#include <map>

#include "qicvt/harness/model.hpp"
#include "qicvt/tensor/serialize.hpp"

namespace qicvt {

namespace {

constexpr char kMagic[4] = {'Q', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

std::string section_of(const std::string& name) { return name.substr(0, name.find('.')); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg, const ParamStore& params) {
  std::map<std::string, std::vector<const std::pair<const std::string, Tensor>*>> sections;
  for (const auto& kv : params.all()) sections[section_of(kv.first)].push_back(&kv);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_string(os, cfg.to_text());
  write_u32(os, static_cast<std::uint32_t>(sections.size()));
  for (const auto& [section, entries] : sections) {
    write_string(os, section);
    write_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto* kv : entries) {
      write_string(os, kv->first);
      write_tensor(os, kv->second, Precision::kF64);
    }
  }
  if (!os) throw FormatError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read '" + path.string() + "'");
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) throw FormatError("not a checkpoint: " + path.string());
  if (const auto v = read_u32(is); v != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(v));
  Checkpoint ck{parse_config(read_string(is)), {}};
  const std::uint32_t n_sections = read_u32(is);
  for (std::uint32_t s = 0; s < n_sections; ++s) {
    const std::string section = read_string(is);
    const std::uint32_t n = read_u32(is);
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string name = read_string(is);
      if (section_of(name) != section) throw FormatError("parameter '" + name + "' filed under section '" + section + "'");
      ck.params.add(name, read_tensor(is, Precision::kF64));
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint");

  const ParamStore fresh = init_model(ck.config);
  for (const auto& [name, t] : fresh.all()) {
    if (!ck.params.contains(name)) throw ConfigError("checkpoint lacks parameter '" + name + "' required by its config");
    if (ck.params.get(name).shape() != t.shape()) {
      throw ConfigError("parameter '" + name + "' has shape " + shape_to_string(ck.params.get(name).shape()) +
                        ", config expects " + shape_to_string(t.shape()));
    }
  }
  if (ck.params.all().size() != fresh.all().size()) throw ConfigError("checkpoint has parameters its config does not use");
  return ck;
}

}  // namespace qicvt

#pragma once

#include <filesystem>

#include "qicvt/harness/config.hpp"
#include "qicvt/tensor/params.hpp"

namespace qicvt {

struct Checkpoint {
  ExperimentConfig config;
  ParamStore params;
};

// "QCKP", version, the config text, then one section per module prefix
// (backbone, rpn, roi, image, gat, ctx, self, head) of named f64 tensors.
void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg, const ParamStore& params);
// Throws FormatError on corrupt files and ConfigError when the parameters do
// not match what the embedded config would build.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qicvt

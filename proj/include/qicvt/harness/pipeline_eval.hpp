#pragma once

#include <filesystem>

#include "qicvt/harness/model.hpp"

namespace qicvt {

std::vector<std::vector<Detection>> detect_all(const ParamStore& store, const ExperimentConfig& cfg,
                                                const std::vector<SyntheticScene>& scenes);
std::vector<std::vector<GroundTruthBox>> ground_truth(const std::vector<SyntheticScene>& scenes);

EvalReport evaluate_model(const ParamStore& store, const ExperimentConfig& cfg, const std::vector<SyntheticScene>& scenes,
                          std::vector<std::vector<Detection>>* detections = nullptr);

// report.csv, summary.txt and detections.txt under dir.
void write_report(const std::filesystem::path& dir, const EvalReport& report,
                  const std::vector<std::vector<Detection>>& detections);

// Rejects scenes whose image size does not match the config.
void check_compatible(const ExperimentConfig& cfg, const std::vector<SyntheticScene>& scenes);

}  // namespace qicvt

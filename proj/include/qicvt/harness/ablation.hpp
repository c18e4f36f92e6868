#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "qicvt/harness/config.hpp"

namespace qicvt {

struct AblationVariant {
  std::string name;
  bool gat_on;
  bool self_on;
};

// GAT-only, SELF-only, GAT+SELF; the combined row is last.
const std::vector<AblationVariant>& ablation_variants();
ExperimentConfig variant_config(const ExperimentConfig& base, const AblationVariant& v, std::uint64_t seed);

struct AblationRow {
  std::uint64_t seed = 0;
  std::string variant;
  std::size_t params = 0;
  std::array<double, kNumClasses> aph_l2{};
  double maph_l2 = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // seed-major, variant order within a seed
  std::size_t seeds_won = 0;      // seeds where GAT+SELF beats both single variants
  std::size_t seed_count = 0;
  bool direction_holds() const { return seed_count > 0 && seeds_won * 5 >= seed_count * 4; }
  std::string to_csv() const;
  std::string summary() const;
};

inline constexpr std::size_t kAblationSeeds = 5;

// For each of the seeds base.seed + 0..4: generate train/val scenes with that
// seed, train every variant on train, evaluate APH(L2) on val.
AblationResult run_ablation(const ExperimentConfig& base, std::size_t seeds = kAblationSeeds,
                            const std::function<void(const AblationRow&)>& on_row = {});

}  // namespace qicvt

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvp/adapt.hpp"
#include "fvp/data.hpp"
#include "fvp/metrics.hpp"
#include "fvp/segnet.hpp"

namespace fvp::tools {

/// Source pretraining, target-supervised upper bound and prompt adaptation for one seed.
struct ProtocolConfig {
  GeneratorConfig data = GeneratorConfig::defaults();
  TrainConfig source_training;
  TrainConfig target_training;
  AdaptConfig adapt;
  std::vector<double> lr_grid = kDefaultLrGrid;
  int threads = 1;
};

struct SeedRun {
  std::uint64_t seed = 0;
  SyntheticBenchmark data;
  SegModel source_model;
  EvalReport source_only;
  EvalReport target_supervised;
  EvalReport adapted;
  SweepResult sweep;
  double seconds = 0.0;
};

/// Adaptation uses the unlabeled target train split; every report scores the target test split.
SeedRun run_protocol(const ProtocolConfig& cfg, std::uint64_t seed);

nlohmann::json summarize(const SeedRun& run);

struct AblationConfig {
  AdaptConfig reference;  // complex prompt, full selection
  std::vector<double> lr_grid = kDefaultLrGrid;
  std::optional<double> reference_lr;  // skips the reference sweep when already known
  bool sweep_every_row = false;  // otherwise rows reuse the reference row's chosen lr
  std::vector<int> sizes = {2, 4, 8, 16, 32, 64};
  std::vector<int> pads = {4, 12, 32};
};

struct AblationRow {
  std::string table;  // "size" | "variant" | "svp" | "selection"
  std::string label;
  AdaptConfig config;
  AdaptReport report;
  EvalReport eval;
};

struct AblationResult {
  EvalReport source_only;
  double reference_lr = 0.0;
  std::vector<AblationRow> rows;

  const AblationRow* find(const std::string& table, const std::string& label) const;
  nlohmann::json to_json() const;
};

/// Prompt sizes clamped to the image are skipped; identical configurations are adapted once.
AblationResult run_ablation(const SegModel& model, const Dataset& adapt_set, const Dataset& eval_set,
                            const AblationConfig& cfg);

nlohmann::json eval_json(const EvalReport& report);
nlohmann::json adapt_json(const AdaptReport& report, bool include_timings);

}  // namespace fvp::tools

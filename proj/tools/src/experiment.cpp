#include "fvp/tools/experiment.hpp"

#include <chrono>
#include <map>
#include <sstream>

#include "fvp/random.hpp"

namespace fvp::tools {

SeedRun run_protocol(const ProtocolConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SeedRun run;
  run.seed = seed;
  run.data = synthesize(cfg.data, seed);

  TrainConfig source_cfg = cfg.source_training;
  source_cfg.seed = derive_seed(seed, {0x5eed, 0});
  source_cfg.threads = cfg.threads;
  run.source_model = train_source(run.data.source.train, source_cfg).model;

  TrainConfig target_cfg = cfg.target_training;
  target_cfg.seed = derive_seed(seed, {0x5eed, 1});
  target_cfg.threads = cfg.threads;
  const SegModel target_model = train_source(run.data.target.train, target_cfg).model;

  const Dataset& eval_set = run.data.target.test;
  run.source_only = evaluate(run.source_model, nullptr, eval_set, cfg.threads);
  run.target_supervised = evaluate(target_model, nullptr, eval_set, cfg.threads);

  AdaptConfig adapt_cfg = cfg.adapt;
  adapt_cfg.seed = derive_seed(seed, {0x5eed, 2});
  adapt_cfg.threads = cfg.threads;
  run.sweep = adapt_lr_sweep(run.source_model, run.data.target.train, adapt_cfg, cfg.lr_grid);
  run.adapted = evaluate(run.source_model, &run.sweep.best.prompt, eval_set, cfg.threads);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

nlohmann::json eval_json(const EvalReport& report) { return nlohmann::json::parse(report.to_json()); }

nlohmann::json adapt_json(const AdaptReport& report, bool include_timings) {
  return nlohmann::json::parse(report.to_json(include_timings));
}

nlohmann::json summarize(const SeedRun& run) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& [lr, report] : run.sweep.runs) sweep.push_back({{"lr", lr}, {"final_loss", report.final_loss()}});
  return {
      {"seed", run.seed},
      {"source_only", eval_json(run.source_only)},
      {"target_supervised", eval_json(run.target_supervised)},
      {"adapted", eval_json(run.adapted)},
      {"best_lr", run.sweep.best_lr},
      {"sweep", sweep},
  };
}

namespace {

std::string config_key(const AdaptConfig& c) {
  std::ostringstream key;
  key << to_string(c.variant) << '/' << (c.variant == PromptKind::kSvp ? c.pad : c.r) << '/' << c.selection.use_global
      << c.selection.use_intra << c.selection.use_prototype << '/' << c.selection.lambda << '/' << c.selection.k << '/'
      << c.lr << '/' << c.epochs << '/' << c.batch_size << '/' << c.weight_decay << '/' << c.seed;
  return key.str();
}

std::string selection_label(const SelectionConfig& s) {
  std::string label;
  if (s.use_global) label += "global+";
  if (s.use_intra) label += "intra+";
  if (s.use_prototype) label += "prototype+";
  if (label.empty()) return "none";
  label.pop_back();
  return label;
}

}  // namespace

const AblationRow* AblationResult::find(const std::string& table, const std::string& label) const {
  for (const auto& row : rows)
    if (row.table == table && row.label == label) return &row;
  return nullptr;
}

AblationResult run_ablation(const SegModel& model, const Dataset& adapt_set, const Dataset& eval_set,
                            const AblationConfig& cfg) {
  require(!adapt_set.empty() && !eval_set.empty(), ErrorKind::kConfig, "ablation needs adaptation and evaluation images");
  cfg.reference.validate();
  const int size = std::min(adapt_set.samples.front().image.height(), adapt_set.samples.front().image.width());

  AblationResult result;
  result.source_only = evaluate(model, nullptr, eval_set, cfg.reference.threads);

  AdaptConfig reference = cfg.reference;
  reference.variant = PromptKind::kComplex;
  result.reference_lr =
      cfg.reference_lr ? *cfg.reference_lr : adapt_lr_sweep(model, adapt_set, reference, cfg.lr_grid).best_lr;
  reference.lr = result.reference_lr;

  std::map<std::string, std::pair<AdaptReport, EvalReport>> cache;
  auto run_row = [&](const std::string& table, const std::string& label, AdaptConfig c) {
    if (cfg.sweep_every_row) c.lr = adapt_lr_sweep(model, adapt_set, c, cfg.lr_grid).best_lr;
    const std::string key = config_key(c);
    auto it = cache.find(key);
    if (it == cache.end()) {
      AdaptResult r = adapt(model, adapt_set, c);
      EvalReport e = evaluate(model, &r.prompt, eval_set, c.threads);
      it = cache.emplace(key, std::pair{std::move(r.report), std::move(e)}).first;
    }
    result.rows.push_back({table, label, c, it->second.first, it->second.second});
  };

  for (int r : cfg.sizes) {
    if (r < 1 || r > size) continue;
    AdaptConfig c = reference;
    c.r = r;
    run_row("size", "r=" + std::to_string(r), c);
  }
  for (PromptKind kind : {PromptKind::kComplex, PromptKind::kAmplitude, PromptKind::kPhase}) {
    AdaptConfig c = reference;
    c.variant = kind;
    run_row("variant", std::string(to_string(kind)), c);
  }
  for (int pad : cfg.pads) {
    if (pad < 1) continue;
    AdaptConfig c = reference;
    c.variant = PromptKind::kSvp;
    c.pad = std::min(pad, (size + 1) / 2);
    run_row("svp", "pad=" + std::to_string(c.pad), c);
  }
  const SelectionConfig full = reference.selection;
  const std::vector<std::array<bool, 3>> toggles = {
      {false, false, false}, {false, false, true}, {true, false, false}, {true, true, false}, {true, true, true}};
  for (const auto& [global, intra, proto] : toggles) {
    AdaptConfig c = reference;
    c.selection = full;
    c.selection.use_global = global;
    c.selection.use_intra = intra;
    c.selection.use_prototype = proto;
    run_row("selection", selection_label(c.selection), c);
  }
  return result;
}

nlohmann::json AblationResult::to_json() const {
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& row : rows) {
    nlohmann::json entry = {
        {"label", row.label},
        {"variant", to_string(row.config.variant)},
        {"lr", row.config.lr},
        {"trainable_parameters", row.report.trainable_parameters},
        {"final_loss", row.report.final_loss()},
        {"selected_fraction", row.report.selected_fraction},
        {"mean_foreground_dice", row.eval.mean_foreground_dice},
        {"mean_foreground_asd",
         row.eval.mean_foreground_asd ? nlohmann::json(*row.eval.mean_foreground_asd) : nlohmann::json(nullptr)},
        {"dice", row.eval.dice},
        {"dice_gain_over_source_only", row.eval.mean_foreground_dice - source_only.mean_foreground_dice},
    };
    if (row.config.variant == PromptKind::kSvp) entry["pad"] = row.config.pad;
    else entry["r"] = row.config.r;
    if (row.table == "selection") {
      entry["global"] = row.config.selection.use_global;
      entry["intra"] = row.config.selection.use_intra;
      entry["prototype"] = row.config.selection.use_prototype;
    }
    tables[row.table].push_back(entry);
  }
  return {
      {"source_only", eval_json(source_only)},
      {"reference_lr", reference_lr},
      {"tables", tables},
  };
}

}  // namespace fvp::tools

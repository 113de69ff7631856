#include "fvp/tools/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fvp/adapt.hpp"
#include "fvp/binary_io.hpp"
#include "fvp/data.hpp"
#include "fvp/metrics.hpp"
#include "fvp/pipeline.hpp"
#include "fvp/prompt.hpp"
#include "fvp/pseudo.hpp"
#include "fvp/random.hpp"
#include "fvp/segnet.hpp"
#include "fvp/tools/experiment.hpp"
#include "fvp/tools/render.hpp"

namespace fvp::tools {
namespace {

namespace fs = std::filesystem;

/// JSON object -> CLI11 config items; nested objects address subcommands.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    throw CLI::ConfigError("writing JSON configuration is not supported");
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("unsupported config value: " + v.dump());
  }

  static void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        std::vector<std::string> nested = parents;
        nested.push_back(key);
        collect(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void usage_check(bool cond, const std::string& msg) {
  if (!cond) throw UsageError(msg);
}

/// Refuses to write over any input of the same invocation.
void guard_outputs(const std::vector<fs::path>& outputs, const std::vector<fs::path>& inputs) {
  for (const auto& o : outputs) {
    if (o.empty()) continue;
    for (const auto& i : inputs) {
      if (i.empty()) continue;
      std::error_code ec;
      const bool same = fs::exists(o) && fs::exists(i) ? fs::equivalent(o, i, ec)
                                                      : fs::weakly_canonical(o) == fs::weakly_canonical(i);
      usage_check(!same, "output " + o.string() + " would overwrite input " + i.string());
    }
  }
}

void emit_json(const nlohmann::json& j, const fs::path& path, std::ostream& out) {
  if (path.empty()) {
    out << j.dump(2) << "\n";
  } else {
    write_text(path, j.dump(2) + "\n");
  }
}

struct Selection {
  double lambda = 0.01;
  double k = 0.8;
  bool no_global = false;
  bool no_intra = false;
  bool no_prototype = false;

  SelectionConfig config() const {
    SelectionConfig s;
    s.lambda = lambda;
    s.k = k;
    s.use_global = !no_global;
    s.use_intra = !no_intra;
    s.use_prototype = !no_prototype;
    return s;
  }

  void attach(CLI::App* app) {
    app->add_option("--lambda", lambda, "Global probability threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app->add_option("--k", k, "Intra-class top-k fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app->add_flag("--no-global", no_global, "Disable the global threshold");
    app->add_flag("--no-intra", no_intra, "Disable the intra-class threshold");
    app->add_flag("--no-prototype", no_prototype, "Disable prototype-consistency selection");
  }
};

Dataset load_domain(const fs::path& path, const std::string& split) {
  return load_split(load_manifest(path), split);
}

// ---------------------------------------------------------------------------------------------

struct GenData {
  fs::path out;
  std::uint64_t seed = 0;
  GeneratorConfig cfg = GeneratorConfig::defaults();

  void attach(CLI::App* app) {
    app->add_option("--out", out, "Output directory")->required();
    app->add_option("--seed", seed, "Generator seed")->envname("FVP_SEED")->capture_default_str();
    app->add_option("--size", cfg.size, "Image side length (multiple of 4)")->capture_default_str();
    app->add_option("--n-classes", cfg.n_classes, "Classes including background")->capture_default_str();
    app->add_option("--n-train", cfg.n_train, "Train images per domain")->capture_default_str();
    app->add_option("--n-test", cfg.n_test, "Test images per domain")->capture_default_str();
  }

  int run(std::ostream& out_stream) {
    const int default_classes = static_cast<int>(GeneratorConfig::defaults().source.class_intensity.size());
    if (cfg.n_classes != default_classes) {
      // Extra classes reuse evenly spaced intensities.
      for (ShiftProfile* p : {&cfg.source, &cfg.target}) {
        const double lo = p->class_intensity.front(), hi = p->class_intensity.back();
        p->class_intensity.resize(std::max(cfg.n_classes, 0));
        for (int c = 0; c < cfg.n_classes; ++c)
          p->class_intensity[c] = cfg.n_classes > 1 ? lo + (hi - lo) * c / (cfg.n_classes - 1) : lo;
      }
    }
    cfg.validate();
    const auto [source, target] = generate(cfg, seed, out);
    out_stream << "wrote " << source.train.size() + source.test.size() << " source and "
               << target.train.size() + target.test.size() << " target samples under " << out.string() << "\n";
    return kExitOk;
  }
};

struct Pretrain {
  fs::path data;
  fs::path out;
  fs::path report;
  std::string split = "train";
  std::uint64_t seed = 0;
  TrainConfig cfg;
  bool timings = false;

  void attach(CLI::App* app) {
    app->add_option("--data", data, "Domain directory or manifest")->required()->check(CLI::ExistingPath);
    app->add_option("--out", out, "Output weights (.fvpw)")->required();
    app->add_option("--split", split, "Training split")->capture_default_str()->check(CLI::IsMember({"train", "test"}));
    app->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--batch-size", cfg.batch_size, "Batch size")->capture_default_str()->check(CLI::Range(1, 1 << 16));
    app->add_option("--seed", seed, "Initialization and shuffling seed")->envname("FVP_SEED")->capture_default_str();
    app->add_option("--report", report, "Training history JSON");
    app->add_flag("--timings", timings, "Include wall-clock seconds in the report");
  }

  int run(std::ostream& out_stream, int threads) {
    guard_outputs({out, report}, {data});
    const Dataset train = load_domain(data, split);
    require(!train.empty(), ErrorKind::kConfig, "training split is empty");
    cfg.seed = seed;
    cfg.threads = threads;
    const TrainResult result = train_source(train, cfg);
    save_model(result.model, out);
    if (!report.empty()) {
      nlohmann::json j = {{"epochs", cfg.epochs},    {"lr", cfg.lr},
                          {"batch_size", cfg.batch_size}, {"seed", seed},
                          {"samples", train.size()},  {"epoch_loss", result.history.epoch_loss},
                          {"checksum", result.model.checksum()}};
      if (timings) j["seconds"] = result.history.seconds;
      write_text(report, j.dump(2) + "\n");
    }
    out_stream << "trained on " << train.size() << " images, final loss "
               << (result.history.epoch_loss.empty() ? 0.0 : result.history.epoch_loss.back()) << " -> " << out.string()
               << "\n";
    return kExitOk;
  }
};

struct Adapt {
  fs::path model;
  fs::path target;
  fs::path out;
  fs::path report;
  std::string split = "train";
  std::string variant = "complex";
  int r = AdaptConfig{}.r;
  int pad = AdaptConfig{}.pad;
  double lr = AdaptConfig{}.lr;
  bool lr_sweep = false;
  std::vector<double> lr_grid = kDefaultLrGrid;
  int epochs = AdaptConfig{}.epochs;
  int batch_size = AdaptConfig{}.batch_size;
  double weight_decay = AdaptConfig{}.weight_decay;
  std::uint64_t seed = 0;
  bool timings = false;
  Selection selection;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "Frozen source weights (.fvpw)")->required()->check(CLI::ExistingFile);
    app->add_option("--target", target, "Target domain directory or manifest")->required()->check(CLI::ExistingPath);
    app->add_option("--out", out, "Output prompt (.fvpp)")->required();
    app->add_option("--report", report, "Adaptation report JSON");
    app->add_option("--split", split, "Unlabeled target split to adapt on")
        ->capture_default_str()
        ->check(CLI::IsMember({"train", "test"}));
    app->add_option("--variant", variant, "complex | amplitude | phase | svp")
        ->capture_default_str()
        ->check(CLI::IsMember({"complex", "amplitude", "phase", "svp"}));
    app->add_option("--r", r, "Low-frequency box size")->capture_default_str()->check(CLI::Range(1, 1 << 15));
    app->add_option("--pad", pad, "Spatial prompt border width")->capture_default_str()->check(CLI::Range(1, 1 << 15));
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_flag("--lr-sweep", lr_sweep, "Pick the learning rate from --lr-grid by final pseudo-label loss");
    app->add_option("--lr-grid", lr_grid, "Learning rates tried by --lr-sweep")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--epochs", epochs, "Adaptation epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--batch-size", batch_size, "Batch size")->capture_default_str()->check(CLI::Range(1, 1 << 16));
    app->add_option("--weight-decay", weight_decay, "L2 weight decay")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--seed", seed, "Shuffling seed")->envname("FVP_SEED")->capture_default_str();
    app->add_flag("--timings", timings, "Include wall-clock seconds in the report");
    selection.attach(app);
  }

  AdaptConfig config(int threads) const {
    AdaptConfig c;
    c.variant = parse_prompt_kind(variant);
    c.r = r;
    c.pad = pad;
    c.selection = selection.config();
    c.lr = lr;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.weight_decay = weight_decay;
    c.seed = seed;
    c.threads = threads;
    return c;
  }

  int run(std::ostream& out_stream, int threads) {
    guard_outputs({out, report}, {model, target});
    const AdaptConfig cfg = config(threads);
    cfg.validate();
    const SegModel m = load_model(model);
    const Dataset data = load_domain(target, split);
    require(!data.empty(), ErrorKind::kConfig, "target split is empty");
    const GridShape shape = data.samples.front().image.shape();
    require(shape.channels == m.in_channels, ErrorKind::kConfig, "model and target channel counts differ");
    if (cfg.variant != PromptKind::kSvp) SpectrumPrompt(cfg.r, shape.channels, PromptVariant::kComplex).require_fits(shape.height, shape.width);

    AdaptResult result{make_prompt(cfg, shape.height, shape.width, shape.channels), {}};
    nlohmann::json sweep_json;
    if (lr_sweep) {
      SweepResult sweep = adapt_lr_sweep(m, data, cfg, lr_grid);
      for (const auto& [rate, rep] : sweep.runs) sweep_json.push_back({{"lr", rate}, {"final_loss", rep.final_loss()}});
      result = std::move(sweep.best);
    } else {
      result = adapt(m, data, cfg);
    }
    save_prompt(out, result.prompt);
    if (!report.empty()) {
      nlohmann::json j = adapt_json(result.report, timings);
      if (lr_sweep) j["lr_sweep"] = sweep_json;
      write_text(report, j.dump(2) + "\n");
    }
    for (const auto& w : result.report.warnings) out_stream << "warning: " << w << "\n";
    out_stream << describe(result.prompt) << ", lr " << result.report.config.lr << ", loss "
               << (result.report.epoch_loss.empty() ? 0.0 : result.report.epoch_loss.front()) << " -> "
               << result.report.final_loss() << " -> " << out.string() << "\n";
    return kExitOk;
  }
};

struct Eval {
  fs::path model;
  fs::path target;
  fs::path prompt;
  fs::path out;
  std::string split = "test";

  void attach(CLI::App* app) {
    app->add_option("--model", model, "Source weights (.fvpw)")->required()->check(CLI::ExistingFile);
    app->add_option("--target", target, "Labeled domain directory or manifest")->required()->check(CLI::ExistingPath);
    app->add_option("--prompt", prompt, "Prompt (.fvpp); omitted means source-only")->check(CLI::ExistingFile);
    app->add_option("--split", split, "Evaluation split")->capture_default_str()->check(CLI::IsMember({"train", "test"}));
    app->add_option("--out", out, "Report JSON (stdout when omitted)");
  }

  int run(std::ostream& out_stream, int threads) {
    guard_outputs({out}, {model, target, prompt});
    const SegModel m = load_model(model);
    const Dataset data = load_domain(target, split);
    std::optional<AnyPrompt> p;
    if (!prompt.empty()) p = load_prompt(prompt);
    const EvalReport report = evaluate(m, p ? &*p : nullptr, data, threads);
    nlohmann::json j = eval_json(report);
    j["prompt"] = p ? nlohmann::json(describe(*p)) : nlohmann::json(nullptr);
    emit_json(j, out, out_stream);
    if (!out.empty()) out_stream << "mean foreground dice " << report.mean_foreground_dice << " -> " << out.string() << "\n";
    return kExitOk;
  }
};

struct Ablate {
  fs::path model;
  fs::path target;
  fs::path out;
  std::string adapt_split = "train";
  std::string eval_split = "test";
  AblationConfig cfg;
  int r = 16;
  int epochs = 50;
  std::uint64_t seed = 0;
  Selection selection;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "Frozen source weights (.fvpw)")->required()->check(CLI::ExistingFile);
    app->add_option("--target", target, "Target domain directory or manifest")->required()->check(CLI::ExistingPath);
    app->add_option("--out", out, "Ablation tables JSON")->required();
    app->add_option("--r", r, "Reference box size")->capture_default_str()->check(CLI::Range(1, 1 << 15));
    app->add_option("--epochs", epochs, "Adaptation epochs per row")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--sizes", cfg.sizes, "Box sizes for the size table")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--pads", cfg.pads, "Border widths for the spatial prompt table")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--lr-grid", cfg.lr_grid, "Learning rates for the sweep")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_flag("--sweep-every-row", cfg.sweep_every_row, "Sweep the learning rate per row instead of reusing the reference");
    app->add_option("--seed", seed, "Shuffling seed")->envname("FVP_SEED")->capture_default_str();
    selection.attach(app);
  }

  int run(std::ostream& out_stream, int threads) {
    guard_outputs({out}, {model, target});
    cfg.reference.variant = PromptKind::kComplex;
    cfg.reference.r = r;
    cfg.reference.epochs = epochs;
    cfg.reference.seed = seed;
    cfg.reference.threads = threads;
    cfg.reference.selection = selection.config();
    cfg.reference.validate();
    usage_check(!cfg.lr_grid.empty(), "--lr-grid must not be empty");
    const SegModel m = load_model(model);
    const DatasetManifest manifest = load_manifest(target);
    const Dataset adapt_set = load_split(manifest, adapt_split);
    const Dataset eval_set = load_split(manifest, eval_split);
    require(!adapt_set.empty() && !eval_set.empty(), ErrorKind::kConfig, "target splits must be non-empty");
    SpectrumPrompt(r, m.in_channels, PromptVariant::kComplex).require_fits(manifest.height, manifest.width);
    const AblationResult result = run_ablation(m, adapt_set, eval_set, cfg);
    write_text(out, result.to_json().dump(2) + "\n");
    out_stream << result.rows.size() << " ablation rows, reference lr " << result.reference_lr << " -> " << out.string()
               << "\n";
    return kExitOk;
  }
};

struct Render {
  fs::path model;
  fs::path target;
  fs::path prompt;
  fs::path out;
  std::string split = "test";
  int index = 0;
  int scale = 4;
  bool noise_sim = false;
  double sigma = 200.0;
  int r = 16;
  std::uint64_t seed = 0;
  Selection selection;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "Source weights (.fvpw)")->required()->check(CLI::ExistingFile);
    app->add_option("--target", target, "Domain directory or manifest")->required()->check(CLI::ExistingPath);
    app->add_option("--prompt", prompt, "Prompt (.fvpp)")->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output directory")->required();
    app->add_option("--split", split, "Split holding the sample")->capture_default_str()->check(CLI::IsMember({"train", "test"}));
    app->add_option("--index", index, "Sample index within the split")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--scale", scale, "Nearest-neighbor magnification")->capture_default_str()->check(CLI::Range(1, 64));
    app->add_flag("--noise-sim", noise_sim, "Also render a zero-mean complex Gaussian noise prompt");
    app->add_option("--sigma", sigma, "Noise standard deviation per real/imaginary part")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    app->add_option("--r", r, "Noise box size")->capture_default_str()->check(CLI::Range(1, 1 << 15));
    app->add_option("--seed", seed, "Noise seed")->envname("FVP_SEED")->capture_default_str();
    selection.attach(app);
  }

  int run(std::ostream& out_stream) {
    guard_outputs({out}, {model, target, prompt});
    const SegModel m = load_model(model);
    const Dataset data = load_domain(target, split);
    require(index < static_cast<int>(data.size()), ErrorKind::kConfig,
            "--index " + std::to_string(index) + " out of range for " + std::to_string(data.size()) + " samples");
    std::optional<AnyPrompt> p;
    if (!prompt.empty()) p = load_prompt(prompt);
    const Sample& s = data.samples[index];
    const GridShape shape = s.image.shape();
    std::optional<SpectrumPrompt> noise;
    if (noise_sim) {
      noise = noise_prompt(r, shape.channels, sigma, derive_seed(seed, {0x4015e}));
      noise->require_fits(shape.height, shape.width);
    }

    // Everything is computed before the first file is written.
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
    auto stage_pgm = [&](const std::string& name, const RealGrid& x, std::optional<std::pair<double, double>> range) {
      files.emplace_back(name, range ? encode_pgm(x, range->first, range->second, scale) : encode_pgm(x, scale));
    };
    auto stage_ppm = [&](const std::string& name, const RgbImage& img) { files.emplace_back(name, encode_ppm(img, scale)); };

    auto range_of = [](std::initializer_list<const RealGrid*> grids) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const RealGrid* g : grids)
        for (double v : g->values()) lo = std::min(lo, v), hi = std::max(hi, v);
      return std::pair{lo, hi};
    };

    const RealGrid original = model_input(s.image);
    const SegOutput base_pred = predict(m, original);
    stage_ppm("overlay_truth.ppm", overlay(original, s.label));
    stage_ppm("overlay_source_only.ppm", overlay(original, argmax_labels(base_pred.probs)));
    SelectionConfig double_only = selection.config();
    double_only.use_prototype = false;
    stage_ppm("pseudo_double_threshold.ppm", label_map(reliable_labels(base_pred, double_only)));
    stage_ppm("pseudo_reliable.ppm", label_map(reliable_labels(base_pred, selection.config())));

    if (p) {
      const RealGrid prompted = model_input(s.image, &*p);
      const auto range = range_of({&original, &prompted});
      stage_pgm("original.pgm", original, range);
      stage_pgm("prompted.pgm", prompted, range);
      stage_ppm("overlay_prompted.ppm", overlay(prompted, argmax_labels(predict(m, prompted).probs)));
      if (const auto* v = std::get_if<SpectrumPrompt>(&*p)) {
        stage_pgm("prompt_real.pgm", centered_view(v->real_part()), std::nullopt);
        if (v->variant() == PromptVariant::kComplex) stage_pgm("prompt_imag.pgm", centered_view(v->imag_part()), std::nullopt);
        if (v->variant() == PromptVariant::kComplex)
          stage_pgm("prompt_spatial.pgm", spatial_contribution(*v, shape.height, shape.width), std::nullopt);
      } else {
        stage_pgm("prompt_spatial.pgm", std::get<SpatialPrompt>(*p).values(), std::nullopt);
      }
    } else {
      stage_pgm("original.pgm", original, std::nullopt);
    }
    if (noise) {
      const AnyPrompt np = *noise;
      const RealGrid noisy = model_input(s.image, &np);
      const auto range = range_of({&original, &noisy});
      stage_pgm("noise_prompt_real.pgm", centered_view(noise->real_part()), std::nullopt);
      stage_pgm("noise_prompt_imag.pgm", centered_view(noise->imag_part()), std::nullopt);
      stage_pgm("noise_original.pgm", original, range);
      stage_pgm("noise_prompted.pgm", noisy, range);
      stage_ppm("overlay_noise.ppm", overlay(noisy, argmax_labels(predict(m, noisy).probs)));
    }

    for (const auto& [name, bytes] : files) write_file(out / name, bytes);
    out_stream << "rendered " << files.size() << " images of " << s.id << " into " << out.string() << "\n";
    return kExitOk;
  }
};

int dispatch(CLI::App& app, std::ostream& out, std::ostream& err, const std::vector<std::string>& args, int& threads,
             GenData& gen, Pretrain& pre, Adapt& ad, Eval& ev, Ablate& ab, Render& rd) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
  const std::string name = sub ? sub->get_name() : "";
  try {
    if (name == "gen-data") return gen.run(out);
    if (name == "pretrain") return pre.run(out, threads);
    if (name == "adapt") return ad.run(out, threads);
    if (name == "eval") return ev.run(out, threads);
    if (name == "ablate") return ab.run(out, threads);
    if (name == "render") return rd.run(out);
    err << "usage error: a subcommand is required\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << name << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << name << ": " << e.what() << "\n";
    return e.kind() == ErrorKind::kConfig ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << name << ": " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fourier visual prompting for source-free segmentation adaptation", "fvp"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file of option values; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(0, 1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (1 guarantees reproducible bytes)")
      ->capture_default_str()
      ->check(CLI::Range(1, 1024));

  GenData gen;
  Pretrain pre;
  Adapt ad;
  Eval ev;
  Ablate ab;
  Render rd;
  const std::vector<std::pair<CLI::App*, std::function<void(CLI::App*)>>> subs = {
      {app.add_subcommand("gen-data", "Write the synthetic source/target benchmark"), [&](CLI::App* a) { gen.attach(a); }},
      {app.add_subcommand("pretrain", "Train a segmentation model on a labeled domain"), [&](CLI::App* a) { pre.attach(a); }},
      {app.add_subcommand("adapt", "Learn a prompt for a frozen model on unlabeled target images"),
       [&](CLI::App* a) { ad.attach(a); }},
      {app.add_subcommand("eval", "Dice and ASD of a model, optionally prompted"), [&](CLI::App* a) { ev.attach(a); }},
      {app.add_subcommand("ablate", "Size, variant, spatial-prompt and selection ablation tables"),
       [&](CLI::App* a) { ab.attach(a); }},
      {app.add_subcommand("render", "PGM/PPM views of prompts, prompted images and pseudo labels"),
       [&](CLI::App* a) { rd.attach(a); }},
  };
  for (const auto& [sub, attach] : subs) {
    sub->configurable();
    attach(sub);
  }
  return dispatch(app, out, err, args, threads, gen, pre, ad, ev, ab, rd);
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace fvp::tools

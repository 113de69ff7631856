// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero if any fails.
// Usage: fvp_acceptance [criterion numbers...]   (all when none given)

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fvp/adapt.hpp"
#include "fvp/binary_io.hpp"
#include "fvp/data.hpp"
#include "fvp/fft.hpp"
#include "fvp/metrics.hpp"
#include "fvp/prompt.hpp"
#include "fvp/pseudo.hpp"
#include "fvp/random.hpp"
#include "fvp/segnet.hpp"
#include "fvp/tools/cli.hpp"
#include "fvp/tools/experiment.hpp"
#include "oracles/dft_oracle.hpp"
#include "oracles/finite_diff.hpp"
#include "oracles/metric_oracle.hpp"
#include "oracles/selection_oracle.hpp"

using namespace fvp;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets, fixed here rather than read from anywhere.
constexpr double kDftTol = 1e-8;
constexpr double kRoundtripTol = 1e-10;
constexpr double kParsevalTol = 1e-9;
constexpr double kFftBudgetSeconds = 10.0;
constexpr double kGradientTol = 1e-4;
constexpr double kGradientBudgetSeconds = 60.0;
constexpr int kSelectionTrials = 200;
constexpr int kMetricTrials = 100;
constexpr double kAsdTol = 1e-9;
constexpr double kSupervisedGap = 0.10;
constexpr double kRequiredGain = 0.05;
constexpr double kMaxDegradation = 0.01;
constexpr int kRequiredSeeds = 4;
constexpr double kProtocolBudgetCpuSeconds = 15.0 * 60.0;
constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

struct Outcome {
  bool pass = true;
  std::string detail;
};

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

RealGrid random_real(int H, int W, int C, Rng& rng, double lo = -1.0, double hi = 1.0) {
  RealGrid x(H, W, C);
  for (double& v : x.values()) v = rng.uniform(lo, hi);
  return x;
}

double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(std::span<const Complex> a) {
  double m = 0.0;
  for (const Complex& v : a) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------------------------

Outcome parameter_accounting() {
  const std::size_t r32 = SpectrumPrompt(32, 1, PromptVariant::kComplex).parameter_count();
  const std::size_t r16 = SpectrumPrompt(16, 1, PromptVariant::kComplex).parameter_count();
  return {r32 == 2048 && r16 == 512, fmt("r=32 -> %zu (want 2048), r=16 -> %zu (want 512)", r32, r16)};
}

Outcome fft_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2);
  double worst_dft = 0.0;
  for (int H = 1; H <= 16; ++H)
    for (int W = 1; W <= 16; ++W) {
      ComplexGrid z(H, W, 1);
      for (Complex& v : z.values()) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
      const ComplexGrid fast = fft2(z), slow = oracle::naive_dft2(z);
      worst_dft = std::max(worst_dft, max_abs_diff(fast.values(), slow.values()) / std::max(1.0, max_abs(slow.values())));
      const ComplexGrid ifast = ifft2(z), islow = oracle::naive_dft2(z, true);
      worst_dft = std::max(worst_dft, max_abs_diff(ifast.values(), islow.values()) / std::max(1.0, max_abs(islow.values())));
    }
  double worst_roundtrip = 0.0, worst_parseval = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ComplexGrid z(64, 64, 1);
    for (Complex& v : z.values()) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const ComplexGrid Z = fft2(z);
    const ComplexGrid back = ifft2(Z);
    worst_roundtrip = std::max(worst_roundtrip, max_abs_diff(back.values(), z.values()));
    double e_space = 0.0, e_freq = 0.0;
    for (const Complex& v : z.values()) e_space += std::norm(v);
    for (const Complex& v : Z.values()) e_freq += std::norm(v);
    e_freq /= static_cast<double>(z.size());
    worst_parseval = std::max(worst_parseval, std::abs(e_space - e_freq) / e_space);
  }
  const double seconds = wall_since(t0);
  return {worst_dft < kDftTol && worst_roundtrip < kRoundtripTol && worst_parseval < kParsevalTol &&
              seconds < kFftBudgetSeconds,
          fmt("dft %.2e (<%.0e), roundtrip %.2e (<%.0e), parseval %.2e (<%.0e), %.2fs (<%.0fs)", worst_dft, kDftTol,
              worst_roundtrip, kRoundtripTol, worst_parseval, kParsevalTol, seconds, kFftBudgetSeconds)};
}

ReliableLabel random_reliable(int H, int W, int C, Rng& rng) {
  ReliableLabel l;
  l.n_classes = C;
  l.y = LabelGrid(H, W, 1);
  l.mask = LabelGrid(H, W, 1);
  for (std::size_t i = 0; i < l.y.size(); ++i) {
    l.y[i] = static_cast<std::uint8_t>(rng.below(C));
    l.mask[i] = rng.below(4) != 0;
  }
  return l;
}

/// Model with non-trivial normalization statistics so every stage matters.
SegModel gradient_model(std::uint64_t seed, int n_classes) {
  SegModel m = init_model(seed, n_classes);
  Rng rng(seed + 100);
  for (auto& bn : m.norms)
    for (int c = 0; c < bn.channels; ++c) {
      bn.running_mean[c] = rng.uniform(-0.2, 0.2);
      bn.running_var[c] = rng.uniform(0.5, 2.0);
      bn.scale[c] = rng.uniform(0.5, 1.5);
      bn.shift[c] = rng.uniform(-0.2, 0.2);
    }
  return m;
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int S = 16, C = 3;
  const SegModel model = gradient_model(3, C);
  Rng rng(3);
  std::vector<RealGrid> base;
  std::vector<ReliableLabel> labels;
  for (int b = 0; b < 2; ++b) {
    base.push_back(standardize(random_real(S, S, 1, rng, 0.0, 2.0)).output);
    labels.push_back(random_reliable(S, S, C, rng));
  }

  double worst_prompt = 0.0;
  bool dc_zero = true;
  for (PromptVariant variant : {PromptVariant::kComplex, PromptVariant::kAmplitude, PromptVariant::kPhase}) {
    AnyPrompt prompt = SpectrumPrompt(8, 1, variant);
    std::vector<double> params = parameters(prompt);
    for (double& v : params) v = variant == PromptVariant::kPhase ? rng.uniform(-0.2, 0.2) : rng.uniform(-4.0, 4.0);
    set_parameters(prompt, params);
    const BatchGradient analytic = batch_gradient(model, prompt, base, labels);
    std::vector<double> numeric(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      numeric[i] = oracle::central_difference(
          [&] {
            AnyPrompt p = prompt;
            set_parameters(p, params);
            return batch_gradient(model, p, base, labels).loss;
          },
          params[i], 1e-5);
    worst_prompt = std::max(worst_prompt, oracle::relative_error(analytic.grads, numeric));
    if (variant == PromptVariant::kComplex) {
      // Box index of DC for r = 8 is (4, 4); imaginary parts follow the real block.
      const std::size_t dc = 4 * 8 + 4;
      dc_zero = analytic.grads[dc] == 0.0 && analytic.grads[64 + dc] == 0.0;
    }
  }

  // Raw image -> standardize -> frozen network -> masked cross entropy.
  RealGrid raw = random_real(S, S, 1, rng, 0.0, 3.0);
  const ReliableLabel label = random_reliable(S, S, C, rng);
  auto loss_of = [&] {
    const RealGrid x = standardize(raw).output;
    return seg_loss(predict(model, x).probs, label).loss;
  };
  const Standardized st = standardize(raw);
  const std::vector<RealGrid> batch{st.output};
  const ForwardResult fr = forward(model, batch);
  const LossResult lr = seg_loss(fr.outputs[0].probs, label);
  const RealGrid grad_x = st.backward(backward_input(model, fr.cache, lr.grad_logits)[0]);
  std::vector<double> numeric(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) numeric[i] = oracle::central_difference(loss_of, raw[i], 1e-5);
  const double worst_input = oracle::relative_error(grad_x.values(), numeric);

  const double seconds = wall_since(t0);
  return {worst_prompt < kGradientTol && worst_input < kGradientTol && dc_zero && seconds < kGradientBudgetSeconds,
          fmt("prompt rel err %.2e, input rel err %.2e (<%.0e), DC gradient %s, %.1fs (<%.0fs)", worst_prompt,
              worst_input, kGradientTol, dc_zero ? "exactly 0" : "NONZERO", seconds, kGradientBudgetSeconds)};
}

Outcome pseudo_label_oracle() {
  Rng rng(4);
  int mismatches = 0;
  for (int trial = 0; trial < kSelectionTrials; ++trial) {
    const int H = 1 + static_cast<int>(rng.below(8)), W = 1 + static_cast<int>(rng.below(8));
    const int C = 2 + static_cast<int>(rng.below(3)), L = 1 + static_cast<int>(rng.below(8));
    RealGrid p(H, W, C);
    const bool lattice = trial % 2 == 1;  // coarse values make ties common
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) {
        double total = 0.0;
        for (int c = 0; c < C; ++c)
          total += p(h, w, c) = lattice ? static_cast<double>(rng.below(5)) : std::exp(3.0 * rng.normal());
        if (total == 0.0) p(h, w, 0) = total = 1.0;
        for (int c = 0; c < C; ++c) p(h, w, c) /= total;
      }
    const RealGrid e = random_real(H, W, L, rng);
    SelectionConfig cfg;
    cfg.lambda = rng.uniform(0.0, 0.2);
    cfg.k = 1.0 - rng.uniform(0.0, 1.0);
    const ReliableLabel got = reliable_labels(SegOutput{p, RealGrid(), e}, cfg);
    const auto want = oracle::brute_reliable(p, e, cfg.lambda, cfg.k, true, true, true);
    bool same = got.mask == want.mask;
    for (std::size_t i = 0; same && i < got.mask.size(); ++i)
      if (got.mask[i]) same = got.y[i] == want.y[i];
    mismatches += !same;
  }
  return {mismatches == 0, fmt("%d/%d instances differ from brute force", mismatches, kSelectionTrials)};
}

// Criteria 5, 6 and 7 share the per-seed protocol runs.
struct ProtocolState {
  std::vector<tools::SeedRun> runs;
  double cpu_seconds = 0.0;
  std::vector<std::string> frozen_failures;
  int adapt_runs_checked = 0;
};

tools::ProtocolConfig protocol_config() {
  tools::ProtocolConfig cfg;
  cfg.source_training.epochs = 30;
  cfg.target_training.epochs = 60;
  cfg.adapt.variant = PromptKind::kComplex;
  cfg.adapt.r = 16;
  cfg.adapt.selection.lambda = 0.01;
  cfg.adapt.selection.k = 0.8;
  cfg.adapt.epochs = 50;
  cfg.lr_grid = {0.01, 0.1, 1.0};
  cfg.threads = 1;
  return cfg;
}

void check_frozen(ProtocolState& st, const std::string& what, std::uint64_t before, const SegModel& model,
                  const AdaptReport& report, std::size_t expected_parameters) {
  ++st.adapt_runs_checked;
  if (model.checksum() != before || report.model_checksum != before)
    st.frozen_failures.push_back(what + ": checksum changed");
  if (report.trainable_parameters != expected_parameters)
    st.frozen_failures.push_back(what + fmt(": %zu trainable, expected %zu", report.trainable_parameters,
                                            expected_parameters));
}

ProtocolState& protocol() {
  static ProtocolState st = [] {
    ProtocolState s;
    const double c0 = cpu_seconds();
    const tools::ProtocolConfig cfg = protocol_config();
    for (std::uint64_t seed : kSeeds) {
      s.runs.push_back(tools::run_protocol(cfg, seed));
      const auto& run = s.runs.back();
      const std::uint64_t sum = run.source_model.checksum();
      for (const auto& [lr, report] : run.sweep.runs)
        check_frozen(s, fmt("seed %llu lr %g", static_cast<unsigned long long>(seed), lr), sum, run.source_model,
                     report, 2 * 16 * 16);
      std::printf("  seed %llu: source-only %.3f (asd %.3f), adapted %.3f (asd %.3f, lr %g), target-supervised %.3f, %.0fs\n",
                  static_cast<unsigned long long>(seed), run.source_only.mean_foreground_dice,
                  run.source_only.mean_foreground_asd.value_or(NAN), run.adapted.mean_foreground_dice,
                  run.adapted.mean_foreground_asd.value_or(NAN), run.sweep.best_lr,
                  run.target_supervised.mean_foreground_dice, run.seconds);
      std::fflush(stdout);
    }
    s.cpu_seconds = cpu_seconds() - c0;
    return s;
  }();
  return st;
}

struct GainTally {
  int improved = 0;
  bool degraded = false;
  std::string gains;
};

GainTally tally(const std::vector<double>& source_only, const std::vector<double>& adapted) {
  GainTally t;
  for (std::size_t i = 0; i < source_only.size(); ++i) {
    const double gain = adapted[i] - source_only[i];
    t.improved += gain >= kRequiredGain;
    t.degraded |= gain < -kMaxDegradation;
    t.gains += fmt("%s%+.3f", i ? " " : "", gain);
  }
  return t;
}

Outcome desk_scale_adaptation() {
  const ProtocolState& st = protocol();
  bool gap_ok = true;
  int asd_ok = 0;
  std::vector<double> so, ad;
  std::string gaps;
  for (const auto& run : st.runs) {
    const double gap = run.target_supervised.mean_foreground_dice - run.source_only.mean_foreground_dice;
    gap_ok &= gap >= kSupervisedGap;
    gaps += fmt("%s%.3f", gaps.empty() ? "" : " ", gap);
    so.push_back(run.source_only.mean_foreground_dice);
    ad.push_back(run.adapted.mean_foreground_dice);
    const auto before = run.source_only.mean_foreground_asd, after = run.adapted.mean_foreground_asd;
    asd_ok += before && after && *after <= *before;
  }
  const GainTally t = tally(so, ad);
  const bool gain_ok = t.improved >= kRequiredSeeds && !t.degraded;
  const bool budget_ok = st.cpu_seconds < kProtocolBudgetCpuSeconds;
  return {gap_ok && gain_ok && asd_ok >= kRequiredSeeds && budget_ok,
          fmt("(a) supervised gaps [%s] need >= %.2f: %s; (b) gains [%s], %d/5 >= %.2f, degradation %s: %s; "
              "(c) ASD not increased on %d/5: %s; %.0f CPU-s (<%.0f)",
              gaps.c_str(), kSupervisedGap, gap_ok ? "ok" : "no", t.gains.c_str(), t.improved, kRequiredGain,
              t.degraded ? "yes" : "no", gain_ok ? "ok" : "no", asd_ok, asd_ok >= kRequiredSeeds ? "ok" : "no",
              st.cpu_seconds, kProtocolBudgetCpuSeconds)};
}

Outcome ablation_harness() {
  ProtocolState& st = protocol();
  bool tables_ok = true;
  std::vector<double> so, ad;
  std::string missing;
  for (const auto& run : st.runs) {
    tools::AblationConfig cfg;
    cfg.reference = protocol_config().adapt;
    cfg.reference.seed = derive_seed(run.seed, {0x5eed, 2});
    cfg.reference_lr = run.sweep.best_lr;
    const std::uint64_t sum = run.source_model.checksum();
    const tools::AblationResult result = tools::run_ablation(run.source_model, run.data.target.train,
                                                             run.data.target.test, cfg);
    for (const auto& row : result.rows)
      check_frozen(st, fmt("seed %llu %s/%s", static_cast<unsigned long long>(run.seed), row.table.c_str(),
                               row.label.c_str()),
                   sum, run.source_model, row.report,
                   parameter_count(make_prompt(row.config, run.data.target.train.samples.front().image.height(),
                                                   run.data.target.train.samples.front().image.width(), 1)));
    const auto json = result.to_json();
    for (const char* table : {"size", "variant", "svp", "selection"})
      if (!json["tables"].contains(table) || json["tables"][table].empty()) {
        tables_ok = false;
        missing += std::string(" ") + table;
      }
    for (int r : {2, 4, 8, 16, 32, 64})
      if (!result.find("size", "r=" + std::to_string(r))) tables_ok = false, missing += fmt(" r=%d", r);
    for (const char* v : {"complex", "amplitude", "phase"})
      if (!result.find("variant", v)) tables_ok = false, missing += std::string(" ") + v;
    const tools::AblationRow* reference = result.find("variant", "complex");
    so.push_back(result.source_only.mean_foreground_dice);
    ad.push_back(reference ? reference->eval.mean_foreground_dice : 0.0);
    std::printf("  seed %llu ablation: %zu rows, complex/full %.3f vs source-only %.3f\n",
                static_cast<unsigned long long>(run.seed), result.rows.size(), ad.back(), so.back());
    std::fflush(stdout);
  }
  const GainTally t = tally(so, ad);
  const bool gain_ok = t.improved >= kRequiredSeeds && !t.degraded;
  return {tables_ok && gain_ok,
          fmt("tables %s%s; complex/full gains [%s], %d/5 >= %.2f, degradation %s", tables_ok ? "complete" : "missing:",
              missing.c_str(), t.gains.c_str(), t.improved, kRequiredGain, t.degraded ? "yes" : "no")};
}

Outcome frozen_model(const ProtocolState& st) {
  std::string failures;
  for (const auto& f : st.frozen_failures) failures += "; " + f;
  return {st.frozen_failures.empty() && st.adapt_runs_checked > 0,
          fmt("%d adapt runs checked%s", st.adapt_runs_checked, failures.c_str())};
}

Outcome metrics_oracle() {
  Rng rng(8);
  int dice_mismatch = 0, defined_mismatch = 0;
  double worst_asd = 0.0;
  for (int trial = 0; trial < kMetricTrials; ++trial) {
    const int H = 2 + static_cast<int>(rng.below(11)), W = 2 + static_cast<int>(rng.below(11));
    LabelGrid p(H, W, 1), g(H, W, 1);
    // Rectangles plus salt noise give connected regions with ragged boundaries.
    for (LabelGrid* y : {&p, &g}) {
      const int blobs = 1 + static_cast<int>(rng.below(3));
      for (int b = 0; b < blobs; ++b) {
        const auto c = static_cast<std::uint8_t>(1 + rng.below(2));
        const int h0 = static_cast<int>(rng.below(H)), w0 = static_cast<int>(rng.below(W));
        const int h1 = std::min(H, h0 + 1 + static_cast<int>(rng.below(H)));
        const int w1 = std::min(W, w0 + 1 + static_cast<int>(rng.below(W)));
        for (int h = h0; h < h1; ++h)
          for (int w = w0; w < w1; ++w) (*y)(h, w) = c;
      }
      for (auto& v : y->values())
        if (rng.below(8) == 0) v = static_cast<std::uint8_t>(rng.below(3));
    }
    for (int c = 0; c < 3; ++c) {
      dice_mismatch += dice(p, g, c) != oracle::brute_dice(p, g, c);
      const auto fast = asd(p, g, c), slow = oracle::brute_asd(p, g, c);
      if (fast.has_value() != slow.has_value()) ++defined_mismatch;
      else if (fast) worst_asd = std::max(worst_asd, std::abs(*fast - *slow));
    }
  }
  // Aggregated vs mean: a large perfect structure in one image, a single missed pixel in another.
  Dataset d;
  d.n_classes = 2;
  LabelGrid ga(4, 4, 1, 1), gb(4, 4, 1);
  gb(0, 0) = 1;
  d.samples.push_back({"a", RealGrid(4, 4, 1), ga});
  d.samples.push_back({"b", RealGrid(4, 4, 1), gb});
  const EvalReport r = score({ga, LabelGrid(4, 4, 1)}, d);
  const double per_image_mean = (dice(ga, ga, 1) + dice(LabelGrid(4, 4, 1), gb, 1)) / 2.0;
  const double pooled = 2.0 * 16.0 / 33.0;
  const bool counterexample = std::abs(r.dice[1] - pooled) < 1e-12 && std::abs(per_image_mean - 0.5) < 1e-12;
  return {dice_mismatch == 0 && defined_mismatch == 0 && worst_asd < kAsdTol && counterexample,
          fmt("dice mismatches %d, ASD definedness mismatches %d, ASD err %.2e (<%.0e), aggregated %.4f vs mean %.4f",
              dice_mismatch, defined_mismatch, worst_asd, kAsdTol, r.dice[1], per_image_mean)};
}

std::vector<std::uint8_t> tree_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, dir).string();
    all.insert(all.end(), rel.begin(), rel.end());
    const auto bytes = read_file(f);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return all;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("fvp_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::string failed;
  std::vector<std::vector<std::uint8_t>> trees;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path dir = root / std::to_string(pass);
    fs::create_directories(dir);
    const std::string d = (dir / "data").string(), m = (dir / "m.fvpw").string(), p = (dir / "p.fvpp").string();
    const std::vector<std::vector<std::string>> commands = {
        {"gen-data", "--out", d, "--seed", "9", "--size", "32", "--n-train", "6", "--n-test", "3"},
        {"pretrain", "--data", d + "/source", "--out", m, "--epochs", "3", "--seed", "9", "--report",
         (dir / "pretrain.json").string()},
        {"adapt", "--model", m, "--target", d + "/target", "--r", "8", "--epochs", "3", "--lr-sweep", "--seed", "9",
         "--out", p, "--report", (dir / "adapt.json").string()},
        {"eval", "--model", m, "--target", d + "/target", "--prompt", p, "--out", (dir / "eval.json").string()},
        {"ablate", "--model", m, "--target", d + "/target", "--r", "8", "--epochs", "2", "--sizes", "4", "8", "--pads",
         "4", "--seed", "9", "--out", (dir / "ablate.json").string()},
        {"render", "--model", m, "--target", d + "/target", "--prompt", p, "--noise-sim", "--r", "8", "--seed", "9",
         "--out", (dir / "render").string()},
    };
    for (auto args : commands) {
      args.insert(args.begin(), {"--threads", "1"});
      std::ostringstream out, err;
      if (tools::run(args, out, err) != tools::kExitOk) failed += " " + args[2] + " (" + err.str() + ")";
    }
    trees.push_back(tree_bytes(dir));
  }
  fs::remove_all(root);
  const bool same = trees[0] == trees[1];
  return {failed.empty() && same && !trees[0].empty(),
          fmt("gen-data, pretrain, adapt --lr-sweep, eval, ablate, render twice with --threads 1: %s%s",
              same ? "byte-identical" : "outputs differ", failed.empty() ? "" : (" failures:" + failed).c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"parameter accounting", parameter_accounting},
      {"FFT suite", fft_suite},
      {"gradient suite", gradient_suite},
      {"pseudo-label oracle", pseudo_label_oracle},
      {"desk-scale adaptation", desk_scale_adaptation},
      {"frozen-model guarantee", [] { return frozen_model(protocol()); }},
      {"ablation harness", ablation_harness},
      {"metrics oracle", metrics_oracle},
      {"determinism", determinism},
  };

  // The frozen-model check covers every adapt run, including the ablation rows, so it reports last.
  std::vector<int> order = {1, 2, 3, 4, 5, 7, 6, 8, 9};
  int failures = 0;
  for (int n : order) {
    if (!wanted(n)) continue;
    const auto& [name, check] = criteria[n - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(),
                wall_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

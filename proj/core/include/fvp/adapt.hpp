#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fvp/data.hpp"
#include "fvp/prompt.hpp"
#include "fvp/pseudo.hpp"
#include "fvp/segnet.hpp"

namespace fvp {

enum class PromptKind { kComplex, kAmplitude, kPhase, kSvp };

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view name);

struct AdaptConfig {
  PromptKind variant = PromptKind::kComplex;
  int r = 16;   // spectrum box size (spectrum variants)
  int pad = 8;  // border width (svp)
  SelectionConfig selection;
  double lr = 1.0;
  int epochs = 50;
  int batch_size = 8;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct AdaptReport {
  AdaptConfig config;
  std::vector<double> epoch_loss;  // mean per-image loss, measured during each epoch
  double selected_fraction = 0.0;  // share of target pixels kept by the selection
  std::size_t trainable_parameters = 0;
  std::uint64_t model_checksum = 0;
  std::uint64_t prompt_transforms = 0;  // 2D transforms spent building prompted inputs
  std::size_t batches = 0;
  double seconds = 0.0;
  std::vector<std::string> warnings;

  double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
  /// Wall-clock fields are opt-in so that reports stay byte-reproducible.
  std::string to_json(bool include_timings = false) const;
};

struct AdaptResult {
  AnyPrompt prompt = SpectrumPrompt(1, 1, PromptVariant::kComplex);
  AdaptReport report;
};

struct LossResult {
  double loss = 0.0;
  std::vector<RealGrid> grad_logits;
};

/// Selection-masked cross entropy summed over pixels and averaged over the batch, with the
/// exact gradient with respect to the logits.
LossResult seg_loss(std::span<const RealGrid> probs, std::span<const ReliableLabel> labels);
LossResult seg_loss(const RealGrid& probs, const ReliableLabel& label);

/// Zero-initialized prompt of the configured kind for H x W x C images.
AnyPrompt make_prompt(const AdaptConfig& cfg, int height, int width, int channels);

struct BatchGradient {
  double loss = 0.0;
  std::vector<double> grads;           // parameters() order
  std::uint64_t prompt_transforms = 0;  // FFT calls spent applying the prompt
};

/// Loss and prompt gradient for one batch. `base` holds standardized unprompted images;
/// the prompted images are standardized again before the model.
BatchGradient batch_gradient(const SegModel& model, const AnyPrompt& prompt, std::span<const RealGrid> base,
                             std::span<const ReliableLabel> labels, int threads = 1);

/// Learns a prompt for the frozen model from unlabeled target images (labels are ignored).
AdaptResult adapt(const SegModel& model, const Dataset& targets, const AdaptConfig& cfg);

struct SweepResult {
  double best_lr = 0.0;
  AdaptResult best;
  std::vector<std::pair<double, AdaptReport>> runs;
};

inline const std::vector<double> kDefaultLrGrid = {0.01, 0.1, 1.0};

/// Runs adapt() per learning rate and keeps the run with the lowest final pseudo-label loss.
SweepResult adapt_lr_sweep(const SegModel& model, const Dataset& targets, const AdaptConfig& cfg,
                           std::span<const double> lrs = kDefaultLrGrid);

}  // namespace fvp

#include "fvp/adapt.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "fvp/fft.hpp"
#include "fvp/optim.hpp"
#include "fvp/parallel.hpp"
#include "fvp/random.hpp"

namespace fvp {

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::kComplex: return "complex";
    case PromptKind::kAmplitude: return "amplitude";
    case PromptKind::kPhase: return "phase";
    case PromptKind::kSvp: return "svp";
  }
  return "unknown";
}

PromptKind parse_prompt_kind(std::string_view name) {
  if (name == "svp") return PromptKind::kSvp;
  switch (parse_variant(name)) {
    case PromptVariant::kComplex: return PromptKind::kComplex;
    case PromptVariant::kAmplitude: return PromptKind::kAmplitude;
    case PromptVariant::kPhase: return PromptKind::kPhase;
  }
  return PromptKind::kComplex;
}

void AdaptConfig::validate() const {
  require(lr > 0.0 && std::isfinite(lr), ErrorKind::kConfig, "learning rate must be > 0");
  require(epochs >= 0, ErrorKind::kConfig, "epochs must be >= 0");
  require(batch_size >= 1, ErrorKind::kConfig, "batch size must be >= 1");
  require(weight_decay >= 0.0, ErrorKind::kConfig, "weight decay must be >= 0");
  if (variant == PromptKind::kSvp) {
    require(pad >= 1, ErrorKind::kConfig, "svp pad width must be >= 1");
  } else {
    require(r >= 1, ErrorKind::kConfig, "prompt box size r must be >= 1");
  }
  selection.validate();
}

LossResult seg_loss(std::span<const RealGrid> probs, std::span<const ReliableLabel> labels) {
  require(probs.size() == labels.size() && !probs.empty(), ErrorKind::kShape,
          "seg_loss: one label per prediction required");
  LossResult out;
  const double inv_batch = 1.0 / static_cast<double>(probs.size());
  for (std::size_t b = 0; b < probs.size(); ++b) {
    const RealGrid& p = probs[b];
    const ReliableLabel& label = labels[b];
    require(label.y.height() == p.height() && label.y.width() == p.width() && label.n_classes == p.channels(),
            ErrorKind::kShape, "seg_loss: label and prediction shapes differ");
    RealGrid g(p.shape());
    const int C = p.channels();
    for (std::size_t px = 0; px < p.pixels(); ++px) {
      if (!label.mask[px]) continue;
      const int cls = label.y[px];
      const double py = p[px * C + cls];
      if (py < 1e-12) {
        // Clamped region: the loss term is constant there.
        out.loss += -std::log(1e-12) * inv_batch;
        continue;
      }
      out.loss += -std::log(py) * inv_batch;
      for (int c = 0; c < C; ++c) g[px * C + c] = (p[px * C + c] - (c == cls ? 1.0 : 0.0)) * inv_batch;
    }
    out.grad_logits.push_back(std::move(g));
  }
  return out;
}

LossResult seg_loss(const RealGrid& probs, const ReliableLabel& label) {
  return seg_loss(std::span(&probs, 1), std::span(&label, 1));
}

AnyPrompt make_prompt(const AdaptConfig& cfg, int height, int width, int channels) {
  switch (cfg.variant) {
    case PromptKind::kSvp: return SpatialPrompt(cfg.pad, height, width, channels);
    case PromptKind::kComplex: return SpectrumPrompt(cfg.r, channels, PromptVariant::kComplex);
    case PromptKind::kAmplitude: return SpectrumPrompt(cfg.r, channels, PromptVariant::kAmplitude);
    case PromptKind::kPhase: return SpectrumPrompt(cfg.r, channels, PromptVariant::kPhase);
  }
  fail(ErrorKind::kConfig, "unknown prompt kind");
}

BatchGradient batch_gradient(const SegModel& model, const AnyPrompt& prompt, std::span<const RealGrid> base,
                             std::span<const ReliableLabel> labels, int threads) {
  require(base.size() == labels.size() && !base.empty(), ErrorKind::kShape,
          "batch_gradient: one label per image required");
  const std::size_t B = base.size();
  const GridShape shape = base.front().shape();
  for (const RealGrid& x : base) require_same_shape(x.shape(), shape, "batch_gradient");
  std::vector<Standardized> second(B);
  std::vector<AmpPhase> spectra(B);
  BatchGradient out;

  const std::uint64_t transforms_before = transform_count();
  if (const auto* v = std::get_if<SpectrumPrompt>(&prompt)) {
    if (v->variant() == PromptVariant::kComplex) {
      const RealGrid delta = spatial_contribution(*v, shape.height, shape.width);
      for (std::size_t b = 0; b < B; ++b) second[b] = standardize(base[b] + delta);
    } else {
      for (std::size_t b = 0; b < B; ++b) {
        RealPromptResult r = apply_real_with_spectrum(base[b], *v);
        spectra[b] = std::move(r.source);
        second[b] = standardize(r.output);
      }
    }
  } else {
    const auto& s = std::get<SpatialPrompt>(prompt);
    for (std::size_t b = 0; b < B; ++b) second[b] = standardize(apply_svp(base[b], s));
  }
  out.prompt_transforms = transform_count() - transforms_before;

  std::vector<RealGrid> inputs(B);
  for (std::size_t b = 0; b < B; ++b) inputs[b] = second[b].output;
  ForwardResult fwd = forward(model, inputs, threads);
  std::vector<RealGrid> probs;
  probs.reserve(B);
  for (auto& o : fwd.outputs) probs.push_back(std::move(o.probs));
  LossResult loss = seg_loss(probs, labels);
  out.loss = loss.loss;

  const std::vector<RealGrid> grad_in = backward_input(model, fwd.cache, loss.grad_logits, threads);
  if (const auto* v = std::get_if<SpectrumPrompt>(&prompt)) {
    PromptGradient total{RealGrid(v->box(), v->box(), v->channels()), RealGrid(v->box(), v->box(), v->channels())};
    if (v->variant() == PromptVariant::kComplex) {
      // The prompt term is shared, so its gradient is the transform of the summed image gradients.
      RealGrid summed(shape);
      for (std::size_t b = 0; b < B; ++b) summed += second[b].backward(grad_in[b]);
      total = prompt_backward(*v, summed);
    } else {
      for (std::size_t b = 0; b < B; ++b) {
        const PromptGradient g = prompt_backward(*v, spectra[b], second[b].backward(grad_in[b]));
        total.real_part += g.real_part;
      }
    }
    remove_mean_mode(*v, total);
    out.grads = total.flatten(v->variant());
  } else {
    const auto& s = std::get<SpatialPrompt>(prompt);
    RealGrid summed(shape);
    for (std::size_t b = 0; b < B; ++b) summed += second[b].backward(grad_in[b]);
    out.grads = s.gather(summed);
  }
  return out;
}

AdaptResult adapt(const SegModel& model, const Dataset& targets, const AdaptConfig& cfg) {
  cfg.validate();
  require(model.mode == Mode::kEval, ErrorKind::kState, "adaptation needs a frozen (eval-mode) model");
  require(!targets.empty(), ErrorKind::kConfig, "adaptation needs at least one target image");
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t checksum_before = model.checksum();

  const GridShape shape = targets.samples.front().image.shape();
  for (const Sample& s : targets.samples) require_same_shape(s.image.shape(), shape, "adapt targets");
  const std::size_t N = targets.size();

  // Standardized unprompted inputs and their reliable labels, computed once per run.
  std::vector<RealGrid> base(N);
  std::vector<ReliableLabel> labels(N);
  parallel_for(N, cfg.threads, [&](std::size_t i) {
    base[i] = standardize(targets.samples[i].image).output;
    labels[i] = reliable_labels(predict(model, standardize(base[i]).output), cfg.selection);
  });

  AdaptResult result{make_prompt(cfg, shape.height, shape.width, shape.channels), {}};
  AdaptReport& report = result.report;
  report.config = cfg;
  report.trainable_parameters = parameter_count(result.prompt);
  double selected = 0.0;
  for (const auto& l : labels) selected += l.selected_fraction();
  report.selected_fraction = selected / static_cast<double>(N);
  if (report.selected_fraction == 0.0) {
    report.warnings.push_back("no target pixel survived pseudo-label selection; the prompt cannot learn");
  }

  AdamState adam(report.trainable_parameters);
  Rng rng(derive_seed(cfg.seed, {0xada9}));
  std::vector<std::size_t> order(N);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < N; first += cfg.batch_size) {
      const std::size_t B = std::min<std::size_t>(cfg.batch_size, N - first);
      std::vector<RealGrid> batch(B);
      std::vector<ReliableLabel> batch_labels(B);
      for (std::size_t b = 0; b < B; ++b) {
        batch[b] = base[order[first + b]];
        batch_labels[b] = labels[order[first + b]];
      }
      const BatchGradient step = batch_gradient(model, result.prompt, batch, batch_labels, cfg.threads);
      loss_sum += step.loss * static_cast<double>(B);
      report.prompt_transforms += step.prompt_transforms;
      ++report.batches;

      std::vector<double> params = parameters(result.prompt);
      require(step.grads.size() == params.size(), ErrorKind::kState, "optimizer would touch non-prompt parameters");
      adam_step(adam, params, step.grads, cfg.lr, cfg.weight_decay);
      set_parameters(result.prompt, params);
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(N));
  }

  report.model_checksum = model.checksum();
  require(report.model_checksum == checksum_before, ErrorKind::kState, "the frozen model changed during adaptation");
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

SweepResult adapt_lr_sweep(const SegModel& model, const Dataset& targets, const AdaptConfig& cfg,
                           std::span<const double> lrs) {
  require(!lrs.empty(), ErrorKind::kConfig, "learning-rate grid is empty");
  SweepResult sweep;
  bool have_best = false;
  for (double lr : lrs) {
    AdaptConfig run = cfg;
    run.lr = lr;
    AdaptResult r = adapt(model, targets, run);
    sweep.runs.emplace_back(lr, r.report);
    if (!have_best || r.report.final_loss() < sweep.best.report.final_loss()) {
      sweep.best = std::move(r);
      sweep.best_lr = lr;
      have_best = true;
    }
  }
  return sweep;
}

std::string AdaptReport::to_json(bool include_timings) const {
  nlohmann::json j = {
      {"config",
       {{"variant", to_string(config.variant)},
        {"r", config.r},
        {"pad", config.pad},
        {"lambda", config.selection.lambda},
        {"k", config.selection.k},
        {"use_global", config.selection.use_global},
        {"use_intra", config.selection.use_intra},
        {"use_prototype", config.selection.use_prototype},
        {"lr", config.lr},
        {"epochs", config.epochs},
        {"batch_size", config.batch_size},
        {"weight_decay", config.weight_decay},
        {"seed", config.seed}}},
      {"epoch_loss", epoch_loss},
      {"selected_fraction", selected_fraction},
      {"trainable_parameters", trainable_parameters},
      {"model_checksum", model_checksum},
      {"prompt_transforms", prompt_transforms},
      {"batches", batches},
      {"warnings", warnings},
  };
  if (include_timings) j["seconds"] = seconds;
  return j.dump(2);
}

}  // namespace fvp

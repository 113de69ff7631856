#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fvp/data.hpp"
#include "fvp/grid.hpp"

namespace fvp {

enum class Mode { kTrain, kEval };

struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  std::vector<double> weight;  // [out][in][ky][kx]
  std::vector<double> bias;    // empty for the backbone convolutions
};

struct BatchNorm {
  int channels = 0;
  std::vector<double> scale;
  std::vector<double> shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Fixed MiniSegNet: five 3x3 conv-BN-ReLU stages (16, 16/s2, 32, 32/s2, 32 channels)
/// form the backbone; its output is bilinearly upsampled x4 and a 1x1 conv head
/// produces per-pixel class logits.
struct SegModel {
  static constexpr int kStages = 5;
  static constexpr int kFeatureChannels = 32;
  static constexpr int kDownsample = 4;

  int in_channels = 1;
  int n_classes = 0;
  Mode mode = Mode::kEval;
  std::array<ConvLayer, kStages> convs;
  std::array<BatchNorm, kStages> norms;
  ConvLayer head;

  std::size_t parameter_count() const;
  /// Learnable values: per stage conv weight, BN scale, BN shift; then head weight, head bias.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);
  /// Hash over every weight and normalization statistic.
  std::uint64_t checksum() const;
  /// Rounds weights and normalization statistics to f32, their on-disk precision.
  void round_to_storage();
};

struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

std::vector<ParameterBlock> parameter_layout(const SegModel& m);

SegModel init_model(std::uint64_t seed, int n_classes, int in_channels = 1);

struct SegOutput {
  RealGrid probs;     // H x W x N_c, softmax over classes
  RealGrid logits;    // H x W x N_c
  RealGrid features;  // H x W x 32, upsampled backbone activation
};

/// Activations retained by a forward pass for the backward passes. Move-only.
class ForwardCache {
 public:
  ForwardCache();
  ~ForwardCache();
  ForwardCache(ForwardCache&&) noexcept;
  ForwardCache& operator=(ForwardCache&&) noexcept;

  struct Impl;
  Impl& impl() { return *impl_; }
  const Impl& impl() const { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

struct ForwardResult {
  std::vector<SegOutput> outputs;
  ForwardCache cache;
};

/// Eval-mode inference; never mutates the model.
ForwardResult forward(const SegModel& m, std::span<const RealGrid> batch, int threads = 1);
SegOutput predict(const SegModel& m, const RealGrid& x);

/// Train-mode pass: batch statistics, running statistics updated.
ForwardResult forward_train(SegModel& m, std::span<const RealGrid> batch, int threads = 1);

/// dL/dx for each batch item given dL/dlogits. Eval-mode caches only.
std::vector<RealGrid> backward_input(const SegModel& m, const ForwardCache& cache,
                                     std::span<const RealGrid> grad_logits, int threads = 1);

/// dL/dtheta in parameters() order, summed over the batch. Train-mode caches only.
std::vector<double> backward_weights(const SegModel& m, const ForwardCache& cache,
                                     std::span<const RealGrid> grad_logits, int threads = 1);

struct TrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct TrainHistory {
  std::vector<double> epoch_loss;
  double seconds = 0.0;
};

struct TrainResult {
  SegModel model;
  TrainHistory history;
};

/// Supervised training with per-pixel cross entropy (mean over pixels and batch) and Adam.
/// Returns the model in eval mode, rounded to storage precision.
TrainResult train_source(const Dataset& data, const TrainConfig& cfg);

// "FVPW": magic, u16 version, u16 N_c, then per-layer records.
std::vector<std::uint8_t> encode_model(const SegModel& m);
SegModel decode_model(std::span<const std::uint8_t> bytes, const std::string& context = "FVPW");
void save_model(const SegModel& m, const std::filesystem::path& path);
SegModel load_model(const std::filesystem::path& path);

}  // namespace fvp

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fvp/grid.hpp"

namespace fvp {

struct Sample {
  std::string id;
  RealGrid image;
  LabelGrid label;
};

struct Dataset {
  int n_classes = 0;
  std::vector<Sample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
};

/// Per-domain appearance model applied on top of the shared geometry.
struct ShiftProfile {
  std::vector<double> class_intensity;  // mean intensity per class id
  double gamma = 1.0;                   // applied to intensities normalized by the largest class value
  double shared_bias = 0.0;             // log-amplitude of the domain-wide bias field
  double sample_bias = 0.0;             // log-amplitude of the per-image bias field
  int bias_frequency = 2;               // highest spatial frequency (cycles per image) in bias fields
  double texture_sigma = 0.0;           // smooth per-class texture amplitude
  double noise_sigma = 0.0;             // white noise standard deviation
  double edge_blur = 1.0;               // gaussian sigma (pixels) softening structure edges
};

struct GeneratorConfig {
  int size = 64;
  int channels = 1;
  int n_classes = 4;
  int n_train = 40;
  int n_test = 10;
  ShiftProfile source;
  ShiftProfile target;

  /// Desk-scale defaults: 64x64, 4 classes, 40/10 images per domain.
  static GeneratorConfig defaults();
  void validate() const;
};

struct DomainData {
  Dataset train;
  Dataset test;
};

struct SyntheticBenchmark {
  DomainData source;
  DomainData target;
};

/// Deterministic in-memory synthesis; source and target share geometry sample by sample.
SyntheticBenchmark synthesize(const GeneratorConfig& cfg, std::uint64_t seed);

LabelGrid render_geometry(const GeneratorConfig& cfg, std::uint64_t geometry_seed);
RealGrid render_image(const GeneratorConfig& cfg, const ShiftProfile& profile, const LabelGrid& label,
                      std::uint64_t domain_seed, std::uint64_t sample_seed);

struct ManifestEntry {
  std::string id;
  std::string image;  // relative to the manifest directory
  std::string label;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::string domain;  // "source" | "target"
  int height = 0;
  int width = 0;
  int channels = 0;
  int n_classes = 0;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
};

inline constexpr const char* kManifestName = "manifest.json";

/// Writes <root>/source and <root>/target, each holding train/, test/ and manifest.json.
std::pair<DatasetManifest, DatasetManifest> generate(const GeneratorConfig& cfg, std::uint64_t seed,
                                                     const std::filesystem::path& root);

void save_manifest(const DatasetManifest& manifest);
/// Accepts either the manifest file itself or the directory containing it.
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Loads a split ("train" or "test"), validating labels against the manifest class count.
Dataset load_split(const DatasetManifest& manifest, const std::string& split);

struct Standardized {
  RealGrid output;
  double mean = 0.0;
  double inv_std = 0.0;

  /// Maps dL/d(output) to dL/d(input).
  RealGrid backward(const RealGrid& grad_output) const;
};

inline constexpr double kStandardizeEps = 1e-8;

/// (x - mean) / sqrt(var + eps) over all H*W*C values.
Standardized standardize(const RealGrid& x);

// "FVPI": magic, u16 version, u32 H, u32 W, u16 C, f32 pixels.
void save_grid(const std::filesystem::path& path, const RealGrid& x);
RealGrid load_grid(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_grid(const RealGrid& x);
RealGrid decode_grid(std::span<const std::uint8_t> bytes, const std::string& context = "FVPI");

// "FVPL": magic, u16 version, u32 H, u32 W, u8 class ids.
void save_label(const std::filesystem::path& path, const LabelGrid& y);
LabelGrid load_label(const std::filesystem::path& path, int n_classes);
std::vector<std::uint8_t> encode_label(const LabelGrid& y);
LabelGrid decode_label(std::span<const std::uint8_t> bytes, int n_classes,
                       const std::string& context = "FVPL");

}  // namespace fvp

#include "fvp/data.hpp"

#include <cmath>
#include <cstdio>
#include <iterator>
#include <numbers>

#include <json.hpp>

#include "fvp/binary_io.hpp"
#include "fvp/random.hpp"

namespace fvp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

namespace {

constexpr std::uint16_t kGridVersion = 1;
constexpr std::uint16_t kLabelVersion = 1;

enum Stream : std::uint64_t { kGeometry = 1, kDomainField = 2, kSampleAppearance = 3 };

// Smooth field: sum of random low-frequency cosines, scaled to unit peak magnitude.
RealGrid smooth_field(int size, int max_frequency, Rng& rng) {
  RealGrid f(size, size, 1);
  const int terms = 6;
  for (int t = 0; t < terms; ++t) {
    const double fy = rng.uniform(-max_frequency, max_frequency);
    const double fx = rng.uniform(-max_frequency, max_frequency);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(0.5, 1.0);
    for (int h = 0; h < size; ++h)
      for (int w = 0; w < size; ++w)
        f(h, w) += amp * std::cos(2.0 * std::numbers::pi * (fy * h + fx * w) / size + phase);
  }
  double peak = 0.0;
  for (double v : f.values()) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : f.values()) v /= peak;
  return f;
}

RealGrid gaussian_blur(const RealGrid& x, double sigma) {
  if (sigma <= 0.0) return x;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;
  const int H = x.height(), W = x.width();
  auto clamp = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
  RealGrid tmp(x.shape()), out(x.shape());
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w)
      for (int c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * x(h, clamp(w + i, W), c);
        tmp(h, w, c) = acc;
      }
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w)
      for (int c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(clamp(h + i, H), w, c);
        out(h, w, c) = acc;
      }
  return out;
}

void paint_ellipse(LabelGrid& y, std::uint8_t cls, double cy, double cx, double ry, double rx,
                   double angle) {
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int h = 0; h < y.height(); ++h)
    for (int w = 0; w < y.width(); ++w) {
      const double dy = h + 0.5 - cy, dx = w + 0.5 - cx;
      const double u = (dx * ca + dy * sa) / rx;
      const double v = (-dx * sa + dy * ca) / ry;
      if (u * u + v * v <= 1.0) y(h, w) = cls;
    }
}

nlohmann::json entries_to_json(const std::vector<ManifestEntry>& entries) {
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back({{"id", e.id}, {"image", e.image}, {"label", e.label}});
  return arr;
}

std::vector<ManifestEntry> entries_from_json(const nlohmann::json& arr) {
  std::vector<ManifestEntry> out;
  for (const auto& e : arr) {
    out.push_back({e.at("id").get<std::string>(), e.at("image").get<std::string>(),
                   e.at("label").get<std::string>()});
  }
  return out;
}

}  // namespace

GeneratorConfig GeneratorConfig::defaults() {
  GeneratorConfig cfg;
  cfg.source.class_intensity = {0.20, 0.55, 0.75, 0.95};
  cfg.source.gamma = 1.0;
  cfg.source.shared_bias = 0.0;
  cfg.source.sample_bias = 0.05;
  cfg.source.bias_frequency = 2;
  cfg.source.texture_sigma = 0.02;
  cfg.source.noise_sigma = 0.03;
  cfg.source.edge_blur = 1.0;

  cfg.target.class_intensity = {0.60, 1.30, 1.50, 1.80};
  cfg.target.gamma = 1.6;
  cfg.target.shared_bias = 0.80;
  cfg.target.sample_bias = 0.05;
  cfg.target.bias_frequency = 3;
  cfg.target.texture_sigma = 0.03;
  cfg.target.noise_sigma = 0.03;
  cfg.target.edge_blur = 1.0;
  return cfg;
}

void GeneratorConfig::validate() const {
  require(size >= 4 && size % 4 == 0, ErrorKind::kConfig, "image size must be a positive multiple of 4");
  require(n_classes >= 2 && n_classes <= 255, ErrorKind::kConfig, "n_classes must be in [2, 255]");
  require(channels >= 1, ErrorKind::kConfig, "channels must be >= 1");
  require(n_train >= 0 && n_test >= 0, ErrorKind::kConfig, "split sizes must be non-negative");
  for (const ShiftProfile* p : {&source, &target}) {
    require(static_cast<int>(p->class_intensity.size()) == n_classes, ErrorKind::kConfig,
            "class_intensity needs one entry per class");
    require(p->gamma > 0.0, ErrorKind::kConfig, "gamma must be positive");
    for (double v : p->class_intensity)
      require(v >= 0.0 && std::isfinite(v), ErrorKind::kConfig, "class intensities must be finite and >= 0");
  }
}

LabelGrid render_geometry(const GeneratorConfig& cfg, std::uint64_t geometry_seed) {
  // Canonical layout (fractions of the image side) shared by every sample: one large organ,
  // a mid-sized structure beside it and a small lesion overlapping the organ. Each sample
  // jitters position, size and orientation.
  struct Placement {
    double cy, cx, ry, rx, angle;
  };
  static constexpr Placement kLayout[] = {
      {0.50, 0.40, 0.22, 0.16, 0.3},
      {0.42, 0.70, 0.11, 0.09, -0.4},
      {0.62, 0.36, 0.08, 0.07, 1.0},
  };
  Rng rng(geometry_seed);
  const double n = cfg.size;
  LabelGrid y(cfg.size, cfg.size, 1, 0);
  for (int c = 1; c < cfg.n_classes; ++c) {
    double cy, cx, ry, rx, angle;
    if (c <= static_cast<int>(std::size(kLayout))) {
      const Placement& p = kLayout[c - 1];
      cy = (p.cy + rng.uniform(-0.06, 0.06)) * n;
      cx = (p.cx + rng.uniform(-0.06, 0.06)) * n;
      ry = p.ry * rng.uniform(0.85, 1.15) * n;
      rx = p.rx * rng.uniform(0.85, 1.15) * n;
      angle = p.angle + rng.uniform(-0.3, 0.3);
    } else {
      // Classes beyond the canonical layout are small blobs placed anywhere in the middle.
      ry = rng.uniform(0.05, 0.10) * n;
      rx = rng.uniform(0.05, 0.10) * n;
      cy = rng.uniform(0.25, 0.75) * n;
      cx = rng.uniform(0.25, 0.75) * n;
      angle = rng.uniform(0.0, std::numbers::pi);
    }
    paint_ellipse(y, static_cast<std::uint8_t>(c), cy, cx, ry, rx, angle);
  }
  return y;
}

RealGrid render_image(const GeneratorConfig& cfg, const ShiftProfile& profile, const LabelGrid& label,
                      std::uint64_t domain_seed, std::uint64_t sample_seed) {
  const int S = cfg.size;
  Rng domain_rng(domain_seed);
  Rng rng(sample_seed);
  const RealGrid shared = smooth_field(S, profile.bias_frequency, domain_rng);
  const RealGrid own = smooth_field(S, profile.bias_frequency, rng);

  double peak = 0.0;
  for (double v : profile.class_intensity) peak = std::max(peak, v);
  if (peak <= 0.0) peak = 1.0;

  RealGrid out(S, S, cfg.channels);
  for (int ch = 0; ch < cfg.channels; ++ch) {
    RealGrid base(S, S, 1);
    std::vector<RealGrid> textures;
    for (int c = 0; c < cfg.n_classes; ++c) textures.push_back(smooth_field(S, 6, rng));
    for (int h = 0; h < S; ++h)
      for (int w = 0; w < S; ++w) {
        const int c = label(h, w);
        base(h, w) = profile.class_intensity[c] + profile.texture_sigma * textures[c](h, w);
      }
    base = gaussian_blur(base, profile.edge_blur);
    for (int h = 0; h < S; ++h)
      for (int w = 0; w < S; ++w) {
        const double normalized = std::max(base(h, w), 0.0) / peak;
        const double toned = peak * std::pow(normalized, profile.gamma);
        const double bias = std::exp(profile.shared_bias * shared(h, w) + profile.sample_bias * own(h, w));
        const double v = toned * bias + profile.noise_sigma * rng.normal();
        // Pixels are stored as f32 on disk; keep memory and file bit-identical.
        out(h, w, ch) = static_cast<double>(static_cast<float>(v));
      }
  }
  return out;
}

SyntheticBenchmark synthesize(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SyntheticBenchmark bench;
  bench.source.train.n_classes = bench.source.test.n_classes = cfg.n_classes;
  bench.target.train.n_classes = bench.target.test.n_classes = cfg.n_classes;
  const std::uint64_t source_domain = derive_seed(seed, {kDomainField, 0});
  const std::uint64_t target_domain = derive_seed(seed, {kDomainField, 1});
  auto build = [&](int split, int count, Dataset& src, Dataset& tgt) {
    for (int i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%03d", split == 0 ? "train" : "test", i);
      const LabelGrid label = render_geometry(cfg, derive_seed(seed, {kGeometry, std::uint64_t(split), std::uint64_t(i)}));
      src.samples.push_back({id, render_image(cfg, cfg.source, label, source_domain,
                                              derive_seed(seed, {kSampleAppearance, 0, std::uint64_t(split), std::uint64_t(i)})),
                             label});
      tgt.samples.push_back({id, render_image(cfg, cfg.target, label, target_domain,
                                              derive_seed(seed, {kSampleAppearance, 1, std::uint64_t(split), std::uint64_t(i)})),
                             label});
    }
  };
  build(0, cfg.n_train, bench.source.train, bench.target.train);
  build(1, cfg.n_test, bench.source.test, bench.target.test);
  return bench;
}

std::pair<DatasetManifest, DatasetManifest> generate(const GeneratorConfig& cfg, std::uint64_t seed,
                                                     const std::filesystem::path& root) {
  const SyntheticBenchmark bench = synthesize(cfg, seed);
  auto write_domain = [&](const std::string& domain, const DomainData& data) {
    DatasetManifest m;
    m.root = root / domain;
    m.domain = domain;
    m.height = m.width = cfg.size;
    m.channels = cfg.channels;
    m.n_classes = cfg.n_classes;
    m.seed = seed;
    for (const auto& [split, set, list] :
         {std::tuple{std::string("train"), &data.train, &m.train}, std::tuple{std::string("test"), &data.test, &m.test}}) {
      for (const Sample& s : set->samples) {
        ManifestEntry e{s.id, split + "/" + s.id + ".fvpi", split + "/" + s.id + ".fvpl"};
        save_grid(m.root / e.image, s.image);
        save_label(m.root / e.label, s.label);
        list->push_back(e);
      }
    }
    save_manifest(m);
    return m;
  };
  return {write_domain("source", bench.source), write_domain("target", bench.target)};
}

void save_manifest(const DatasetManifest& m) {
  nlohmann::json j = {
      {"format", "fvp-manifest"},
      {"version", 1},
      {"domain", m.domain},
      {"height", m.height},
      {"width", m.width},
      {"channels", m.channels},
      {"n_classes", m.n_classes},
      {"seed", m.seed},
      {"splits", {{"train", entries_to_json(m.train)}, {"test", entries_to_json(m.test)}}},
  };
  write_text(m.root / kManifestName, j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::filesystem::path file = path;
  if (std::filesystem::is_directory(path)) file = path / kManifestName;
  if (!std::filesystem::exists(file)) fail(ErrorKind::kIo, "manifest not found: " + file.string());
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(read_text(file));
    if (j.at("format").get<std::string>() != "fvp-manifest")
      fail(ErrorKind::kFormat, file.string() + ": not an fvp manifest");
    m.root = file.parent_path();
    m.domain = j.at("domain").get<std::string>();
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    m.channels = j.at("channels").get<int>();
    m.n_classes = j.at("n_classes").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train = entries_from_json(j.at("splits").at("train"));
    m.test = entries_from_json(j.at("splits").at("test"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, file.string() + ": " + e.what());
  }
  return m;
}

Dataset load_split(const DatasetManifest& m, const std::string& split) {
  require(split == "train" || split == "test", ErrorKind::kConfig, "unknown split '" + split + "'");
  const auto& entries = split == "train" ? m.train : m.test;
  Dataset d;
  d.n_classes = m.n_classes;
  for (const auto& e : entries) {
    Sample s{e.id, load_grid(m.root / e.image), load_label(m.root / e.label, m.n_classes)};
    require(s.image.height() == m.height && s.image.width() == m.width && s.image.channels() == m.channels,
            ErrorKind::kFormat, e.image + ": shape disagrees with manifest");
    require(s.label.height() == m.height && s.label.width() == m.width, ErrorKind::kFormat,
            e.label + ": shape disagrees with manifest");
    d.samples.push_back(std::move(s));
  }
  return d;
}

Standardized standardize(const RealGrid& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x.values()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x.values()) var += (v - mean) * (v - mean);
  var /= n;
  Standardized s{RealGrid(x.shape()), mean, 1.0 / std::sqrt(var + kStandardizeEps)};
  for (std::size_t i = 0; i < x.size(); ++i) s.output[i] = (x[i] - mean) * s.inv_std;
  return s;
}

RealGrid Standardized::backward(const RealGrid& grad_output) const {
  require_same_shape(grad_output.shape(), output.shape(), "standardize backward");
  const double n = static_cast<double>(output.size());
  double mean_g = 0.0, mean_gy = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    mean_g += grad_output[i];
    mean_gy += grad_output[i] * output[i];
  }
  mean_g /= n;
  mean_gy /= n;
  RealGrid grad(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i)
    grad[i] = inv_std * (grad_output[i] - mean_g - output[i] * mean_gy);
  return grad;
}

std::vector<std::uint8_t> encode_grid(const RealGrid& x) {
  ByteWriter out;
  out.magic("FVPI");
  out.u16(kGridVersion);
  out.u32(static_cast<std::uint32_t>(x.height()));
  out.u32(static_cast<std::uint32_t>(x.width()));
  out.u16(static_cast<std::uint16_t>(x.channels()));
  for (double v : x.values()) out.f32(static_cast<float>(v));
  return out.buffer();
}

RealGrid decode_grid(std::span<const std::uint8_t> bytes, const std::string& context) {
  ByteReader in(bytes, context);
  in.expect_magic("FVPI");
  const auto version = in.u16();
  require(version == kGridVersion, ErrorKind::kFormat, context + ": unsupported version " + std::to_string(version));
  const auto H = in.u32(), W = in.u32();
  const auto C = in.u16();
  require(H > 0 && W > 0 && C > 0 && H < (1u << 16) && W < (1u << 16), ErrorKind::kFormat,
          context + ": implausible dimensions");
  const std::size_t n = std::size_t(H) * W * C;
  require(in.remaining() == n * 4, ErrorKind::kFormat, context + ": payload size mismatch (truncated or padded)");
  RealGrid x(static_cast<int>(H), static_cast<int>(W), C);
  for (std::size_t i = 0; i < n; ++i) x[i] = in.f32();
  return x;
}

void save_grid(const std::filesystem::path& path, const RealGrid& x) { write_file(path, encode_grid(x)); }
RealGrid load_grid(const std::filesystem::path& path) { return decode_grid(read_file(path), path.string()); }

std::vector<std::uint8_t> encode_label(const LabelGrid& y) {
  require(y.channels() == 1, ErrorKind::kShape, "label grids are single-channel");
  ByteWriter out;
  out.magic("FVPL");
  out.u16(kLabelVersion);
  out.u32(static_cast<std::uint32_t>(y.height()));
  out.u32(static_cast<std::uint32_t>(y.width()));
  out.bytes(y.values());
  return out.buffer();
}

LabelGrid decode_label(std::span<const std::uint8_t> bytes, int n_classes, const std::string& context) {
  ByteReader in(bytes, context);
  in.expect_magic("FVPL");
  const auto version = in.u16();
  require(version == kLabelVersion, ErrorKind::kFormat, context + ": unsupported version " + std::to_string(version));
  const auto H = in.u32(), W = in.u32();
  require(H > 0 && W > 0 && H < (1u << 16) && W < (1u << 16), ErrorKind::kFormat, context + ": implausible dimensions");
  require(in.remaining() == std::size_t(H) * W, ErrorKind::kFormat, context + ": payload size mismatch (truncated or padded)");
  LabelGrid y(static_cast<int>(H), static_cast<int>(W), 1);
  auto payload = in.bytes(std::size_t(H) * W);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (payload[i] >= n_classes) {
      fail(ErrorKind::kFormat, context + ": label value " + std::to_string(payload[i]) + " >= class count " +
                                   std::to_string(n_classes));
    }
    y[i] = payload[i];
  }
  return y;
}

void save_label(const std::filesystem::path& path, const LabelGrid& y) { write_file(path, encode_label(y)); }
LabelGrid load_label(const std::filesystem::path& path, int n_classes) {
  return decode_label(read_file(path), n_classes, path.string());
}

}  // namespace fvp

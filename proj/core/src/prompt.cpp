#include "fvp/prompt.hpp"

#include <algorithm>
#include <cmath>

#include "fvp/binary_io.hpp"

namespace fvp {
namespace {

constexpr std::uint16_t kPromptVersion = 1;
constexpr std::uint8_t kSpatialTag = 3;

// Original (DC-at-origin) index of box row i along an axis of length n.
int box_to_origin(int i, int n, int r) { return ((i - r / 2) % n + n) % n; }

}  // namespace

std::string_view to_string(PromptVariant variant) {
  switch (variant) {
    case PromptVariant::kComplex: return "complex";
    case PromptVariant::kAmplitude: return "amplitude";
    case PromptVariant::kPhase: return "phase";
  }
  return "unknown";
}

PromptVariant parse_variant(std::string_view name) {
  if (name == "complex") return PromptVariant::kComplex;
  if (name == "amplitude") return PromptVariant::kAmplitude;
  if (name == "phase") return PromptVariant::kPhase;
  fail(ErrorKind::kConfig, "unknown prompt variant '" + std::string(name) + "'");
}

int box_begin(int n, int r) { return n / 2 - r / 2; }

SpectrumPrompt::SpectrumPrompt(int r, int channels, PromptVariant variant) : r_(r), variant_(variant) {
  require(r >= 1, ErrorKind::kConfig, "prompt box size r must be >= 1");
  require(channels >= 1, ErrorKind::kConfig, "prompt channel count must be >= 1");
  real_ = RealGrid(r, r, channels);
  imag_ = RealGrid(r, r, channels);
}

std::size_t SpectrumPrompt::parameter_count() const {
  return (variant_ == PromptVariant::kComplex ? 2 : 1) * real_.size();
}

std::vector<double> SpectrumPrompt::parameters() const {
  std::vector<double> out(real_.values().begin(), real_.values().end());
  if (variant_ == PromptVariant::kComplex) out.insert(out.end(), imag_.values().begin(), imag_.values().end());
  return out;
}

void SpectrumPrompt::set_parameters(std::span<const double> values) {
  require(values.size() == parameter_count(), ErrorKind::kShape, "prompt parameter count mismatch");
  std::copy_n(values.begin(), real_.size(), real_.values().begin());
  if (variant_ == PromptVariant::kComplex) {
    std::copy_n(values.begin() + real_.size(), imag_.size(), imag_.values().begin());
  } else {
    imag_.fill(0.0);
  }
}

void SpectrumPrompt::require_fits(int height, int width) const {
  if (r_ > std::min(height, width)) {
    fail(ErrorKind::kShape, "prompt box r=" + std::to_string(r_) + " exceeds image size " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
}

std::vector<double> PromptGradient::flatten(PromptVariant variant) const {
  std::vector<double> out(real_part.values().begin(), real_part.values().end());
  if (variant == PromptVariant::kComplex)
    out.insert(out.end(), imag_part.values().begin(), imag_part.values().end());
  return out;
}

ComplexGrid embed_prompt(const SpectrumPrompt& v, int height, int width) {
  v.require_fits(height, width);
  const int r = v.box(), C = v.channels();
  ComplexGrid out(height, width, C);
  for (int i = 0; i < r; ++i) {
    const int u = box_to_origin(i, height, r);
    for (int j = 0; j < r; ++j) {
      const int q = box_to_origin(j, width, r);
      for (int c = 0; c < C; ++c) out(u, q, c) = Complex(v.real_part()(i, j, c), v.imag_part()(i, j, c));
    }
  }
  return out;
}

RealGrid spatial_contribution(const SpectrumPrompt& v, int height, int width) {
  return real_part(ifft2(embed_prompt(v, height, width)));
}

RealGrid apply_complex(const RealGrid& x, const SpectrumPrompt& v) {
  require(v.variant() == PromptVariant::kComplex, ErrorKind::kConfig, "apply_complex needs a complex prompt");
  require(x.channels() == v.channels(), ErrorKind::kShape, "prompt/image channel mismatch");
  return x + spatial_contribution(v, x.height(), x.width());
}

RealPromptResult apply_real_with_spectrum(const RealGrid& x, const SpectrumPrompt& v) {
  require(v.variant() != PromptVariant::kComplex, ErrorKind::kConfig,
          "apply_real needs an amplitude or phase prompt");
  require(x.channels() == v.channels(), ErrorKind::kShape, "prompt/image channel mismatch");
  v.require_fits(x.height(), x.width());
  RealPromptResult result{RealGrid(), amp_phase_split(fft2(x))};
  AmpPhase modified = result.source;
  RealGrid& target = v.variant() == PromptVariant::kAmplitude ? modified.amplitude : modified.phase;
  const int r = v.box();
  for (int i = 0; i < r; ++i) {
    const int u = box_to_origin(i, x.height(), r);
    for (int j = 0; j < r; ++j) {
      const int q = box_to_origin(j, x.width(), r);
      for (int c = 0; c < x.channels(); ++c) target(u, q, c) += v.real_part()(i, j, c);
    }
  }
  result.output = real_part(ifft2(amp_phase_merge(modified)));
  return result;
}

RealGrid apply_real(const RealGrid& x, const SpectrumPrompt& v, SpectralComponent component) {
  const PromptVariant expected =
      component == SpectralComponent::kAmplitude ? PromptVariant::kAmplitude : PromptVariant::kPhase;
  require(v.variant() == expected, ErrorKind::kConfig, "prompt variant does not match the spectral component");
  return apply_real_with_spectrum(x, v).output;
}

PromptGradient prompt_backward(const SpectrumPrompt& v, const RealGrid& grad_xhat) {
  require(v.variant() == PromptVariant::kComplex, ErrorKind::kConfig,
          "real-variant prompts need the source spectrum for their gradient");
  require(grad_xhat.channels() == v.channels(), ErrorKind::kShape, "gradient/prompt channel mismatch");
  v.require_fits(grad_xhat.height(), grad_xhat.width());
  require_finite(grad_xhat, "prompt_backward");
  const ComplexGrid G = fft2(grad_xhat);
  const double inv_n = 1.0 / static_cast<double>(grad_xhat.pixels());
  const int r = v.box();
  PromptGradient g{RealGrid(r, r, v.channels()), RealGrid(r, r, v.channels())};
  for (int i = 0; i < r; ++i) {
    const int u = box_to_origin(i, grad_xhat.height(), r);
    for (int j = 0; j < r; ++j) {
      const int q = box_to_origin(j, grad_xhat.width(), r);
      for (int c = 0; c < v.channels(); ++c) {
        g.real_part(i, j, c) = G(u, q, c).real() * inv_n;
        g.imag_part(i, j, c) = G(u, q, c).imag() * inv_n;
      }
    }
  }
  return g;
}

PromptGradient prompt_backward(const SpectrumPrompt& v, const AmpPhase& source, const RealGrid& grad_xhat) {
  if (v.variant() == PromptVariant::kComplex) return prompt_backward(v, grad_xhat);
  require_same_shape(source.amplitude.shape(), grad_xhat.shape(), "prompt_backward");
  v.require_fits(grad_xhat.height(), grad_xhat.width());
  require_finite(grad_xhat, "prompt_backward");
  const ComplexGrid G = fft2(grad_xhat);
  const double inv_n = 1.0 / static_cast<double>(grad_xhat.pixels());
  const int r = v.box();
  PromptGradient g{RealGrid(r, r, v.channels()), RealGrid(r, r, v.channels())};
  for (int i = 0; i < r; ++i) {
    const int u = box_to_origin(i, grad_xhat.height(), r);
    for (int j = 0; j < r; ++j) {
      const int q = box_to_origin(j, grad_xhat.width(), r);
      for (int c = 0; c < v.channels(); ++c) {
        const double phi = source.phase(u, q, c);
        const Complex rot(std::cos(phi), std::sin(phi));
        Complex d;
        if (v.variant() == PromptVariant::kAmplitude) {
          d = rot;  // d X'/d v = e^{i phi}
        } else {
          const double amp = source.amplitude(u, q, c);
          const double theta = phi + v.real_part()(i, j, c);
          d = Complex(0.0, 1.0) * amp * Complex(std::cos(theta), std::sin(theta));  // i X'
        }
        g.real_part(i, j, c) = (d * std::conj(G(u, q, c))).real() * inv_n;
      }
    }
  }
  return g;
}

PromptGradient prompt_backward(const SpectrumPrompt& v, const RealGrid& x, const RealGrid& grad_xhat) {
  if (v.variant() == PromptVariant::kComplex) return prompt_backward(v, grad_xhat);
  require_same_shape(x.shape(), grad_xhat.shape(), "prompt_backward");
  return prompt_backward(v, amp_phase_split(fft2(x)), grad_xhat);
}

void remove_mean_mode(const SpectrumPrompt& v, PromptGradient& g) {
  const int dc = v.box() / 2;
  for (RealGrid* part : {&g.real_part, &g.imag_part}) {
    double mean = 0.0;
    for (int c = 0; c < v.channels(); ++c) mean += (*part)(dc, dc, c);
    mean /= v.channels();
    for (int c = 0; c < v.channels(); ++c) (*part)(dc, dc, c) -= mean;
  }
}

SpatialPrompt::SpatialPrompt(int pad, int height, int width, int channels)
    : pad_(pad), values_(height, width, channels) {
  require(pad >= 1, ErrorKind::kConfig, "spatial prompt pad width must be >= 1");
  require(height >= 1 && width >= 1 && channels >= 1, ErrorKind::kConfig, "spatial prompt needs a positive shape");
}

bool SpatialPrompt::learnable(int h, int w) const {
  return h < pad_ || w < pad_ || h >= values_.height() - pad_ || w >= values_.width() - pad_;
}

std::size_t SpatialPrompt::parameter_count() const {
  const std::size_t H = values_.height(), W = values_.width();
  const std::size_t ih = std::max(0, values_.height() - 2 * pad_);
  const std::size_t iw = std::max(0, values_.width() - 2 * pad_);
  return values_.channels() * (H * W - ih * iw);
}

std::vector<double> SpatialPrompt::gather(const RealGrid& full) const {
  require_same_shape(full.shape(), values_.shape(), "spatial prompt gather");
  std::vector<double> out;
  out.reserve(parameter_count());
  for (int h = 0; h < full.height(); ++h)
    for (int w = 0; w < full.width(); ++w)
      if (learnable(h, w))
        for (int c = 0; c < full.channels(); ++c) out.push_back(full(h, w, c));
  return out;
}

std::vector<double> SpatialPrompt::parameters() const { return gather(values_); }

void SpatialPrompt::set_parameters(std::span<const double> values) {
  require(values.size() == parameter_count(), ErrorKind::kShape, "spatial prompt parameter count mismatch");
  std::size_t k = 0;
  for (int h = 0; h < values_.height(); ++h)
    for (int w = 0; w < values_.width(); ++w)
      if (learnable(h, w))
        for (int c = 0; c < values_.channels(); ++c) values_(h, w, c) = values[k++];
}

RealGrid apply_svp(const RealGrid& x, const SpatialPrompt& s) {
  require_same_shape(x.shape(), s.shape(), "apply_svp");
  return x + s.values();
}

RealGrid apply_prompt(const RealGrid& x, const AnyPrompt& prompt) {
  if (const auto* s = std::get_if<SpatialPrompt>(&prompt)) return apply_svp(x, *s);
  const auto& v = std::get<SpectrumPrompt>(prompt);
  if (v.variant() == PromptVariant::kComplex) return apply_complex(x, v);
  return apply_real_with_spectrum(x, v).output;
}

std::size_t parameter_count(const AnyPrompt& prompt) {
  return std::visit([](const auto& p) { return p.parameter_count(); }, prompt);
}

std::vector<double> parameters(const AnyPrompt& prompt) {
  return std::visit([](const auto& p) { return p.parameters(); }, prompt);
}

void set_parameters(AnyPrompt& prompt, std::span<const double> values) {
  std::visit([&](auto& p) { p.set_parameters(values); }, prompt);
}

std::string describe(const AnyPrompt& prompt) {
  if (const auto* s = std::get_if<SpatialPrompt>(&prompt)) return "svp(pad=" + std::to_string(s->pad()) + ")";
  const auto& v = std::get<SpectrumPrompt>(prompt);
  return std::string(to_string(v.variant())) + "(r=" + std::to_string(v.box()) + ")";
}

std::vector<std::uint8_t> encode_prompt(const AnyPrompt& prompt) {
  ByteWriter out;
  out.magic("FVPP");
  out.u16(kPromptVersion);
  if (const auto* s = std::get_if<SpatialPrompt>(&prompt)) {
    out.u8(kSpatialTag);
    out.u16(static_cast<std::uint16_t>(s->pad()));
    out.u16(static_cast<std::uint16_t>(s->shape().channels));
    out.u32(static_cast<std::uint32_t>(s->shape().height));
    out.u32(static_cast<std::uint32_t>(s->shape().width));
    for (double v : s->values().values()) out.f64(v);
    return out.buffer();
  }
  const auto& v = std::get<SpectrumPrompt>(prompt);
  out.u8(static_cast<std::uint8_t>(v.variant()));
  out.u16(static_cast<std::uint16_t>(v.box()));
  out.u16(static_cast<std::uint16_t>(v.channels()));
  for (double x : v.real_part().values()) out.f64(x);
  for (double x : v.imag_part().values()) out.f64(x);
  return out.buffer();
}

AnyPrompt decode_prompt(std::span<const std::uint8_t> bytes, const std::string& context) {
  ByteReader in(bytes, context);
  in.expect_magic("FVPP");
  const auto version = in.u16();
  require(version == kPromptVersion, ErrorKind::kFormat, context + ": unsupported version " + std::to_string(version));
  const auto tag = in.u8();
  const int r = in.u16();
  const int C = in.u16();
  require(r >= 1 && C >= 1, ErrorKind::kFormat, context + ": invalid prompt dimensions");
  if (tag == kSpatialTag) {
    const auto H = in.u32(), W = in.u32();
    require(H >= 1 && W >= 1 && H < (1u << 16) && W < (1u << 16), ErrorKind::kFormat,
            context + ": invalid spatial prompt shape");
    require(in.remaining() == std::size_t(H) * W * C * 8, ErrorKind::kFormat, context + ": payload size mismatch");
    SpatialPrompt s(r, static_cast<int>(H), static_cast<int>(W), C);
    RealGrid full(static_cast<int>(H), static_cast<int>(W), C);
    for (double& v : full.values()) v = in.f64();
    for (int h = 0; h < full.height(); ++h)
      for (int w = 0; w < full.width(); ++w)
        if (!s.learnable(h, w))
          for (int c = 0; c < C; ++c)
            require(full(h, w, c) == 0.0, ErrorKind::kFormat, context + ": nonzero spatial prompt interior");
    s.set_parameters(s.gather(full));
    return s;
  }
  require(tag <= 2, ErrorKind::kFormat, context + ": unknown prompt variant " + std::to_string(tag));
  const auto variant = static_cast<PromptVariant>(tag);
  require(in.remaining() == std::size_t(r) * r * C * 16, ErrorKind::kFormat, context + ": payload size mismatch");
  SpectrumPrompt v(r, C, variant);
  for (double& x : v.real_part().values()) x = in.f64();
  for (double& x : v.imag_part().values()) x = in.f64();
  if (variant != PromptVariant::kComplex) {
    for (double x : v.imag_part().values())
      require(x == 0.0, ErrorKind::kFormat, context + ": real-variant prompt with nonzero imaginary block");
  }
  return v;
}

void save_prompt(const std::filesystem::path& path, const AnyPrompt& prompt) {
  write_file(path, encode_prompt(prompt));
}

AnyPrompt load_prompt(const std::filesystem::path& path) { return decode_prompt(read_file(path), path.string()); }

}  // namespace fvp

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fvp/fft.hpp"
#include "fvp/grid.hpp"

namespace fvp {

enum class PromptVariant : std::uint8_t {
  kComplex = 0,    // added to the full complex spectrum
  kAmplitude = 1,  // added to the amplitude, phase kept
  kPhase = 2,      // added to the phase, amplitude kept
};

std::string_view to_string(PromptVariant variant);
PromptVariant parse_variant(std::string_view name);

/// Index range [begin, begin + r) of the low-frequency box along an axis of length n,
/// in the frequency-centered (DC at n/2) layout.
int box_begin(int n, int r);

/// Learnable low-frequency spectrum prompt: an r x r x C box centered on DC.
///
/// Parameters are stored as real and imaginary r x r x C grids in centered order, so box
/// entry (r/2, r/2) is the DC bin. The imaginary grid stays zero for the real variants.
class SpectrumPrompt {
 public:
  SpectrumPrompt(int r, int channels, PromptVariant variant);

  int box() const { return r_; }
  int channels() const { return real_.channels(); }
  PromptVariant variant() const { return variant_; }

  RealGrid& real_part() { return real_; }
  const RealGrid& real_part() const { return real_; }
  RealGrid& imag_part() { return imag_; }
  const RealGrid& imag_part() const { return imag_; }

  /// 2 r^2 C for the complex variant, r^2 C otherwise.
  std::size_t parameter_count() const;
  /// Learnable values, real block first then (complex only) imaginary block.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);

  void require_fits(int height, int width) const;

  friend bool operator==(const SpectrumPrompt&, const SpectrumPrompt&) = default;

 private:
  int r_;
  PromptVariant variant_;
  RealGrid real_;
  RealGrid imag_;
};

/// Gradient carrier shaped like the prompt's parameter grids.
struct PromptGradient {
  RealGrid real_part;
  RealGrid imag_part;

  /// Same ordering as SpectrumPrompt::parameters().
  std::vector<double> flatten(PromptVariant variant) const;
};

/// Full H x W x C spectrum, zero outside the box, in DC-at-origin layout.
ComplexGrid embed_prompt(const SpectrumPrompt& v, int height, int width);

/// Re(ifft2(embed_prompt(v))): the additive spatial term of the complex variant. Shared
/// by every image of the same size, so a batch needs it once.
RealGrid spatial_contribution(const SpectrumPrompt& v, int height, int width);

/// x + Re(ifft2(embed(v))).
RealGrid apply_complex(const RealGrid& x, const SpectrumPrompt& v);

enum class SpectralComponent { kAmplitude, kPhase };

/// Output of a real-variant application together with the input's decomposed spectrum,
/// which the backward pass needs.
struct RealPromptResult {
  RealGrid output;
  AmpPhase source;
};

RealPromptResult apply_real_with_spectrum(const RealGrid& x, const SpectrumPrompt& v);
RealGrid apply_real(const RealGrid& x, const SpectrumPrompt& v, SpectralComponent component);

/// dL/dv for the complex variant given dL/dx_hat (one forward transform).
PromptGradient prompt_backward(const SpectrumPrompt& v, const RealGrid& grad_xhat);
/// dL/dv for the real variants given the source spectrum recorded on the forward pass.
PromptGradient prompt_backward(const SpectrumPrompt& v, const AmpPhase& source, const RealGrid& grad_xhat);
/// Any variant; recomputes the source spectrum from x when needed.
PromptGradient prompt_backward(const SpectrumPrompt& v, const RealGrid& x, const RealGrid& grad_xhat);

/// Removes the cross-channel mean of the DC-bin gradient. When the prompted image is
/// standardized before the model, the loss is invariant to a constant offset, so this
/// component of the gradient is analytically zero; for C = 1 the bin becomes exactly 0.
void remove_mean_mode(const SpectrumPrompt& v, PromptGradient& g);

/// Spatial padding prompt: learnable border of width `pad`, zero interior.
class SpatialPrompt {
 public:
  SpatialPrompt(int pad, int height, int width, int channels);

  int pad() const { return pad_; }
  const GridShape& shape() const { return values_.shape(); }
  const RealGrid& values() const { return values_; }

  bool learnable(int h, int w) const;
  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);
  /// Learnable entries of a full-size grid, in parameters() order.
  std::vector<double> gather(const RealGrid& full) const;

  friend bool operator==(const SpatialPrompt&, const SpatialPrompt&) = default;

 private:
  int pad_;
  RealGrid values_;
};

RealGrid apply_svp(const RealGrid& x, const SpatialPrompt& s);

using AnyPrompt = std::variant<SpectrumPrompt, SpatialPrompt>;

RealGrid apply_prompt(const RealGrid& x, const AnyPrompt& prompt);
std::size_t parameter_count(const AnyPrompt& prompt);
std::vector<double> parameters(const AnyPrompt& prompt);
void set_parameters(AnyPrompt& prompt, std::span<const double> values);
std::string describe(const AnyPrompt& prompt);

// "FVPP": magic, u16 version, u8 variant, u16 r, u16 C, f64 real block, f64 imaginary block.
// Variant 3 stores a spatial prompt: r holds the pad width, followed by u32 H, u32 W and the
// full H x W x C grid as f64.
std::vector<std::uint8_t> encode_prompt(const AnyPrompt& prompt);
AnyPrompt decode_prompt(std::span<const std::uint8_t> bytes, const std::string& context = "FVPP");
void save_prompt(const std::filesystem::path& path, const AnyPrompt& prompt);
AnyPrompt load_prompt(const std::filesystem::path& path);

}  // namespace fvp

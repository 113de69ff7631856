#include "fvp/tools/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fvp/binary_io.hpp"
#include "fvp/random.hpp"

namespace fvp::tools {
namespace {

std::vector<std::uint8_t> netpbm(const std::string& magic, int height, int width, int scale,
                                 const std::vector<std::uint8_t>& px, int depth) {
  require(scale >= 1, ErrorKind::kConfig, "render scale must be >= 1");
  const std::string header = magic + "\n" + std::to_string(width * scale) + " " + std::to_string(height * scale) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(height) * width * scale * scale * depth);
  for (int h = 0; h < height * scale; ++h)
    for (int w = 0; w < width * scale; ++w) {
      const std::size_t at = (static_cast<std::size_t>(h / scale) * width + w / scale) * depth;
      out.insert(out.end(), px.begin() + at, px.begin() + at + depth);
    }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_pgm(const RealGrid& x, double lo, double hi, int scale) {
  std::vector<std::uint8_t> px(x.pixels());
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double t = std::clamp((x[i * x.channels()] - lo) / span, 0.0, 1.0);
    px[i] = static_cast<std::uint8_t>(std::lround(255.0 * t));
  }
  return netpbm("P5", x.height(), x.width(), scale, px, 1);
}

std::vector<std::uint8_t> encode_pgm(const RealGrid& x, int scale) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < x.pixels(); ++i) {
    lo = std::min(lo, x[i * x.channels()]);
    hi = std::max(hi, x[i * x.channels()]);
  }
  return encode_pgm(x, lo, hi, scale);
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image, int scale) {
  require(image.pixels.size() == static_cast<std::size_t>(image.height) * image.width * 3, ErrorKind::kShape,
          "rgb buffer size mismatch");
  return netpbm("P6", image.height, image.width, scale, image.pixels, 3);
}

void write_pgm(const std::filesystem::path& path, const RealGrid& x, double lo, double hi, int scale) {
  write_file(path, encode_pgm(x, lo, hi, scale));
}

void write_pgm(const std::filesystem::path& path, const RealGrid& x, int scale) { write_file(path, encode_pgm(x, scale)); }

void write_ppm(const std::filesystem::path& path, const RgbImage& image, int scale) {
  write_file(path, encode_ppm(image, scale));
}

std::array<std::uint8_t, 3> class_color(int c) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette = {{
      {0, 0, 0}, {230, 60, 60}, {60, 200, 80}, {70, 110, 240}, {240, 210, 60}, {200, 80, 210}, {60, 210, 210}, {250, 150, 50}}};
  if (c < static_cast<int>(kPalette.size())) return kPalette[c];
  const std::uint64_t h = splitmix64(static_cast<std::uint64_t>(c));
  return {static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h >> 16)};
}

RgbImage overlay(const RealGrid& image, const LabelGrid& labels, double alpha) {
  require(image.height() == labels.height() && image.width() == labels.width(), ErrorKind::kShape,
          "overlay: image and labels differ in size");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    lo = std::min(lo, image[i * image.channels()]);
    hi = std::max(hi, image[i * image.channels()]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  RgbImage out{image.height(), image.width(), std::vector<std::uint8_t>(image.pixels() * 3)};
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    const double g = 255.0 * (image[i * image.channels()] - lo) / span;
    const int c = labels[i];
    const auto color = class_color(c);
    for (int k = 0; k < 3; ++k) {
      const double v = c == 0 ? g : (1.0 - alpha) * g + alpha * color[k];
      out.pixels[i * 3 + k] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

RgbImage label_map(const ReliableLabel& label) {
  RgbImage out{label.y.height(), label.y.width(), std::vector<std::uint8_t>(label.y.pixels() * 3, 0)};
  for (std::size_t i = 0; i < label.y.pixels(); ++i) {
    if (!label.mask[i]) continue;
    auto color = class_color(label.y[i]);
    // Selected background must stay distinguishable from unselected pixels.
    if (label.y[i] == 0) color = {110, 110, 110};
    for (int k = 0; k < 3; ++k) out.pixels[i * 3 + k] = color[k];
  }
  return out;
}

RealGrid centered_view(const RealGrid& box_part, int channel) {
  const int r = box_part.height();
  RealGrid out(r, box_part.width(), 1);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < box_part.width(); ++j) out(i, j) = box_part(i, j, channel);
  const int dc = r / 2;
  double sum = 0.0;
  int count = 0;
  for (int di = -1; di <= 1; ++di)
    for (int dj = -1; dj <= 1; ++dj) {
      const int i = dc + di, j = dc + dj;
      if ((di == 0 && dj == 0) || i < 0 || j < 0 || i >= r || j >= out.width()) continue;
      sum += out(i, j);
      ++count;
    }
  out(dc, dc) = count > 0 ? sum / count : 0.0;
  return out;
}

SpectrumPrompt noise_prompt(int r, int channels, double sigma, std::uint64_t seed) {
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::kConfig, "noise sigma must be finite and >= 0");
  SpectrumPrompt v(r, channels, PromptVariant::kComplex);
  Rng rng(seed);
  for (double& x : v.real_part().values()) x = sigma * rng.normal();
  for (double& x : v.imag_part().values()) x = sigma * rng.normal();
  return v;
}

}  // namespace fvp::tools

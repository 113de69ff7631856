#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fvp/grid.hpp"
#include "fvp/prompt.hpp"
#include "fvp/pseudo.hpp"

namespace fvp::tools {

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples
};

/// Binary P5 of channel 0, linearly mapped from [lo, hi] to [0, 255].
std::vector<std::uint8_t> encode_pgm(const RealGrid& x, double lo, double hi, int scale = 1);
std::vector<std::uint8_t> encode_pgm(const RealGrid& x, int scale = 1);  // own min/max
std::vector<std::uint8_t> encode_ppm(const RgbImage& image, int scale = 1);

void write_pgm(const std::filesystem::path& path, const RealGrid& x, double lo, double hi, int scale = 1);
void write_pgm(const std::filesystem::path& path, const RealGrid& x, int scale = 1);  // own min/max
void write_ppm(const std::filesystem::path& path, const RgbImage& image, int scale = 1);

std::array<std::uint8_t, 3> class_color(int c);

/// Grayscale image with labeled pixels tinted by class color; class 0 stays gray.
RgbImage overlay(const RealGrid& image, const LabelGrid& labels, double alpha = 0.5);
/// Class colors on selected pixels, black elsewhere.
RgbImage label_map(const ReliableLabel& label);

/// Prompt box as stored (DC at the center) with the DC bin replaced by the mean of its neighbors.
RealGrid centered_view(const RealGrid& box_part, int channel = 0);

/// Complex prompt holding zero-mean complex Gaussian noise of standard deviation sigma per part.
SpectrumPrompt noise_prompt(int r, int channels, double sigma, std::uint64_t seed);

}  // namespace fvp::tools

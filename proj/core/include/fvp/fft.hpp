#pragma once

#include <cstdint>

#include "fvp/grid.hpp"

namespace fvp {

/// Selects how each 1D pass of a 2D transform is evaluated.
enum class FftPath {
  kAuto,    // radix-2 for power-of-two lengths, direct DFT otherwise
  kDirect,  // direct O(N^2) DFT on every axis
};

/// Unnormalized forward 2D DFT, applied to each channel plane independently.
ComplexGrid fft2(const ComplexGrid& x, FftPath path = FftPath::kAuto);
ComplexGrid fft2(const RealGrid& x, FftPath path = FftPath::kAuto);

/// Inverse 2D DFT carrying the 1/(HW) factor.
ComplexGrid ifft2(const ComplexGrid& z, FftPath path = FftPath::kAuto);

/// Moves the DC bin from (0, 0) to (H/2, W/2); `inverse` undoes it for odd sizes too.
ComplexGrid fftshift(const ComplexGrid& z, bool inverse = false);
RealGrid fftshift(const RealGrid& x, bool inverse = false);

struct AmpPhase {
  RealGrid amplitude;
  RealGrid phase;  // radians in (-pi, pi]
};

AmpPhase amp_phase_split(const ComplexGrid& z);
ComplexGrid amp_phase_merge(const AmpPhase& ap);

bool is_power_of_two(int n);

/// Number of fft2/ifft2 calls made on the calling thread.
std::uint64_t transform_count();
void reset_transform_count();

}  // namespace fvp

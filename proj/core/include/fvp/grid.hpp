#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fvp/error.hpp"

namespace fvp {

struct GridShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return pixels() * channels; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

std::string to_string(const GridShape& shape);

/// Dense H x W x C grid stored row-major in (h, w, c) order.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, int channels, T fill = T{})
      : shape_{height, width, channels} {
    require(height >= 0 && width >= 0 && channels >= 0, ErrorKind::kShape,
            "negative grid dimension");
    data_.assign(shape_.size(), fill);
  }
  explicit Grid(GridShape shape, T fill = T{}) : Grid(shape.height, shape.width, shape.channels, fill) {}

  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  const GridShape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixels() const { return shape_.pixels(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int h, int w, int c = 0) const {
    return (static_cast<std::size_t>(h) * shape_.width + w) * shape_.channels + c;
  }
  T& operator()(int h, int w, int c = 0) { return data_[index(h, w, c)]; }
  const T& operator()(int h, int w, int c = 0) const { return data_[index(h, w, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  GridShape shape_;
  std::vector<T> data_;
};

using Complex = std::complex<double>;
using RealGrid = Grid<double>;
using ComplexGrid = Grid<Complex>;
/// Single-channel grid of class ids (or binary masks).
using LabelGrid = Grid<std::uint8_t>;

void require_same_shape(const GridShape& a, const GridShape& b, const char* what);
void require_finite(const RealGrid& x, const char* what);
void require_finite(const ComplexGrid& z, const char* what);

ComplexGrid to_complex(const RealGrid& x);
RealGrid real_part(const ComplexGrid& z);
RealGrid imag_part(const ComplexGrid& z);

RealGrid operator+(const RealGrid& a, const RealGrid& b);
RealGrid operator-(const RealGrid& a, const RealGrid& b);
RealGrid operator*(double s, const RealGrid& a);
ComplexGrid operator+(const ComplexGrid& a, const ComplexGrid& b);
RealGrid& operator+=(RealGrid& a, const RealGrid& b);

double max_abs_diff(const RealGrid& a, const RealGrid& b);
double max_abs_diff(const ComplexGrid& a, const ComplexGrid& b);
double max_abs(const ComplexGrid& z);

/// Extracts channel `c` as a single-channel grid.
RealGrid channel(const RealGrid& x, int c);

}  // namespace fvp

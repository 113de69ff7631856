#include "fvp/grid.hpp"

#include <algorithm>
#include <cmath>

namespace fvp {

std::string to_string(const GridShape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
         std::to_string(shape.channels);
}

void require_same_shape(const GridShape& a, const GridShape& b, const char* what) {
  if (!(a == b)) {
    fail(ErrorKind::kShape,
         std::string(what) + ": shape " + to_string(a) + " does not match " + to_string(b));
  }
}

void require_finite(const RealGrid& x, const char* what) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) fail(ErrorKind::kDomain, std::string(what) + ": non-finite value");
  }
}

void require_finite(const ComplexGrid& z, const char* what) {
  for (const Complex& v : z.values()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      fail(ErrorKind::kDomain, std::string(what) + ": non-finite value");
    }
  }
}

ComplexGrid to_complex(const RealGrid& x) {
  ComplexGrid z(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = Complex(x[i], 0.0);
  return z;
}

RealGrid real_part(const ComplexGrid& z) {
  RealGrid x(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i].real();
  return x;
}

RealGrid imag_part(const ComplexGrid& z) {
  RealGrid x(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i].imag();
  return x;
}

RealGrid operator+(const RealGrid& a, const RealGrid& b) {
  RealGrid out = a;
  out += b;
  return out;
}

RealGrid& operator+=(RealGrid& a, const RealGrid& b) {
  require_same_shape(a.shape(), b.shape(), "grid add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

RealGrid operator-(const RealGrid& a, const RealGrid& b) {
  require_same_shape(a.shape(), b.shape(), "grid subtract");
  RealGrid out = a;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] -= b[i];
  return out;
}

RealGrid operator*(double s, const RealGrid& a) {
  RealGrid out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

ComplexGrid operator+(const ComplexGrid& a, const ComplexGrid& b) {
  require_same_shape(a.shape(), b.shape(), "grid add");
  ComplexGrid out = a;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += b[i];
  return out;
}

double max_abs_diff(const RealGrid& a, const RealGrid& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const ComplexGrid& a, const ComplexGrid& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const ComplexGrid& z) {
  double m = 0.0;
  for (const Complex& v : z.values()) m = std::max(m, std::abs(v));
  return m;
}

RealGrid channel(const RealGrid& x, int c) {
  require(c >= 0 && c < x.channels(), ErrorKind::kShape, "channel index out of range");
  RealGrid out(x.height(), x.width(), 1);
  for (int h = 0; h < x.height(); ++h)
    for (int w = 0; w < x.width(); ++w) out(h, w) = x(h, w, c);
  return out;
}

}  // namespace fvp

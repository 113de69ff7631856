#include "fvp/fft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace fvp {
namespace {

thread_local std::uint64_t g_transform_count = 0;

// e^{sign * 2 pi i k / n} for k in [0, n).
std::vector<Complex> twiddles(int n, double sign) {
  std::vector<Complex> table(n);
  for (int k = 0; k < n; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * k / n;
    table[k] = Complex(std::cos(angle), std::sin(angle));
  }
  return table;
}

void radix2(std::vector<Complex>& a, const std::vector<Complex>& tw) {
  const int n = static_cast<int>(a.size());
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len / 2;
    const int stride = n / len;
    for (int start = 0; start < n; start += len) {
      for (int k = 0; k < half; ++k) {
        const Complex t = tw[k * stride] * a[start + k + half];
        const Complex u = a[start + k];
        a[start + k] = u + t;
        a[start + k + half] = u - t;
      }
    }
  }
}

void direct(std::vector<Complex>& a, const std::vector<Complex>& tw) {
  const int n = static_cast<int>(a.size());
  std::vector<Complex> out(n);
  for (int k = 0; k < n; ++k) {
    Complex acc(0.0, 0.0);
    for (int j = 0; j < n; ++j) {
      acc += a[j] * tw[(static_cast<long>(k) * j) % n];
    }
    out[k] = acc;
  }
  a.swap(out);
}

class Transform1d {
 public:
  Transform1d(int n, double sign, FftPath path)
      : tw_(twiddles(n, sign)), use_radix2_(path == FftPath::kAuto && is_power_of_two(n)) {}

  void operator()(std::vector<Complex>& a) const {
    if (a.size() <= 1) return;
    if (use_radix2_) {
      radix2(a, tw_);
    } else {
      direct(a, tw_);
    }
  }

 private:
  std::vector<Complex> tw_;
  bool use_radix2_;
};

ComplexGrid transform2d(const ComplexGrid& x, double sign, FftPath path) {
  require(x.height() >= 1 && x.width() >= 1, ErrorKind::kShape, "fft2 requires H, W >= 1");
  require_finite(x, "fft2");
  ++g_transform_count;
  const int H = x.height(), W = x.width(), C = x.channels();
  const Transform1d row_tf(W, sign, path);
  const Transform1d col_tf(H, sign, path);
  ComplexGrid out = x;
  std::vector<Complex> buf;
  for (int c = 0; c < C; ++c) {
    buf.resize(W);
    for (int h = 0; h < H; ++h) {
      for (int w = 0; w < W; ++w) buf[w] = out(h, w, c);
      row_tf(buf);
      for (int w = 0; w < W; ++w) out(h, w, c) = buf[w];
    }
    buf.resize(H);
    for (int w = 0; w < W; ++w) {
      for (int h = 0; h < H; ++h) buf[h] = out(h, w, c);
      col_tf(buf);
      for (int h = 0; h < H; ++h) out(h, w, c) = buf[h];
    }
  }
  return out;
}

template <typename T>
Grid<T> shift_impl(const Grid<T>& z, bool inverse) {
  const int H = z.height(), W = z.width(), C = z.channels();
  const int dh = inverse ? H - H / 2 : H / 2;
  const int dw = inverse ? W - W / 2 : W / 2;
  Grid<T> out(z.shape());
  for (int h = 0; h < H; ++h) {
    const int th = (h + dh) % H;
    for (int w = 0; w < W; ++w) {
      const int tw = (w + dw) % W;
      for (int c = 0; c < C; ++c) out(th, tw, c) = z(h, w, c);
    }
  }
  return out;
}

}  // namespace

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::uint64_t transform_count() { return g_transform_count; }
void reset_transform_count() { g_transform_count = 0; }

ComplexGrid fft2(const ComplexGrid& x, FftPath path) { return transform2d(x, -1.0, path); }

ComplexGrid fft2(const RealGrid& x, FftPath path) {
  require_finite(x, "fft2");
  return transform2d(to_complex(x), -1.0, path);
}

ComplexGrid ifft2(const ComplexGrid& z, FftPath path) {
  ComplexGrid out = transform2d(z, +1.0, path);
  const double scale = 1.0 / static_cast<double>(z.pixels());
  for (Complex& v : out.values()) v *= scale;
  return out;
}

ComplexGrid fftshift(const ComplexGrid& z, bool inverse) { return shift_impl(z, inverse); }
RealGrid fftshift(const RealGrid& x, bool inverse) { return shift_impl(x, inverse); }

AmpPhase amp_phase_split(const ComplexGrid& z) {
  AmpPhase ap{RealGrid(z.shape()), RealGrid(z.shape())};
  for (std::size_t i = 0; i < z.size(); ++i) {
    ap.amplitude[i] = std::abs(z[i]);
    // atan2(0, 0) is 0; atan2(+0, -x) is +pi, and a -0 imaginary part is normalized so
    // the phase stays in (-pi, pi].
    const double im = z[i].imag() == 0.0 ? 0.0 : z[i].imag();
    ap.phase[i] = std::atan2(im, z[i].real());
  }
  return ap;
}

ComplexGrid amp_phase_merge(const AmpPhase& ap) {
  require_same_shape(ap.amplitude.shape(), ap.phase.shape(), "amp_phase_merge");
  ComplexGrid z(ap.amplitude.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = ap.amplitude[i] * Complex(std::cos(ap.phase[i]), std::sin(ap.phase[i]));
  }
  return z;
}

}  // namespace fvp

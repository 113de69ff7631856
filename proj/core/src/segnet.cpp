#include "fvp/segnet.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstring>

#include "fvp/binary_io.hpp"
#include "fvp/optim.hpp"
#include "fvp/parallel.hpp"
#include "fvp/pipeline.hpp"
#include "fvp/random.hpp"

namespace fvp {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Mat>;

struct StageSpec {
  int out_channels;
  int stride;
};
constexpr std::array<StageSpec, SegModel::kStages> kStageSpec = {{{16, 1}, {16, 2}, {32, 1}, {32, 2}, {32, 1}}};

constexpr std::uint16_t kModelVersion = 1;
enum LayerKind : std::uint8_t { kConvRecord = 0, kNormRecord = 1, kHeadRecord = 2 };

int conv_out_size(int n, int stride) { return (n + 2 - 3) / stride + 1; }

ConstMap weight_matrix(const ConvLayer& layer) {
  return ConstMap(layer.weight.data(), layer.out_channels,
                  static_cast<Eigen::Index>(layer.in_channels) * layer.kernel * layer.kernel);
}

// 3x3, padding 1.
void im2col(const double* in, int C, int H, int W, int stride, int Ho, int Wo, Mat& col) {
  col.resize(static_cast<Eigen::Index>(C) * 9, static_cast<Eigen::Index>(Ho) * Wo);
  for (int c = 0; c < C; ++c) {
    const double* plane = in + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = col.data() + static_cast<std::size_t>((c * 3 + ky) * 3 + kx) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          double* row = dst + static_cast<std::size_t>(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(row, row + Wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            row[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
          }
        }
      }
  }
}

// Adjoint of im2col; accumulates into `out` (C x H x W, zero-initialized by the caller).
void col2im(const Mat& col, int C, int H, int W, int stride, int Ho, int Wo, double* out) {
  for (int c = 0; c < C; ++c) {
    double* plane = out + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = col.data() + static_cast<std::size_t>((c * 3 + ky) * 3 + kx) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= H) continue;
          const double* row = src + static_cast<std::size_t>(oy) * Wo;
          double* dst = plane + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < W) dst[ix] += row[ox];
          }
        }
      }
  }
}

// Bilinear interpolation taps (half-pixel centers, edge clamped) for an n -> factor*n resize.
struct Taps {
  std::vector<int> i0, i1;
  std::vector<double> w0, w1;
};

Taps bilinear_taps(int n, int factor) {
  const int out = n * factor;
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w0.resize(out);
  t.w1.resize(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) / factor - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > n - 1) lo = n - 1;
    const int hi = lo < n - 1 ? lo + 1 : lo;
    const double frac = src - lo;
    t.i0[o] = lo;
    t.i1[o] = hi;
    t.w0[o] = 1.0 - frac;
    t.w1[o] = frac;
  }
  return t;
}

Mat upsample(const Mat& low, int h, int w, int factor) {
  const Taps ty = bilinear_taps(h, factor), tx = bilinear_taps(w, factor);
  const int H = h * factor, W = w * factor;
  Mat out(low.rows(), static_cast<Eigen::Index>(H) * W);
  for (Eigen::Index c = 0; c < low.rows(); ++c) {
    const double* in = low.row(c).data();
    double* dst = out.row(c).data();
    for (int y = 0; y < H; ++y) {
      const double* r0 = in + static_cast<std::size_t>(ty.i0[y]) * w;
      const double* r1 = in + static_cast<std::size_t>(ty.i1[y]) * w;
      for (int x = 0; x < W; ++x) {
        const double a = tx.w0[x] * r0[tx.i0[x]] + tx.w1[x] * r0[tx.i1[x]];
        const double b = tx.w0[x] * r1[tx.i0[x]] + tx.w1[x] * r1[tx.i1[x]];
        dst[static_cast<std::size_t>(y) * W + x] = ty.w0[y] * a + ty.w1[y] * b;
      }
    }
  }
  return out;
}

Mat upsample_backward(const Mat& grad, int h, int w, int factor) {
  const Taps ty = bilinear_taps(h, factor), tx = bilinear_taps(w, factor);
  const int H = h * factor, W = w * factor;
  Mat out = Mat::Zero(grad.rows(), static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < grad.rows(); ++c) {
    const double* g = grad.row(c).data();
    double* dst = out.row(c).data();
    for (int y = 0; y < H; ++y) {
      double* r0 = dst + static_cast<std::size_t>(ty.i0[y]) * w;
      double* r1 = dst + static_cast<std::size_t>(ty.i1[y]) * w;
      for (int x = 0; x < W; ++x) {
        const double v = g[static_cast<std::size_t>(y) * W + x];
        const double a = ty.w0[y] * v, b = ty.w1[y] * v;
        r0[tx.i0[x]] += tx.w0[x] * a;
        r0[tx.i1[x]] += tx.w1[x] * a;
        r1[tx.i0[x]] += tx.w0[x] * b;
        r1[tx.i1[x]] += tx.w1[x] * b;
      }
    }
  }
  return out;
}

Mat to_planes(const RealGrid& x) {
  const int C = x.channels();
  const std::size_t N = x.pixels();
  Mat out(C, static_cast<Eigen::Index>(N));
  for (std::size_t p = 0; p < N; ++p)
    for (int c = 0; c < C; ++c) out(c, static_cast<Eigen::Index>(p)) = x[p * C + c];
  return out;
}

RealGrid from_planes(const Mat& m, int H, int W) {
  RealGrid out(H, W, static_cast<int>(m.rows()));
  const int C = static_cast<int>(m.rows());
  for (Eigen::Index p = 0; p < m.cols(); ++p)
    for (int c = 0; c < C; ++c) out[static_cast<std::size_t>(p) * C + c] = m(c, p);
  return out;
}

void hash_values(std::uint64_t& h, const std::vector<double>& values) {
  h = fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(values.data()), values.size() * sizeof(double)), h);
}

void hash_scalar(std::uint64_t& h, double v) {
  h = fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(&v), sizeof(double)), h);
}

}  // namespace

struct ItemCache {
  std::array<Mat, SegModel::kStages + 1> acts;  // acts[0] input planes, acts[l + 1] stage l output
  std::array<Mat, SegModel::kStages> xhat;      // normalized conv outputs
  Mat up;                                       // upsampled backbone features
};

struct ForwardCache::Impl {
  Mode mode = Mode::kEval;
  std::uint64_t fingerprint = 0;
  int height = 0;
  int width = 0;
  std::array<int, SegModel::kStages + 1> heights{};
  std::array<int, SegModel::kStages + 1> widths{};
  std::array<std::vector<double>, SegModel::kStages> inv_std;
  std::vector<ItemCache> items;
};

ForwardCache::ForwardCache() : impl_(std::make_unique<Impl>()) {}
ForwardCache::~ForwardCache() = default;
ForwardCache::ForwardCache(ForwardCache&&) noexcept = default;
ForwardCache& ForwardCache::operator=(ForwardCache&&) noexcept = default;

std::size_t SegModel::parameter_count() const {
  std::size_t n = head.weight.size() + head.bias.size();
  for (int l = 0; l < kStages; ++l) n += convs[l].weight.size() + norms[l].scale.size() + norms[l].shift.size();
  return n;
}

std::vector<double> SegModel::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (int l = 0; l < kStages; ++l) {
    out.insert(out.end(), convs[l].weight.begin(), convs[l].weight.end());
    out.insert(out.end(), norms[l].scale.begin(), norms[l].scale.end());
    out.insert(out.end(), norms[l].shift.begin(), norms[l].shift.end());
  }
  out.insert(out.end(), head.weight.begin(), head.weight.end());
  out.insert(out.end(), head.bias.begin(), head.bias.end());
  return out;
}

void SegModel::set_parameters(std::span<const double> values) {
  require(values.size() == parameter_count(), ErrorKind::kShape, "model parameter count mismatch");
  auto it = values.begin();
  auto take = [&](std::vector<double>& dst) {
    std::copy_n(it, dst.size(), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  for (int l = 0; l < kStages; ++l) {
    take(convs[l].weight);
    take(norms[l].scale);
    take(norms[l].shift);
  }
  take(head.weight);
  take(head.bias);
}

std::uint64_t SegModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  hash_scalar(h, in_channels);
  hash_scalar(h, n_classes);
  auto add = [&](const std::vector<double>& v) { hash_values(h, v); };
  for (int l = 0; l < kStages; ++l) {
    add(convs[l].weight);
    add(norms[l].scale);
    add(norms[l].shift);
    add(norms[l].running_mean);
    add(norms[l].running_var);
    hash_scalar(h, norms[l].eps);
    hash_scalar(h, norms[l].momentum);
  }
  add(head.weight);
  add(head.bias);
  return h;
}

void SegModel::round_to_storage() {
  auto round = [](std::vector<double>& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  };
  for (int l = 0; l < kStages; ++l) {
    round(convs[l].weight);
    round(norms[l].scale);
    round(norms[l].shift);
    round(norms[l].running_mean);
    round(norms[l].running_var);
  }
  round(head.weight);
  round(head.bias);
}

std::vector<ParameterBlock> parameter_layout(const SegModel& m) {
  std::vector<ParameterBlock> blocks;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t size) {
    blocks.push_back({std::move(name), offset, size});
    offset += size;
  };
  for (int l = 0; l < SegModel::kStages; ++l) {
    add("conv" + std::to_string(l) + ".weight", m.convs[l].weight.size());
    add("bn" + std::to_string(l) + ".scale", m.norms[l].scale.size());
    add("bn" + std::to_string(l) + ".shift", m.norms[l].shift.size());
  }
  add("head.weight", m.head.weight.size());
  add("head.bias", m.head.bias.size());
  return blocks;
}

SegModel init_model(std::uint64_t seed, int n_classes, int in_channels) {
  require(n_classes >= 2, ErrorKind::kConfig, "a segmentation model needs at least 2 classes");
  require(in_channels >= 1, ErrorKind::kConfig, "input channel count must be >= 1");
  Rng rng(derive_seed(seed, {0x5e6e7}));
  SegModel m;
  m.in_channels = in_channels;
  m.n_classes = n_classes;
  m.mode = Mode::kEval;
  int prev = in_channels;
  for (int l = 0; l < SegModel::kStages; ++l) {
    ConvLayer& conv = m.convs[l];
    conv.in_channels = prev;
    conv.out_channels = kStageSpec[l].out_channels;
    conv.kernel = 3;
    conv.stride = kStageSpec[l].stride;
    const double fan_in = prev * 9.0;
    conv.weight.resize(static_cast<std::size_t>(conv.out_channels) * prev * 9);
    for (double& w : conv.weight) w = rng.normal(0.0, std::sqrt(2.0 / fan_in));
    BatchNorm& bn = m.norms[l];
    bn.channels = conv.out_channels;
    bn.scale.assign(bn.channels, 1.0);
    bn.shift.assign(bn.channels, 0.0);
    bn.running_mean.assign(bn.channels, 0.0);
    bn.running_var.assign(bn.channels, 1.0);
    prev = conv.out_channels;
  }
  m.head.in_channels = SegModel::kFeatureChannels;
  m.head.out_channels = n_classes;
  m.head.kernel = 1;
  m.head.stride = 1;
  m.head.weight.resize(static_cast<std::size_t>(n_classes) * SegModel::kFeatureChannels);
  for (double& w : m.head.weight) w = rng.normal(0.0, std::sqrt(2.0 / SegModel::kFeatureChannels));
  m.head.bias.assign(n_classes, 0.0);
  m.round_to_storage();
  return m;
}

namespace {

void validate_batch(const SegModel& m, std::span<const RealGrid> batch) {
  require(!batch.empty(), ErrorKind::kShape, "forward needs a non-empty batch");
  const GridShape& s = batch.front().shape();
  require(s.height >= 4 && s.width >= 4 && s.height % 4 == 0 && s.width % 4 == 0, ErrorKind::kShape,
          "input height and width must be positive multiples of 4, got " + to_string(s));
  require(s.channels == m.in_channels, ErrorKind::kShape,
          "input has " + std::to_string(s.channels) + " channels, model expects " + std::to_string(m.in_channels));
  for (const RealGrid& x : batch) {
    require_same_shape(x.shape(), s, "forward batch");
    require_finite(x, "forward");
  }
}

ForwardResult run_forward(const SegModel& m, SegModel* trainable, std::span<const RealGrid> batch, int threads) {
  validate_batch(m, batch);
  const Mode mode = trainable ? Mode::kTrain : Mode::kEval;
  ForwardResult result;
  auto& c = result.cache.impl();
  c.mode = mode;
  c.height = batch.front().height();
  c.width = batch.front().width();
  c.heights[0] = c.height;
  c.widths[0] = c.width;
  const std::size_t B = batch.size();
  c.items.resize(B);
  parallel_for(B, threads, [&](std::size_t i) { c.items[i].acts[0] = to_planes(batch[i]); });

  std::vector<Mat> conv_out(B);
  for (int l = 0; l < SegModel::kStages; ++l) {
    const ConvLayer& conv = m.convs[l];
    const int H = c.heights[l], W = c.widths[l];
    const int Ho = conv_out_size(H, conv.stride), Wo = conv_out_size(W, conv.stride);
    c.heights[l + 1] = Ho;
    c.widths[l + 1] = Wo;
    const ConstMap weight = weight_matrix(conv);
    parallel_for(B, threads, [&](std::size_t i) {
      Mat col;
      im2col(c.items[i].acts[l].data(), conv.in_channels, H, W, conv.stride, Ho, Wo, col);
      conv_out[i].noalias() = weight * col;
    });

    const BatchNorm& bn = m.norms[l];
    const int Cout = conv.out_channels;
    std::vector<double> mean(Cout), var(Cout);
    if (mode == Mode::kTrain) {
      const double count = static_cast<double>(B) * Ho * Wo;
      for (int ch = 0; ch < Cout; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < B; ++i) s += conv_out[i].row(ch).sum();
        mean[ch] = s / count;
        double v = 0.0;
        for (std::size_t i = 0; i < B; ++i) v += (conv_out[i].row(ch).array() - mean[ch]).square().sum();
        var[ch] = v / count;
      }
      BatchNorm& running = trainable->norms[l];
      const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
      for (int ch = 0; ch < Cout; ++ch) {
        running.running_mean[ch] = (1.0 - running.momentum) * running.running_mean[ch] + running.momentum * mean[ch];
        running.running_var[ch] =
            (1.0 - running.momentum) * running.running_var[ch] + running.momentum * var[ch] * unbias;
      }
    } else {
      mean = bn.running_mean;
      var = bn.running_var;
    }
    c.inv_std[l].resize(Cout);
    for (int ch = 0; ch < Cout; ++ch) c.inv_std[l][ch] = 1.0 / std::sqrt(var[ch] + bn.eps);

    parallel_for(B, threads, [&](std::size_t i) {
      ItemCache& item = c.items[i];
      item.xhat[l].resize(Cout, conv_out[i].cols());
      item.acts[l + 1].resize(Cout, conv_out[i].cols());
      for (int ch = 0; ch < Cout; ++ch) {
        item.xhat[l].row(ch) = (conv_out[i].row(ch).array() - mean[ch]) * c.inv_std[l][ch];
        item.acts[l + 1].row(ch) = (item.xhat[l].row(ch).array() * bn.scale[ch] + bn.shift[ch]).max(0.0);
      }
    });
  }

  const int h = c.heights[SegModel::kStages], w = c.widths[SegModel::kStages];
  const ConstMap head_w = weight_matrix(m.head);
  result.outputs.resize(B);
  parallel_for(B, threads, [&](std::size_t i) {
    ItemCache& item = c.items[i];
    item.up = upsample(item.acts[SegModel::kStages], h, w, SegModel::kDownsample);
    Mat logits = head_w * item.up;
    for (int k = 0; k < m.n_classes; ++k) logits.row(k).array() += m.head.bias[k];
    Mat probs(logits.rows(), logits.cols());
    for (Eigen::Index p = 0; p < logits.cols(); ++p) {
      const double mx = logits.col(p).maxCoeff();
      double total = 0.0;
      for (Eigen::Index k = 0; k < logits.rows(); ++k) {
        probs(k, p) = std::exp(logits(k, p) - mx);
        total += probs(k, p);
      }
      for (Eigen::Index k = 0; k < logits.rows(); ++k) probs(k, p) /= total;
    }
    result.outputs[i].logits = from_planes(logits, c.height, c.width);
    result.outputs[i].probs = from_planes(probs, c.height, c.width);
    result.outputs[i].features = from_planes(item.up, c.height, c.width);
  });
  c.fingerprint = (trainable ? *trainable : m).checksum();
  return result;
}

struct BackwardResult {
  std::vector<RealGrid> input_grads;
  std::vector<double> param_grads;
};

BackwardResult run_backward(const SegModel& m, const ForwardCache& cache, std::span<const RealGrid> grad_logits,
                            bool want_input, bool want_weights, int threads) {
  const auto& c = cache.impl();
  require(!c.items.empty(), ErrorKind::kState, "backward called with an empty cache");
  require(c.fingerprint == m.checksum(), ErrorKind::kState,
          "stale forward cache: the model changed since the forward pass");
  require(grad_logits.size() == c.items.size(), ErrorKind::kShape, "gradient batch size differs from the forward batch");
  for (const RealGrid& g : grad_logits) {
    require_same_shape(g.shape(), GridShape{c.height, c.width, m.n_classes}, "backward grad_logits");
    require_finite(g, "backward");
  }
  const std::size_t B = c.items.size();
  const int S = SegModel::kStages;

  // Per-item weight gradients, reduced in index order at the end.
  struct ItemGrads {
    std::array<Mat, SegModel::kStages> conv;
    std::array<Eigen::VectorXd, SegModel::kStages> scale, shift;
    Mat head;
    Eigen::VectorXd head_bias;
  };
  std::vector<ItemGrads> grads(want_weights ? B : 0);
  std::vector<Mat> delta(B);

  const ConstMap head_w = weight_matrix(m.head);
  parallel_for(B, threads, [&](std::size_t i) {
    const Mat dlogits = to_planes(grad_logits[i]);
    if (want_weights) {
      grads[i].head = dlogits * c.items[i].up.transpose();
      grads[i].head_bias = dlogits.rowwise().sum();
    }
    const Mat dup = head_w.transpose() * dlogits;
    delta[i] = upsample_backward(dup, c.heights[S], c.widths[S], SegModel::kDownsample);
  });

  for (int l = S - 1; l >= 0; --l) {
    const ConvLayer& conv = m.convs[l];
    const BatchNorm& bn = m.norms[l];
    const int Cout = conv.out_channels;
    // ReLU.
    parallel_for(B, threads, [&](std::size_t i) {
      delta[i] = (c.items[i].acts[l + 1].array() > 0.0).select(delta[i].array(), 0.0).matrix();
    });
    if (want_weights) {
      parallel_for(B, threads, [&](std::size_t i) {
        grads[i].scale[l] = (delta[i].array() * c.items[i].xhat[l].array()).rowwise().sum();
        grads[i].shift[l] = delta[i].rowwise().sum();
      });
    }
    if (c.mode == Mode::kTrain) {
      const double count = static_cast<double>(B) * delta[0].cols();
      std::vector<double> sum_d(Cout, 0.0), sum_dx(Cout, 0.0);
      for (std::size_t i = 0; i < B; ++i)
        for (int ch = 0; ch < Cout; ++ch) {
          sum_d[ch] += delta[i].row(ch).sum() * bn.scale[ch];
          sum_dx[ch] += (delta[i].row(ch).array() * c.items[i].xhat[l].row(ch).array()).sum() * bn.scale[ch];
        }
      parallel_for(B, threads, [&](std::size_t i) {
        for (int ch = 0; ch < Cout; ++ch) {
          const double k = c.inv_std[l][ch] / count;
          delta[i].row(ch) = k * (count * bn.scale[ch] * delta[i].row(ch).array() - sum_d[ch] -
                                  c.items[i].xhat[l].row(ch).array() * sum_dx[ch]);
        }
      });
    } else {
      parallel_for(B, threads, [&](std::size_t i) {
        for (int ch = 0; ch < Cout; ++ch) delta[i].row(ch) *= bn.scale[ch] * c.inv_std[l][ch];
      });
    }
    const bool need_prev = l > 0 || want_input;
    const int H = c.heights[l], W = c.widths[l];
    const int Ho = c.heights[l + 1], Wo = c.widths[l + 1];
    const ConstMap weight = weight_matrix(conv);
    parallel_for(B, threads, [&](std::size_t i) {
      if (want_weights) {
        Mat col;
        im2col(c.items[i].acts[l].data(), conv.in_channels, H, W, conv.stride, Ho, Wo, col);
        grads[i].conv[l].noalias() = delta[i] * col.transpose();
      }
      if (need_prev) {
        const Mat dcol = weight.transpose() * delta[i];
        Mat prev = Mat::Zero(conv.in_channels, static_cast<Eigen::Index>(H) * W);
        col2im(dcol, conv.in_channels, H, W, conv.stride, Ho, Wo, prev.data());
        delta[i] = std::move(prev);
      }
    });
  }

  BackwardResult out;
  if (want_input) {
    out.input_grads.reserve(B);
    for (std::size_t i = 0; i < B; ++i) out.input_grads.push_back(from_planes(delta[i], c.height, c.width));
  }
  if (want_weights) {
    out.param_grads.reserve(m.parameter_count());
    auto append_sum = [&](auto&& get) {
      auto total = get(grads[0]).eval();
      for (std::size_t i = 1; i < B; ++i) total += get(grads[i]);
      out.param_grads.insert(out.param_grads.end(), total.data(), total.data() + total.size());
    };
    for (int l = 0; l < S; ++l) {
      append_sum([l](ItemGrads& g) -> Mat& { return g.conv[l]; });
      append_sum([l](ItemGrads& g) -> Eigen::VectorXd& { return g.scale[l]; });
      append_sum([l](ItemGrads& g) -> Eigen::VectorXd& { return g.shift[l]; });
    }
    append_sum([](ItemGrads& g) -> Mat& { return g.head; });
    append_sum([](ItemGrads& g) -> Eigen::VectorXd& { return g.head_bias; });
  }
  return out;
}

}  // namespace

ForwardResult forward(const SegModel& m, std::span<const RealGrid> batch, int threads) {
  require(m.mode == Mode::kEval, ErrorKind::kState, "forward() needs an eval-mode model; use forward_train");
  return run_forward(m, nullptr, batch, threads);
}

SegOutput predict(const SegModel& m, const RealGrid& x) {
  ForwardResult r = forward(m, std::span(&x, 1));
  return std::move(r.outputs.front());
}

ForwardResult forward_train(SegModel& m, std::span<const RealGrid> batch, int threads) {
  require(m.mode == Mode::kTrain, ErrorKind::kState, "forward_train() needs a train-mode model");
  return run_forward(m, &m, batch, threads);
}

std::vector<RealGrid> backward_input(const SegModel& m, const ForwardCache& cache,
                                     std::span<const RealGrid> grad_logits, int threads) {
  require(m.mode == Mode::kEval && cache.impl().mode == Mode::kEval, ErrorKind::kState,
          "backward_input needs an eval-mode model and cache");
  return run_backward(m, cache, grad_logits, true, false, threads).input_grads;
}

std::vector<double> backward_weights(const SegModel& m, const ForwardCache& cache,
                                     std::span<const RealGrid> grad_logits, int threads) {
  require(m.mode == Mode::kTrain && cache.impl().mode == Mode::kTrain, ErrorKind::kState,
          "backward_weights needs a train-mode model and cache");
  return run_backward(m, cache, grad_logits, false, true, threads).param_grads;
}

TrainResult train_source(const Dataset& data, const TrainConfig& cfg) {
  require(!data.empty(), ErrorKind::kConfig, "train_source needs a non-empty dataset");
  require(cfg.epochs >= 0 && cfg.batch_size >= 1 && cfg.lr > 0.0, ErrorKind::kConfig, "invalid training config");
  const auto start = std::chrono::steady_clock::now();
  TrainResult result{init_model(cfg.seed, data.n_classes, data.samples.front().image.channels()), {}};
  SegModel& model = result.model;
  model.mode = Mode::kTrain;

  std::vector<RealGrid> inputs;
  inputs.reserve(data.size());
  for (const Sample& s : data.samples) inputs.push_back(model_input(s.image));

  AdamState adam(model.parameter_count());
  Rng rng(derive_seed(cfg.seed, {0x7a17}));
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start_idx = 0; start_idx < order.size(); start_idx += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start_idx + cfg.batch_size);
      std::vector<RealGrid> batch;
      for (std::size_t k = start_idx; k < end; ++k) batch.push_back(inputs[order[k]]);
      ForwardResult fwd = forward_train(model, batch, cfg.threads);
      const double norm = static_cast<double>(batch.size()) * batch.front().pixels();
      std::vector<RealGrid> grads;
      double loss = 0.0;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const RealGrid& p = fwd.outputs[b].probs;
        const LabelGrid& y = data.samples[order[start_idx + b]].label;
        RealGrid g = p;
        for (int hh = 0; hh < p.height(); ++hh)
          for (int ww = 0; ww < p.width(); ++ww) {
            const int cls = y(hh, ww);
            loss -= std::log(std::max(p(hh, ww, cls), 1e-12));
            g(hh, ww, cls) -= 1.0;
          }
        for (double& v : g.values()) v /= norm;
        grads.push_back(std::move(g));
      }
      epoch_loss += loss / batch.front().pixels();
      std::vector<double> dparams = backward_weights(model, fwd.cache, grads, cfg.threads);
      std::vector<double> params = model.parameters();
      adam_step(adam, params, dparams, cfg.lr, 0.0);
      model.set_parameters(params);
    }
    result.history.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  model.mode = Mode::kEval;
  model.round_to_storage();
  result.history.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<std::uint8_t> encode_model(const SegModel& m) {
  ByteWriter out;
  out.magic("FVPW");
  out.u16(kModelVersion);
  out.u16(static_cast<std::uint16_t>(m.n_classes));
  auto conv_record = [&](std::uint8_t kind, const ConvLayer& conv) {
    out.u8(kind);
    out.u32(static_cast<std::uint32_t>(conv.out_channels));
    out.u32(static_cast<std::uint32_t>(conv.in_channels));
    out.u32(static_cast<std::uint32_t>(conv.kernel));
    out.u32(static_cast<std::uint32_t>(conv.kernel));
    for (double w : conv.weight) out.f32(static_cast<float>(w));
    for (double b : conv.bias) out.f32(static_cast<float>(b));
  };
  for (int l = 0; l < SegModel::kStages; ++l) {
    conv_record(kConvRecord, m.convs[l]);
    const BatchNorm& bn = m.norms[l];
    out.u8(kNormRecord);
    out.u32(static_cast<std::uint32_t>(bn.channels));
    for (const auto* v : {&bn.scale, &bn.shift, &bn.running_mean, &bn.running_var})
      for (double x : *v) out.f32(static_cast<float>(x));
    out.f64(bn.eps);
    out.f64(bn.momentum);
  }
  conv_record(kHeadRecord, m.head);
  return out.buffer();
}

SegModel decode_model(std::span<const std::uint8_t> bytes, const std::string& context) {
  ByteReader in(bytes, context);
  in.expect_magic("FVPW");
  const auto version = in.u16();
  require(version == kModelVersion, ErrorKind::kFormat, context + ": unsupported version " + std::to_string(version));
  SegModel m;
  m.n_classes = in.u16();
  require(m.n_classes >= 2, ErrorKind::kFormat, context + ": class count must be >= 2");
  m.mode = Mode::kEval;
  auto read_conv = [&](std::uint8_t kind, ConvLayer& conv, int expect_out, int expect_in, int kernel) {
    const auto got = in.u8();
    require(got == kind, ErrorKind::kFormat, context + ": unexpected layer kind " + std::to_string(got));
    conv.out_channels = static_cast<int>(in.u32());
    conv.in_channels = static_cast<int>(in.u32());
    const int kh = static_cast<int>(in.u32()), kw = static_cast<int>(in.u32());
    require(conv.out_channels == expect_out && (expect_in < 0 || conv.in_channels == expect_in) &&
                conv.in_channels >= 1 && conv.in_channels <= 64 && kh == kernel && kw == kernel,
            ErrorKind::kFormat, context + ": layer shape does not match the fixed architecture");
    conv.kernel = kernel;
    conv.weight.resize(static_cast<std::size_t>(conv.out_channels) * conv.in_channels * kernel * kernel);
    for (double& w : conv.weight) w = in.f32();
    if (kind == kHeadRecord) {
      conv.bias.resize(conv.out_channels);
      for (double& b : conv.bias) b = in.f32();
    }
  };
  int prev = -1;
  for (int l = 0; l < SegModel::kStages; ++l) {
    ConvLayer& conv = m.convs[l];
    read_conv(kConvRecord, conv, kStageSpec[l].out_channels, prev, 3);
    conv.stride = kStageSpec[l].stride;
    if (l == 0) m.in_channels = conv.in_channels;
    prev = conv.out_channels;
    BatchNorm& bn = m.norms[l];
    const auto kind = in.u8();
    require(kind == kNormRecord, ErrorKind::kFormat, context + ": expected a batch-norm record");
    bn.channels = static_cast<int>(in.u32());
    require(bn.channels == conv.out_channels, ErrorKind::kFormat, context + ": batch-norm width mismatch");
    for (auto* v : {&bn.scale, &bn.shift, &bn.running_mean, &bn.running_var}) {
      v->resize(bn.channels);
      for (double& x : *v) x = in.f32();
    }
    bn.eps = in.f64();
    bn.momentum = in.f64();
    require(bn.eps > 0.0 && std::isfinite(bn.eps) && bn.momentum >= 0.0 && bn.momentum <= 1.0, ErrorKind::kFormat,
            context + ": invalid batch-norm settings");
    for (double v : bn.running_var)
      require(v > 0.0 && std::isfinite(v), ErrorKind::kFormat, context + ": running variance must be positive");
  }
  read_conv(kHeadRecord, m.head, m.n_classes, SegModel::kFeatureChannels, 1);
  m.head.stride = 1;
  in.expect_end();
  for (double v : m.parameters())
    require(std::isfinite(v), ErrorKind::kFormat, context + ": non-finite weight");
  return m;
}

void save_model(const SegModel& m, const std::filesystem::path& path) { write_file(path, encode_model(m)); }

SegModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path), path.string()); }

}  // namespace fvp

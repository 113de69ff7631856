#include "fvp/metrics.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "fvp/parallel.hpp"
#include "fvp/pipeline.hpp"

namespace fvp {
namespace {

void require_label_pair(const LabelGrid& pred, const LabelGrid& gt) {
  require_same_shape(pred.shape(), gt.shape(), "metric");
}

std::vector<std::uint8_t> boundary(const LabelGrid& y, int c) {
  const int H = y.height(), W = y.width();
  std::vector<std::uint8_t> b(y.size(), 0);
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) {
      if (y(h, w) != c) continue;
      const bool edge = h == 0 || w == 0 || h == H - 1 || w == W - 1 || y(h - 1, w) != c ||
                        y(h + 1, w) != c || y(h, w - 1) != c || y(h, w + 1) != c;
      b[y.index(h, w)] = edge ? 1 : 0;
    }
  return b;
}

// 1D squared distance transform: lower envelope of parabolas rooted at finite samples.
void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    auto intersect = [&](int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p)); };
    double s = intersect(v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

// Exact squared Euclidean distance to the nearest set pixel.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& set, int H, int W) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) grid[i] = set[i] ? 0.0 : kInf;
  const int n = std::max(H, W);
  std::vector<double> f, d;
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  f.resize(H);
  d.resize(H);
  for (int w = 0; w < W; ++w) {
    for (int h = 0; h < H; ++h) f[h] = grid[static_cast<std::size_t>(h) * W + w];
    distance_1d(f, d, v, z);
    for (int h = 0; h < H; ++h) grid[static_cast<std::size_t>(h) * W + w] = d[h];
  }
  f.resize(W);
  d.resize(W);
  for (int h = 0; h < H; ++h) {
    for (int w = 0; w < W; ++w) f[w] = grid[static_cast<std::size_t>(h) * W + w];
    distance_1d(f, d, v, z);
    for (int w = 0; w < W; ++w) grid[static_cast<std::size_t>(h) * W + w] = d[w];
  }
  return grid;
}

}  // namespace

double dice(const LabelGrid& pred, const LabelGrid& gt, int c) {
  require_label_pair(pred, gt);
  long long inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] == c, b = gt[i] == c;
    inter += a && b;
    p += a;
    g += b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

std::optional<double> asd(const LabelGrid& pred, const LabelGrid& gt, int c) {
  require_label_pair(pred, gt);
  const auto bp = boundary(pred, c);
  const auto bg = boundary(gt, c);
  const auto count = [](const std::vector<std::uint8_t>& b) {
    std::size_t n = 0;
    for (auto v : b) n += v;
    return n;
  };
  const std::size_t np = count(bp), ng = count(bg);
  if (np == 0 || ng == 0) return std::nullopt;
  const auto dist_to_g = squared_distance_transform(bg, gt.height(), gt.width());
  const auto dist_to_p = squared_distance_transform(bp, pred.height(), pred.width());
  double total = 0.0;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    if (bp[i]) total += std::sqrt(dist_to_g[i]);
    if (bg[i]) total += std::sqrt(dist_to_p[i]);
  }
  return total / static_cast<double>(np + ng);
}

LabelGrid argmax_labels(const RealGrid& probs) {
  LabelGrid y(probs.height(), probs.width(), 1, 0);
  const int C = probs.channels();
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (probs[p * C + c] > probs[p * C + best]) best = c;
    y[p] = static_cast<std::uint8_t>(best);
  }
  return y;
}

void OverlapCounts::add(const LabelGrid& pred, const LabelGrid& gt) {
  require_label_pair(pred, gt);
  const int C = static_cast<int>(truth.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int a = pred[i], b = gt[i];
    if (a < C) ++predicted[a];
    if (b < C) ++truth[b];
    if (a == b && a < C) ++intersection[a];
  }
}

double OverlapCounts::dice(int c) const {
  const long long denom = predicted[c] + truth[c];
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(intersection[c]) / static_cast<double>(denom);
}

EvalReport score(const std::vector<LabelGrid>& predictions, const Dataset& data) {
  require(!data.empty(), ErrorKind::kConfig, "evaluation needs a non-empty dataset");
  require(predictions.size() == data.size(), ErrorKind::kShape, "one prediction per sample required");
  const int C = data.n_classes;
  EvalReport r;
  r.n_classes = C;
  r.samples = data.size();
  OverlapCounts counts(C);
  std::vector<double> asd_sum(C, 0.0);
  std::vector<int> asd_n(C, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    counts.add(predictions[i], data.samples[i].label);
    for (int c = 0; c < C; ++c) {
      if (auto d = asd(predictions[i], data.samples[i].label, c)) {
        asd_sum[c] += *d;
        ++asd_n[c];
      }
    }
  }
  r.dice.resize(C);
  r.asd.resize(C);
  double fg_dice = 0.0, fg_asd = 0.0;
  int fg_asd_n = 0;
  for (int c = 0; c < C; ++c) {
    r.dice[c] = counts.dice(c);
    if (asd_n[c] > 0) r.asd[c] = asd_sum[c] / asd_n[c];
    if (c == 0) continue;
    fg_dice += r.dice[c];
    if (r.asd[c]) {
      fg_asd += *r.asd[c];
      ++fg_asd_n;
    }
  }
  r.mean_foreground_dice = fg_dice / (C - 1);
  if (fg_asd_n > 0) r.mean_foreground_asd = fg_asd / fg_asd_n;
  return r;
}

EvalReport evaluate(const SegModel& model, const AnyPrompt* prompt, const Dataset& data, int threads) {
  require(!data.empty(), ErrorKind::kConfig, "evaluation needs a non-empty dataset");
  std::vector<LabelGrid> preds(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    preds[i] = argmax_labels(predict(model, model_input(data.samples[i].image, prompt)).probs);
  });
  return score(preds, data);
}

std::string EvalReport::to_json() const {
  nlohmann::json asd_json = nlohmann::json::array();
  for (const auto& a : asd) asd_json.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
  nlohmann::json j = {
      {"n_classes", n_classes},
      {"samples", samples},
      {"dice", dice},
      {"asd", asd_json},
      {"mean_foreground_dice", mean_foreground_dice},
      {"mean_foreground_asd", mean_foreground_asd ? nlohmann::json(*mean_foreground_asd) : nlohmann::json(nullptr)},
  };
  return j.dump(2);
}

}  // namespace fvp

#include "fvp/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fvp/pipeline.hpp"

namespace fvp {

void SelectionConfig::validate() const {
  require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::kConfig, "lambda must lie in [0, 1]");
  require(k > 0.0 && k <= 1.0, ErrorKind::kConfig, "k must lie in (0, 1]");
}

double ReliableLabel::selected_fraction() const {
  if (mask.empty()) return 0.0;
  std::size_t on = 0;
  for (auto v : mask.values()) on += v;
  return static_cast<double>(on) / static_cast<double>(mask.size());
}

bool Prototypes::any_active() const { return std::find(active.begin(), active.end(), true) != active.end(); }

std::size_t threshold_rank(double k, std::size_t n) {
  // The small slack keeps products such as 0.7 * 10 from rounding up past an integer.
  const double raw = std::ceil(k * static_cast<double>(n) - 1e-9);
  return static_cast<std::size_t>(std::clamp(raw, 1.0, static_cast<double>(n)));
}

std::vector<double> intra_class_thresholds(const RealGrid& probs, double k) {
  require(!probs.empty(), ErrorKind::kShape, "intra_class_thresholds: empty probability grid");
  require(k > 0.0 && k <= 1.0, ErrorKind::kConfig, "k must lie in (0, 1]");
  const std::size_t n = probs.pixels();
  const std::size_t m = threshold_rank(k, n);
  std::vector<double> delta(probs.channels());
  std::vector<double> column(n);
  for (int c = 0; c < probs.channels(); ++c) {
    for (std::size_t p = 0; p < n; ++p) column[p] = probs[p * probs.channels() + c];
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(m - 1), column.end(),
                     std::greater<>());
    delta[c] = column[m - 1];
  }
  return delta;
}

RealGrid select_probs(const RealGrid& probs, std::span<const double> delta, double lambda) {
  require(static_cast<int>(delta.size()) == probs.channels(), ErrorKind::kShape,
          "select_probs: one threshold per class required");
  RealGrid out(probs.shape());
  const int C = probs.channels();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    out[i] = (p >= delta[i % C] && p >= lambda) ? p : 0.0;
  }
  return out;
}

ReliableLabel make_pseudo_label(const RealGrid& p_hat) {
  ReliableLabel label{p_hat.channels(), LabelGrid(p_hat.height(), p_hat.width(), 1, 0),
                      LabelGrid(p_hat.height(), p_hat.width(), 1, 0)};
  const int C = p_hat.channels();
  for (std::size_t p = 0; p < p_hat.pixels(); ++p) {
    int best = 0;
    double total = 0.0;
    for (int c = 0; c < C; ++c) {
      const double v = p_hat[p * C + c];
      total += v;
      if (v > p_hat[p * C + best]) best = c;
    }
    if (total > 0.0) {
      label.y[p] = static_cast<std::uint8_t>(best);
      label.mask[p] = 1;
    }
  }
  return label;
}

Prototypes prototypes(const RealGrid& features, const RealGrid& p_hat) {
  require(features.height() == p_hat.height() && features.width() == p_hat.width(), ErrorKind::kShape,
          "prototypes: feature and probability grids differ in size");
  const int C = p_hat.channels(), L = features.channels();
  Prototypes z{std::vector<std::vector<double>>(C, std::vector<double>(L, 0.0)), std::vector<bool>(C, false)};
  for (int c = 0; c < C; ++c) {
    double mass = 0.0;
    std::vector<double>& center = z.centers[c];
    for (std::size_t p = 0; p < p_hat.pixels(); ++p) {
      const double wgt = p_hat[p * C + c];
      if (wgt == 0.0) continue;
      mass += wgt;
      for (int l = 0; l < L; ++l) center[l] += wgt * features[p * L + l];
    }
    if (mass > 0.0) {
      z.active[c] = true;
      for (double& v : center) v /= mass;
    } else {
      std::fill(center.begin(), center.end(), 0.0);
    }
  }
  return z;
}

LabelGrid prototype_refine(const ReliableLabel& label, const RealGrid& features, const Prototypes& z) {
  require(z.any_active(), ErrorKind::kDomain, "prototype_refine: every class prototype is inactive");
  require(features.height() == label.y.height() && features.width() == label.y.width(), ErrorKind::kShape,
          "prototype_refine: feature and label grids differ in size");
  const int L = features.channels();
  const int C = static_cast<int>(z.centers.size());
  LabelGrid refined = label.mask;
  for (std::size_t p = 0; p < refined.size(); ++p) {
    if (!refined[p]) continue;
    int nearest = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      if (!z.active[c]) continue;
      double sq = 0.0;
      for (int l = 0; l < L; ++l) {
        const double d = features[p * L + l] - z.centers[c][l];
        sq += d * d;
      }
      const double dist = std::sqrt(sq);
      if (dist < best) {
        best = dist;
        nearest = c;
      }
    }
    if (nearest != label.y[p]) refined[p] = 0;
  }
  return refined;
}

ReliableLabel reliable_labels(const SegOutput& prediction, const SelectionConfig& cfg) {
  cfg.validate();
  const RealGrid& p = prediction.probs;
  std::vector<double> delta(p.channels(), 0.0);
  if (cfg.use_intra) delta = intra_class_thresholds(p, cfg.k);
  const RealGrid p_hat = select_probs(p, delta, cfg.use_global ? cfg.lambda : 0.0);
  ReliableLabel label = make_pseudo_label(p_hat);
  if (cfg.use_prototype) {
    const Prototypes z = prototypes(prediction.features, p_hat);
    // No active prototype means p_hat is identically zero, so T is already all zero.
    if (z.any_active()) label.mask = prototype_refine(label, prediction.features, z);
  }
  return label;
}

ReliableLabel reliable_labels(const SegModel& model, const RealGrid& raw_image, const SelectionConfig& cfg) {
  return reliable_labels(predict(model, model_input(raw_image)), cfg);
}

LabelGrid encode_R(const ReliableLabel& label) {
  const int C = label.n_classes;
  LabelGrid R(label.y.height(), label.y.width(), C + 1, 0);
  for (std::size_t p = 0; p < label.y.size(); ++p) {
    if (label.mask[p]) {
      R[p * (C + 1) + label.y[p]] = 1;
    } else {
      R[p * (C + 1) + C] = 1;
    }
  }
  return R;
}

}  // namespace fvp

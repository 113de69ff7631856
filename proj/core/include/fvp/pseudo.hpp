#pragma once

#include <span>
#include <vector>

#include "fvp/grid.hpp"
#include "fvp/segnet.hpp"

namespace fvp {

struct SelectionConfig {
  double lambda = 0.01;  // global probability threshold
  double k = 0.8;        // fraction of each class channel kept by the intra-class threshold
  bool use_global = true;
  bool use_intra = true;
  bool use_prototype = true;

  void validate() const;
};

/// Pseudo label y (class id per pixel, i.e. the argmax of the one-hot vector) and the
/// binary selection mask T. Where T is 0, y is 0 and carries no meaning.
struct ReliableLabel {
  int n_classes = 0;
  LabelGrid y;
  LabelGrid mask;

  double selected_fraction() const;
};

struct Prototypes {
  std::vector<std::vector<double>> centers;  // one feature vector per class
  std::vector<bool> active;                  // false where the class has zero selected mass

  bool any_active() const;
};

/// Rank of the intra-class threshold: clamp(ceil(k * n), 1, n).
std::size_t threshold_rank(double k, std::size_t n);

/// Per-class value at rank ceil(k * H * W) in descending order.
std::vector<double> intra_class_thresholds(const RealGrid& probs, double k);

/// p * 1(p >= delta_c) * 1(p >= lambda).
RealGrid select_probs(const RealGrid& probs, std::span<const double> delta, double lambda);

/// Argmax (lowest index on ties) and T = 1(sum_c p_hat > 0).
ReliableLabel make_pseudo_label(const RealGrid& p_hat);

/// Class prototypes as p_hat-weighted feature means.
Prototypes prototypes(const RealGrid& features, const RealGrid& p_hat);

/// T' = T * 1(y == nearest active prototype); distance ties go to the lowest class id.
LabelGrid prototype_refine(const ReliableLabel& label, const RealGrid& features, const Prototypes& z);

/// Full selection on a precomputed prediction of the unprompted image.
ReliableLabel reliable_labels(const SegOutput& prediction, const SelectionConfig& cfg);
/// Runs the frozen model on the unprompted raw image, then selects.
ReliableLabel reliable_labels(const SegModel& model, const RealGrid& raw_image, const SelectionConfig& cfg);

/// N_c + 1 channel one-hot: [y; 0] where T = 1, [0...0; 1] where T = 0.
LabelGrid encode_R(const ReliableLabel& label);

}  // namespace fvp

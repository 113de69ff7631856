#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fvp/data.hpp"
#include "fvp/grid.hpp"
#include "fvp/prompt.hpp"
#include "fvp/segnet.hpp"

namespace fvp {

/// 2|P & G| / (|P| + |G|) for class c; 1 when both masks are empty.
double dice(const LabelGrid& pred, const LabelGrid& gt, int c);

/// Symmetric mean nearest-boundary distance for class c. Boundary pixels have a 4-neighbour
/// outside the mask or touch the image border. Empty on either side yields nullopt.
std::optional<double> asd(const LabelGrid& pred, const LabelGrid& gt, int c);

/// Per-pixel argmax of a probability grid (lowest class id on ties).
LabelGrid argmax_labels(const RealGrid& probs);

struct OverlapCounts {
  std::vector<long long> intersection;
  std::vector<long long> predicted;
  std::vector<long long> truth;

  explicit OverlapCounts(int n_classes = 0)
      : intersection(n_classes, 0), predicted(n_classes, 0), truth(n_classes, 0) {}
  void add(const LabelGrid& pred, const LabelGrid& gt);
  double dice(int c) const;
};

struct EvalReport {
  int n_classes = 0;
  std::size_t samples = 0;
  std::vector<double> dice;               // aggregated over the set, per class
  std::vector<std::optional<double>> asd;  // mean over images where defined, per class
  double mean_foreground_dice = 0.0;
  std::optional<double> mean_foreground_asd;

  std::string to_json() const;
};

/// Segments every image (through the prompt when given) and scores it against its label.
/// Dice pools counts across images before taking the ratio.
EvalReport evaluate(const SegModel& model, const AnyPrompt* prompt, const Dataset& data, int threads = 1);

/// Scores precomputed predictions.
EvalReport score(const std::vector<LabelGrid>& predictions, const Dataset& data);

}  // namespace fvp

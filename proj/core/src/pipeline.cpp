#include "fvp/pipeline.hpp"

namespace fvp {

RealGrid model_input(const RealGrid& raw, const AnyPrompt* prompt) {
  RealGrid x = standardize(raw).output;
  if (prompt != nullptr) x = apply_prompt(x, *prompt);
  return standardize(x).output;
}

}  // namespace fvp

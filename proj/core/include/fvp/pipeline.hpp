#pragma once

#include "fvp/data.hpp"
#include "fvp/prompt.hpp"

namespace fvp {

/// Model input for a raw image: standardize, add the prompt (if any), standardize again.
/// The second standardization makes the model blind to the prompt's DC bin.
RealGrid model_input(const RealGrid& raw, const AnyPrompt* prompt = nullptr);

}  // namespace fvp

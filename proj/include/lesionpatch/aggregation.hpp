#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesionpatch/image.hpp"

namespace lesionpatch {

/// Hard per-patch predictions of one image: 0 benign, 1 malignant.
struct PatchPredictions {
  std::string image_id;
  std::vector<std::uint8_t> preds;
};

struct AggregateVerdict {
  std::string image_id;
  Label verdict = Label::kBenign;
  double mean_score = 0.0;
};

/// Patch vote: malignant unless the mean prediction is below one half, so a
/// tie goes to malignant. Throws EmptyPredictions, and ValidationError for a
/// value outside {0, 1}.
AggregateVerdict aggregate(const PatchPredictions& p);

}  // namespace lesionpatch

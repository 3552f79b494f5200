#include "lesionpatch/aggregation.hpp"

namespace lesionpatch {

AggregateVerdict aggregate(const PatchPredictions& p) {
  if (p.preds.empty()) throw EmptyPredictions(p.image_id);
  std::size_t positives = 0;
  for (std::uint8_t v : p.preds) {
    if (v > 1) {
      throw ValidationError("prediction " + std::to_string(v) + " for image " +
                            p.image_id + " is not 0 or 1");
    }
    positives += v;
  }
  AggregateVerdict out;
  out.image_id = p.image_id;
  out.mean_score = static_cast<double>(positives) / static_cast<double>(p.preds.size());
  // mean < 1/2  <=>  2 * positives < count, exact in integers.
  out.verdict = 2 * positives < p.preds.size() ? Label::kBenign : Label::kMalignant;
  return out;
}

}  // namespace lesionpatch

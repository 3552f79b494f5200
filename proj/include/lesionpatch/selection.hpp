#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lesionpatch/image.hpp"

namespace lesionpatch {

enum class Criterion { kEntropy, kMemd };
enum class Band { kLow, kHigh };

std::string_view to_string(Criterion criterion);
std::string_view to_string(Band band);
std::optional<Criterion> parse_criterion(std::string_view text);
std::optional<Band> parse_band(std::string_view text);

struct ScoreEntry {
  std::size_t patch_index = 0;
  double score = 0.0;
};

/// Scores of one criterion over the patches of one image.
struct ScoreTable {
  std::string image_id;
  Criterion criterion = Criterion::kEntropy;
  std::vector<ScoreEntry> entries;
};

/// Throws ValidationError unless the table is non-empty and every score is
/// finite and inside the criterion's range.
void validate(const ScoreTable& table);

struct SelectionSpec {
  Criterion criterion = Criterion::kEntropy;
  Band band = Band::kLow;
  double quantile = 0.15;

  /// Throws ValidationError unless 0 < quantile < 0.5.
  static SelectionSpec make(Criterion criterion, Band band, double quantile);
};

/// Linear interpolation between order statistics: with the values sorted
/// ascending and h = (n - 1) q, returns x[floor h] + frac(h) (x[floor h + 1] -
/// x[floor h]).
double quantile_linear(std::vector<double> values, double q);

/// Patch indices of the table in the requested band, ascending. The low band
/// keeps scores <= the q-quantile, the high band scores >= the
/// (1 - q)-quantile, both computed over this image only. Never empty.
std::vector<std::size_t> select_band(const ScoreTable& table,
                                     const SelectionSpec& spec);

struct SplitAssignment {
  std::map<std::string, Split> splits;
  std::uint64_t seed = 0;
};

/// Rounded split sizes for n images: test = round(n / 10), val =
/// round((n - test) / 5), halves rounded up.
struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};
SplitSizes split_sizes(std::size_t n);

/// Image-level train/val/test assignment from a seeded shuffle of the sorted
/// ids. Throws DuplicateImageId.
SplitAssignment assign_splits(const std::vector<std::string>& image_ids,
                              std::uint64_t seed);

struct ImageCandidate {
  std::string id;
  Label label = Label::kBenign;
  bool has_mask = false;
};

/// Every malignant image with a mask plus an equally sized seeded sample of
/// benign images with a mask; returned sorted. Throws InsufficientBenign and
/// DuplicateImageId.
std::vector<std::string> balance_classes(const std::vector<ImageCandidate>& images,
                                         std::uint64_t seed);

}  // namespace lesionpatch

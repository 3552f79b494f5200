#include "lesionpatch/selection.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace lesionpatch {
namespace {

// Unbiased integer in [0, bound) from the raw generator output. Avoids
// std::uniform_int_distribution, whose algorithm differs between standard
// libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_below(rng, i)]);
  }
}

// splitmix64 finalizer; derives independent streams from one user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kSplitSalt = 1;
constexpr std::uint64_t kBalanceSalt = 2;

}  // namespace

std::string_view to_string(Criterion criterion) {
  return criterion == Criterion::kMemd ? "memd" : "entropy";
}

std::string_view to_string(Band band) {
  return band == Band::kHigh ? "high" : "low";
}

std::optional<Criterion> parse_criterion(std::string_view text) {
  if (text == "entropy") return Criterion::kEntropy;
  if (text == "memd") return Criterion::kMemd;
  return std::nullopt;
}

std::optional<Band> parse_band(std::string_view text) {
  if (text == "low") return Band::kLow;
  if (text == "high") return Band::kHigh;
  return std::nullopt;
}

void validate(const ScoreTable& table) {
  if (table.entries.empty()) {
    throw ValidationError("score table for " + table.image_id + " is empty");
  }
  const double upper = table.criterion == Criterion::kEntropy ? 8.0 : 255.0;
  for (const auto& e : table.entries) {
    if (!std::isfinite(e.score) || e.score < 0.0 || e.score > upper) {
      throw ValidationError("score " + std::to_string(e.score) + " of image " +
                            table.image_id + " outside [0, " +
                            std::to_string(upper) + "]");
    }
  }
}

SelectionSpec SelectionSpec::make(Criterion criterion, Band band, double quantile) {
  if (!(quantile > 0.0 && quantile < 0.5)) {
    throw ValidationError("quantile must lie in (0, 0.5), got " +
                          std::to_string(quantile));
  }
  return {criterion, band, quantile};
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

std::vector<std::size_t> select_band(const ScoreTable& table,
                                     const SelectionSpec& spec) {
  validate(table);
  std::vector<double> scores;
  scores.reserve(table.entries.size());
  for (const auto& e : table.entries) scores.push_back(e.score);

  const bool low = spec.band == Band::kLow;
  const double threshold = quantile_linear(scores, low ? spec.quantile : 1.0 - spec.quantile);
  std::vector<std::size_t> picked;
  for (const auto& e : table.entries) {
    if (low ? e.score <= threshold : e.score >= threshold) {
      picked.push_back(e.patch_index);
    }
  }
  std::sort(picked.begin(), picked.end());
  picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
  return picked;
}

SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.test = (n + 5) / 10;
  s.val = (2 * (n - s.test) + 5) / 10;
  s.train = n - s.test - s.val;
  return s;
}

SplitAssignment assign_splits(const std::vector<std::string>& image_ids,
                              std::uint64_t seed) {
  std::vector<std::string> ids = image_ids;
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
    throw DuplicateImageId(*dup);
  }
  seeded_shuffle(ids, derive_seed(seed, kSplitSalt));

  const SplitSizes sizes = split_sizes(ids.size());
  SplitAssignment out;
  out.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Split split = i < sizes.test                ? Split::kTest
                        : i < sizes.test + sizes.val ? Split::kVal
                                                      : Split::kTrain;
    out.splits.emplace(ids[i], split);
  }
  return out;
}

std::vector<std::string> balance_classes(const std::vector<ImageCandidate>& images,
                                         std::uint64_t seed) {
  std::set<std::string> seen;
  std::vector<std::string> malignant;
  std::vector<std::string> benign;
  for (const auto& img : images) {
    if (!seen.insert(img.id).second) throw DuplicateImageId(img.id);
    if (!img.has_mask) continue;
    (img.label == Label::kMalignant ? malignant : benign).push_back(img.id);
  }
  if (benign.size() < malignant.size()) {
    throw InsufficientBenign(benign.size(), malignant.size());
  }
  std::sort(benign.begin(), benign.end());
  seeded_shuffle(benign, derive_seed(seed, kBalanceSalt));
  benign.resize(malignant.size());

  std::vector<std::string> out = std::move(malignant);
  out.insert(out.end(), benign.begin(), benign.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lesionpatch

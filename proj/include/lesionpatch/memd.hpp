#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <span>
#include <vector>

#include "lesionpatch/image.hpp"

namespace lesionpatch {

/// Sorted multiset of 8-bit pixels stored as a 256-bin count; the counting
/// sort is implicit in the bin order.
struct PixelMultiset {
  std::array<std::uint32_t, 256> counts{};
  std::uint64_t size = 0;

  template <typename Derived>
  static PixelMultiset from(const Eigen::ArrayBase<Derived>& img) {
    PixelMultiset m;
    for (Eigen::Index y = 0; y < img.rows(); ++y) {
      for (Eigen::Index x = 0; x < img.cols(); ++x) ++m.counts[img(y, x)];
    }
    m.size = static_cast<std::uint64_t>(img.size());
    return m;
  }
};

/// MEMD score held as the exact rational distance_sum / matches.
///
/// matches is M = min(#A, #B), the number of pixel pairs formed; every
/// distance is an integer, so two scores compare exactly by
/// cross-multiplication.
struct MemdScore {
  std::uint64_t distance_sum = 0;
  std::uint64_t matches = 1;

  double value() const {
    return static_cast<double>(distance_sum) / static_cast<double>(matches);
  }

  friend bool operator==(const MemdScore& a, const MemdScore& b) {
    return a.distance_sum * b.matches == b.distance_sum * a.matches;
  }
};

/// Reference evaluation of the MEMD criterion on raw pixels.
///
/// The smaller image (A, n pixels) is walked in ascending intensity; the
/// larger one (B, m pixels) is sorted. The i-th pixel of A takes the nearest
/// pixel of B among the unprocessed sorted positions that still leave enough
/// pixels for the rest of A, i.e. positions [p, m - n + i] where p follows the
/// previous pick. Ties go to the smaller intensity, then the lower position.
/// For n == m the window is a single position, which is the first-with-first
/// matching of the two sorted pixel lists. Costs O(n (m - n + 1)).
MemdScore memd_exhaustive(const GrayImage& a, const GrayImage& b);

/// Same matching as memd_exhaustive computed from 256-bin counts. Equal
/// sizes use a two-pointer sweep over the bins in O(256); unequal sizes
/// replay the windowed nearest-unprocessed walk with prefix-count lookups.
MemdScore memd_sorted(const PixelMultiset& a, const PixelMultiset& b);

/// Max-norm distance between two RGB pixels.
constexpr int max_norm_distance(const std::array<std::uint8_t, 3>& p,
                                const std::array<std::uint8_t, 3>& q) {
  int d = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const int diff = p[c] > q[c] ? p[c] - q[c] : q[c] - p[c];
    d = diff > d ? diff : d;
  }
  return d;
}

/// Raster indices (y * width + x) of an RGB image sorted by the max norm of
/// each pixel, stable in raster order.
std::vector<std::size_t> max_norm_order(const RgbImage& img);

/// Multichannel greedy kept to show why scoring runs on grayscale: pixels of
/// the smaller image, in max-norm order, each take the nearest unconsumed
/// pixel of the other image under the max-norm distance. Sorting by a norm
/// does not order pixels by mutual distance once there is more than one
/// channel, so no sorted fast path exists for this variant.
MemdScore memd_multichannel_naive(const RgbImage& a, const RgbImage& b);

struct PatchMemdSummary {
  std::size_t patch_index = 0;
  double memd_mean = 0.0;
};

/// Counters reported by per_patch_memd for benchmarking.
struct MemdStats {
  std::uint64_t pair_evaluations = 0;
  std::chrono::nanoseconds wall_time{0};
};

struct PerPatchOptions {
  unsigned threads = 1;
  MemdStats* stats = nullptr;
};

/// Mean MEMD of every patch against all other patches of the same image.
///
/// Each unordered pair is scored once (equal sizes make the score
/// symmetric), so m patches cost m(m-1)/2 evaluations. Pair sums are exact
/// integers, so the means do not depend on how pairs are spread across
/// workers. A lone patch gets 0. Throws MixedPatchSizes.
std::vector<PatchMemdSummary> per_patch_memd(std::span<const PixelMultiset> patches,
                                             const PerPatchOptions& options = {});
std::vector<PatchMemdSummary> per_patch_memd(std::span<const GrayImage> patches,
                                             const PerPatchOptions& options = {});

}  // namespace lesionpatch

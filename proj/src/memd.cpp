#include "lesionpatch/memd.hpp"

#include <algorithm>
#include <numeric>

#include "lesionpatch/parallel.hpp"

namespace lesionpatch {
namespace {

std::vector<int> sorted_pixels(const GrayImage& img) {
  std::vector<int> pixels(img.data(), img.data() + img.size());
  std::sort(pixels.begin(), pixels.end());
  return pixels;
}

int abs_diff(int a, int b) { return a > b ? a - b : b - a; }

MemdScore sweep_equal(const PixelMultiset& a, const PixelMultiset& b) {
  std::uint64_t sum = 0;
  int ia = 0;
  int ib = 0;
  std::uint64_t ra = a.counts[0];
  std::uint64_t rb = b.counts[0];
  std::uint64_t remaining = a.size;
  while (remaining > 0) {
    while (ra == 0) ra = a.counts[++ia];
    while (rb == 0) rb = b.counts[++ib];
    const std::uint64_t k = std::min(ra, rb);
    sum += k * static_cast<std::uint64_t>(abs_diff(ia, ib));
    ra -= k;
    rb -= k;
    remaining -= k;
  }
  return {sum, a.size};
}

// `small` has fewer pixels than `large`.
MemdScore sweep_windowed(const PixelMultiset& small, const PixelMultiset& large) {
  // cum[u] = number of pixels of `large` with intensity <= u.
  std::array<std::uint64_t, 256> cum{};
  std::partial_sum(large.counts.begin(), large.counts.end(), cum.begin(),
                   [](std::uint64_t acc, std::uint32_t c) { return acc + c; });
  const auto value_at = [&](std::uint64_t pos) {
    return static_cast<int>(std::upper_bound(cum.begin(), cum.end(), pos) -
                            cum.begin());
  };
  const auto first_pos = [&](int u) { return u == 0 ? 0 : cum[u - 1]; };

  const std::uint64_t n = small.size;
  const std::uint64_t m = large.size;
  std::uint64_t next = 0;  // first unprocessed sorted position of `large`
  std::uint64_t i = 0;
  std::uint64_t sum = 0;
  for (int v = 0; v < 256; ++v) {
    for (std::uint32_t c = 0; c < small.counts[v]; ++c, ++i) {
      const std::uint64_t last = m - n + i;
      // Nearest at or above v: first position holding an intensity >= v.
      const std::uint64_t up = std::max(next, first_pos(v));
      const bool has_up = up <= last;
      // Nearest at or below v: the largest intensity <= v in the window, at
      // its first position in the window.
      const std::uint64_t below_end = cum[v];  // positions [0, below_end) hold <= v
      const bool has_down = below_end > next;
      std::uint64_t pick = 0;
      int picked_value = 0;
      if (has_down) {
        const int low_value = value_at(std::min(last, below_end - 1));
        pick = std::max(next, first_pos(low_value));
        picked_value = low_value;
      }
      if (has_up) {
        const int up_value = value_at(up);
        if (!has_down || up_value - v < v - picked_value) {
          pick = up;
          picked_value = up_value;
        }
      }
      sum += static_cast<std::uint64_t>(abs_diff(v, picked_value));
      next = pick + 1;
    }
  }
  return {sum, n};
}

}  // namespace

MemdScore memd_exhaustive(const GrayImage& a, const GrayImage& b) {
  if (a.size() == 0 || b.size() == 0) throw EmptyImage();
  std::vector<int> small = sorted_pixels(a);
  std::vector<int> large = sorted_pixels(b);
  if (small.size() > large.size()) std::swap(small, large);

  const std::size_t n = small.size();
  const std::size_t m = large.size();
  std::size_t next = 0;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = next;
    int best_distance = abs_diff(small[i], large[next]);
    for (std::size_t j = next + 1; j <= m - n + i; ++j) {
      const int d = abs_diff(small[i], large[j]);
      if (d < best_distance) {
        best = j;
        best_distance = d;
      }
    }
    sum += static_cast<std::uint64_t>(best_distance);
    next = best + 1;
  }
  return {sum, n};
}

MemdScore memd_sorted(const PixelMultiset& a, const PixelMultiset& b) {
  if (a.size == 0 || b.size == 0) throw EmptyImage();
  if (a.size == b.size) return sweep_equal(a, b);
  return a.size < b.size ? sweep_windowed(a, b) : sweep_windowed(b, a);
}

std::vector<std::size_t> max_norm_order(const RgbImage& img) {
  const auto width = static_cast<std::size_t>(img.width());
  std::vector<std::size_t> order(static_cast<std::size_t>(img.r.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto norm = [&](std::size_t k) {
    const auto p = img.pixel(static_cast<Eigen::Index>(k % width),
                             static_cast<Eigen::Index>(k / width));
    return std::max({p[0], p[1], p[2]});
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return norm(l) < norm(r); });
  return order;
}

MemdScore memd_multichannel_naive(const RgbImage& a, const RgbImage& b) {
  if (a.r.size() == 0 || b.r.size() == 0) throw EmptyImage();
  const RgbImage& small = a.r.size() <= b.r.size() ? a : b;
  const RgbImage& large = a.r.size() <= b.r.size() ? b : a;

  const auto pixel_at = [](const RgbImage& img, std::size_t k) {
    const auto width = static_cast<std::size_t>(img.width());
    return img.pixel(static_cast<Eigen::Index>(k % width),
                     static_cast<Eigen::Index>(k / width));
  };
  std::vector<std::size_t> unprocessed = max_norm_order(large);
  std::uint64_t sum = 0;
  for (std::size_t k : max_norm_order(small)) {
    const auto p = pixel_at(small, k);
    auto best = unprocessed.begin();
    int best_distance = max_norm_distance(p, pixel_at(large, *best));
    for (auto it = std::next(best); it != unprocessed.end(); ++it) {
      const int d = max_norm_distance(p, pixel_at(large, *it));
      if (d < best_distance) {
        best = it;
        best_distance = d;
      }
    }
    sum += static_cast<std::uint64_t>(best_distance);
    unprocessed.erase(best);
  }
  return {sum, static_cast<std::uint64_t>(small.r.size())};
}

std::vector<PatchMemdSummary> per_patch_memd(std::span<const PixelMultiset> patches,
                                             const PerPatchOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t m = patches.size();
  std::vector<PatchMemdSummary> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i].patch_index = i;
  if (m == 0) return out;
  for (const auto& p : patches) {
    if (p.size != patches.front().size) throw MixedPatchSizes();
  }
  if (patches.front().size == 0) throw EmptyImage();

  // One row-sum vector per worker; integer addition keeps the merge exact.
  const unsigned workers = worker_count(m, options.threads);
  std::vector<std::vector<std::uint64_t>> row_sums(
      workers, std::vector<std::uint64_t>(m, 0));
  std::vector<std::uint64_t> evaluations(workers, 0);
  parallel_for(m, options.threads, [&](std::size_t i, unsigned w) {
    auto& sums = row_sums[w];
    for (std::size_t j = i + 1; j < m; ++j) {
      const std::uint64_t d = sweep_equal(patches[i], patches[j]).distance_sum;
      sums[i] += d;
      sums[j] += d;
    }
    evaluations[w] += m - 1 - i;
  });

  if (m >= 2) {
    const double denominator =
        static_cast<double>(patches.front().size) * static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
      std::uint64_t total = 0;
      for (const auto& sums : row_sums) total += sums[i];
      out[i].memd_mean = static_cast<double>(total) / denominator;
    }
  }
  if (options.stats) {
    options.stats->pair_evaluations =
        std::accumulate(evaluations.begin(), evaluations.end(), std::uint64_t{0});
    options.stats->wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(
        std::chrono::steady_clock::now() - start);
  }
  return out;
}

std::vector<PatchMemdSummary> per_patch_memd(std::span<const GrayImage> patches,
                                             const PerPatchOptions& options) {
  std::vector<PixelMultiset> multisets;
  multisets.reserve(patches.size());
  for (const auto& p : patches) {
    if (p.rows() != patches.front().rows() || p.cols() != patches.front().cols()) {
      throw MixedPatchSizes();
    }
    multisets.push_back(PixelMultiset::from(p));
  }
  return per_patch_memd(std::span<const PixelMultiset>(multisets), options);
}

}  // namespace lesionpatch

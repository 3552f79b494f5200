#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>

#include "lesionpatch/image.hpp"

namespace lesionpatch {

/// 256-bin intensity count of an 8-bit raster.
struct IntensityHistogram {
  std::array<std::uint64_t, 256> counts{};
  std::uint64_t total = 0;
};

template <typename Derived>
IntensityHistogram histogram(const Eigen::ArrayBase<Derived>& patch) {
  static_assert(std::is_same_v<typename Derived::Scalar, std::uint8_t>,
                "histogram expects an 8-bit raster");
  IntensityHistogram h;
  for (Eigen::Index y = 0; y < patch.rows(); ++y) {
    for (Eigen::Index x = 0; x < patch.cols(); ++x) {
      ++h.counts[patch(y, x)];
    }
  }
  h.total = static_cast<std::uint64_t>(patch.size());
  return h;
}

/// Shannon entropy in bits, -sum p_k log2 p_k over the non-empty bins,
/// accumulated in ascending bin order. Lies in [0, 8].
template <std::floating_point Real = double>
Real shannon_entropy(const IntensityHistogram& h) {
  if (h.total == 0) throw EmptyImage();
  const Real total = static_cast<Real>(h.total);
  Real sum = 0;
  for (std::uint64_t c : h.counts) {
    if (c == 0) continue;
    const Real p = static_cast<Real>(c) / total;
    sum -= p * std::log2(p);
  }
  // A single full bin gives -1*log2(1) = -0.0.
  return sum <= Real(0) ? Real(0) : sum;
}

template <typename Derived>
double patch_entropy(const Eigen::ArrayBase<Derived>& patch) {
  return shannon_entropy(histogram(patch));
}

}  // namespace lesionpatch

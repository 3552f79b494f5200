#pragma once

#include <Eigen/Core>

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lesionpatch/error.hpp"

namespace lesionpatch {

/// Dense row-major raster; rows index y, columns index x.
template <typename Scalar>
using Raster =
    Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GrayImage = Raster<std::uint8_t>;
using Mask = Raster<bool>;

/// Three 8-bit planes of identical dimensions.
struct RgbImage {
  GrayImage r;
  GrayImage g;
  GrayImage b;

  RgbImage() = default;
  RgbImage(GrayImage red, GrayImage green, GrayImage blue);
  RgbImage(Eigen::Index width, Eigen::Index height);

  Eigen::Index width() const { return r.cols(); }
  Eigen::Index height() const { return r.rows(); }
  std::array<std::uint8_t, 3> pixel(Eigen::Index x, Eigen::Index y) const {
    return {r(y, x), g(y, x), b(y, x)};
  }
  void set_pixel(Eigen::Index x, Eigen::Index y, std::array<std::uint8_t, 3> p) {
    r(y, x) = p[0];
    g(y, x) = p[1];
    b(y, x) = p[2];
  }
};

inline constexpr std::array<int, 4> kPatchSides = {32, 64, 128, 256};

constexpr bool is_patch_side(int side) {
  for (int s : kPatchSides) {
    if (s == side) return true;
  }
  return false;
}

enum class Label : int { kBenign = 0, kMalignant = 1 };
enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Label label);
std::string_view to_string(Split split);
std::optional<Label> parse_label(std::string_view text);
std::optional<Split> parse_split(std::string_view text);

struct Origin {
  int x = 0;
  int y = 0;

  friend bool operator==(const Origin&, const Origin&) = default;
  // Row-major: y first.
  friend std::strong_ordering operator<=>(const Origin& a, const Origin& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // inclusive
  int y1 = 0;  // inclusive
};

/// One square patch of a source image.
struct PatchRecord {
  std::string image_id;
  Origin origin;
  int side = 0;
  Label label = Label::kBenign;
  std::optional<double> entropy;
  std::optional<double> memd_mean;
  std::optional<Split> split;

  /// Stable textual key `image_id:x:y:side`, used by manifests and
  /// prediction files.
  std::string patch_id() const;
};

/// Throws InvariantViolation if the record breaks a PatchRecord invariant
/// against an image of the given dimensions.
void check_patch_record(const PatchRecord& record, Eigen::Index width,
                        Eigen::Index height);

/// BT.601 luma, Y = 0.299 R + 0.587 G + 0.114 B, rounded half away from zero.
/// Evaluated exactly in integer arithmetic so the rounding of .5 boundaries
/// does not depend on floating-point representation.
constexpr std::uint8_t luma_bt601(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int weighted = 299 * r + 587 * g + 114 * b;
  return static_cast<std::uint8_t>((weighted + 500) / 1000);
}

GrayImage to_grayscale(const RgbImage& img);

std::optional<BoundingBox> bounding_box(const Mask& mask);

/// Origins of the non-overlapping side×side grid anchored at the top-left of
/// the mask's bounding box, keeping cells that lie inside the image and whose
/// mask coverage is at least `coverage_threshold` of the cell area. Sorted
/// row-major. Throws EmptyMask, InvalidSide, or ValidationError on a
/// dimension mismatch.
std::vector<Origin> tile_roi(Eigen::Index width, Eigen::Index height,
                             const Mask& mask, int side,
                             double coverage_threshold = 0.5);

template <typename Derived>
Raster<typename Derived::Scalar> crop(const Eigen::ArrayBase<Derived>& img,
                                      Origin origin, int side) {
  if (side < 1 || origin.x < 0 || origin.y < 0 ||
      origin.x + side > img.cols() || origin.y + side > img.rows()) {
    throw OutOfBounds("patch at (" + std::to_string(origin.x) + "," +
                      std::to_string(origin.y) + ") side " +
                      std::to_string(side) + " exceeds " +
                      std::to_string(img.cols()) + "x" +
                      std::to_string(img.rows()) + " image");
  }
  return img.block(origin.y, origin.x, side, side);
}

}  // namespace lesionpatch

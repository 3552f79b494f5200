#include "lesionpatch/image.hpp"

#include <cmath>

namespace lesionpatch {

RgbImage::RgbImage(GrayImage red, GrayImage green, GrayImage blue)
    : r(std::move(red)), g(std::move(green)), b(std::move(blue)) {
  if (g.rows() != r.rows() || g.cols() != r.cols() || b.rows() != r.rows() ||
      b.cols() != r.cols()) {
    throw ValidationError("RGB planes differ in size");
  }
}

RgbImage::RgbImage(Eigen::Index width, Eigen::Index height)
    : r(GrayImage::Zero(height, width)),
      g(GrayImage::Zero(height, width)),
      b(GrayImage::Zero(height, width)) {}

std::string_view to_string(Label label) {
  return label == Label::kMalignant ? "malignant" : "benign";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "benign" || text == "0") return Label::kBenign;
  if (text == "malignant" || text == "1") return Label::kMalignant;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  return std::nullopt;
}

std::string PatchRecord::patch_id() const {
  return image_id + ":" + std::to_string(origin.x) + ":" +
         std::to_string(origin.y) + ":" + std::to_string(side);
}

void check_patch_record(const PatchRecord& record, Eigen::Index width,
                        Eigen::Index height) {
  const auto fail = [&](const std::string& why) {
    throw InvariantViolation("patch " + record.patch_id() + ": " + why);
  };
  if (!is_patch_side(record.side)) fail("side not a configured patch size");
  if (record.origin.x < 0 || record.origin.y < 0 ||
      record.origin.x + record.side > width ||
      record.origin.y + record.side > height) {
    fail("extends past image bounds");
  }
  if (record.entropy && !(*record.entropy >= 0.0 && *record.entropy <= 8.0)) {
    fail("entropy outside [0, 8]");
  }
  if (record.memd_mean &&
      !(*record.memd_mean >= 0.0 && *record.memd_mean <= 255.0)) {
    fail("memd_mean outside [0, 255]");
  }
}

GrayImage to_grayscale(const RgbImage& img) {
  const Raster<int> weighted = 299 * img.r.cast<int>() +
                               587 * img.g.cast<int>() +
                               114 * img.b.cast<int>();
  return ((weighted + 500) / 1000).cast<std::uint8_t>();
}

std::optional<BoundingBox> bounding_box(const Mask& mask) {
  std::optional<BoundingBox> box;
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      if (!mask(y, x)) continue;
      const int xi = static_cast<int>(x);
      const int yi = static_cast<int>(y);
      if (!box) {
        box = BoundingBox{xi, yi, xi, yi};
      } else {
        box->x0 = std::min(box->x0, xi);
        box->x1 = std::max(box->x1, xi);
        box->y0 = std::min(box->y0, yi);
        box->y1 = std::max(box->y1, yi);
      }
    }
  }
  return box;
}

namespace {

// Summed-area table with a zero guard row and column.
Raster<std::int64_t> integral(const Mask& mask) {
  Raster<std::int64_t> sat = Raster<std::int64_t>::Zero(mask.rows() + 1, mask.cols() + 1);
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    std::int64_t row = 0;
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      row += mask(y, x) ? 1 : 0;
      sat(y + 1, x + 1) = sat(y, x + 1) + row;
    }
  }
  return sat;
}

}  // namespace

std::vector<Origin> tile_roi(Eigen::Index width, Eigen::Index height,
                             const Mask& mask, int side,
                             double coverage_threshold) {
  if (mask.cols() != width || mask.rows() != height) {
    throw ValidationError("mask dimensions do not match image");
  }
  if (!is_patch_side(side)) {
    throw InvalidSide("patch side " + std::to_string(side) +
                      " is not one of 32, 64, 128, 256");
  }
  if (!(coverage_threshold >= 0.0 && coverage_threshold <= 1.0)) {
    throw ValidationError("coverage threshold must lie in [0, 1]");
  }
  const auto box = bounding_box(mask);
  if (!box) throw EmptyMask();

  const Raster<std::int64_t> sat = integral(mask);
  const double cell_area = static_cast<double>(side) * side;
  std::vector<Origin> origins;
  for (int y = box->y0; y <= box->y1 && y + side <= height; y += side) {
    for (int x = box->x0; x <= box->x1 && x + side <= width; x += side) {
      const std::int64_t covered = sat(y + side, x + side) - sat(y, x + side) -
                                   sat(y + side, x) + sat(y, x);
      if (static_cast<double>(covered) >= coverage_threshold * cell_area) {
        origins.push_back({x, y});
      }
    }
  }
  return origins;
}

}  // namespace lesionpatch

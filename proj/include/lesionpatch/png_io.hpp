#pragma once

#include <filesystem>
#include <utility>

#include "lesionpatch/image.hpp"

namespace lesionpatch {

// 8-bit PNG input and output. Grayscale files are read as equal RGB planes,
// which to_grayscale maps back to the original values.
/// Width and height from the PNG header, without decoding pixels.
std::pair<Eigen::Index, Eigen::Index> png_dimensions(const std::filesystem::path& path);

RgbImage read_png_rgb(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);

/// Mask pixels whose luma exceeds 127 are set.
Mask read_png_mask(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const Mask& mask);

}  // namespace lesionpatch

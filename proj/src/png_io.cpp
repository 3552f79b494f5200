#include "lesionpatch/png_io.hpp"

#include <png.h>

#include <cstring>
#include <memory>
#include <vector>

namespace lesionpatch {
namespace {

struct PngImageGuard {
  png_image* image;
  ~PngImageGuard() { png_image_free(image); }
};

std::vector<std::uint8_t> read_interleaved(const std::filesystem::path& path,
                                           std::uint32_t format,
                                           Eigen::Index& width,
                                           Eigen::Index& height) {
  if (!std::filesystem::exists(path)) throw MissingFile(path.string());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  PngImageGuard guard{&image};
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  width = image.width;
  height = image.height;
  if (width < 1 || height < 1) throw EmptyImage();
  return buffer;
}

void write_interleaved(const std::filesystem::path& path, std::uint32_t format,
                       Eigen::Index width, Eigen::Index height,
                       const std::vector<std::uint8_t>& buffer) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  PngImageGuard guard{&image};
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0,
                               nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

}  // namespace

std::pair<Eigen::Index, Eigen::Index> png_dimensions(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFile(path.string());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  PngImageGuard guard{&image};
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  return {image.width, image.height};
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  Eigen::Index width = 0;
  Eigen::Index height = 0;
  const auto buffer = read_interleaved(path, PNG_FORMAT_RGB, width, height);
  RgbImage img(width, height);
  std::size_t i = 0;
  for (Eigen::Index y = 0; y < height; ++y) {
    for (Eigen::Index x = 0; x < width; ++x, i += 3) {
      img.set_pixel(x, y, {buffer[i], buffer[i + 1], buffer[i + 2]});
    }
  }
  return img;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  return to_grayscale(read_png_rgb(path));
}

Mask read_png_mask(const std::filesystem::path& path) {
  return read_png_gray(path) > std::uint8_t{127};
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<std::uint8_t> buffer(img.data(), img.data() + img.size());
  write_interleaved(path, PNG_FORMAT_GRAY, img.cols(), img.rows(), buffer);
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  std::vector<std::uint8_t> buffer;
  buffer.reserve(static_cast<std::size_t>(img.r.size()) * 3);
  for (Eigen::Index y = 0; y < img.height(); ++y) {
    for (Eigen::Index x = 0; x < img.width(); ++x) {
      const auto p = img.pixel(x, y);
      buffer.insert(buffer.end(), p.begin(), p.end());
    }
  }
  write_interleaved(path, PNG_FORMAT_RGB, img.width(), img.height(), buffer);
}

void write_png(const std::filesystem::path& path, const Mask& mask) {
  write_png(path, GrayImage(mask.cast<std::uint8_t>() * std::uint8_t{255}));
}

}  // namespace lesionpatch

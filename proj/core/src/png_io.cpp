#include "repcycle/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "repcycle/error.hpp"

namespace repcycle::io {
namespace {

void write_raw(const std::filesystem::path& path, int height, int width, png_uint_32 format,
               const std::vector<std::uint8_t>& buffer) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, "cannot write PNG " + path.string() + ": " + img.message);
  }
}

std::vector<std::uint8_t> read_raw(const std::filesystem::path& path, png_uint_32 format, int& height, int& width) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    fail(ErrorCode::kIo, "cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, "cannot decode PNG " + path.string() + ": " + img.message);
  }
  height = static_cast<int>(img.height);
  width = static_cast<int>(img.width);
  return buffer;
}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  require(image.channels() == 3, ErrorCode::kShapeMismatch, "write_png expects 3 channels");
  std::vector<std::uint8_t> buffer(image.data().size());
  std::transform(image.data().begin(), image.data().end(), buffer.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  write_raw(path, image.height(), image.width(), PNG_FORMAT_RGB, buffer);
}

void write_png_gray(const std::filesystem::path& path, const Raster<std::uint8_t>& image) {
  require(image.channels() == 1, ErrorCode::kShapeMismatch, "write_png_gray expects 1 channel");
  write_raw(path, image.height(), image.width(), PNG_FORMAT_GRAY,
            std::vector<std::uint8_t>(image.data().begin(), image.data().end()));
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  int h = 0, w = 0;
  const auto buffer = read_raw(path, PNG_FORMAT_RGB, h, w);
  RgbImage out(h, w, 3);
  std::transform(buffer.begin(), buffer.end(), out.data().begin(), [](std::uint8_t v) { return v / 255.0; });
  return out;
}

Raster<std::uint8_t> read_png_gray(const std::filesystem::path& path) {
  int h = 0, w = 0;
  const auto buffer = read_raw(path, PNG_FORMAT_GRAY, h, w);
  Raster<std::uint8_t> out(h, w, 1);
  std::copy(buffer.begin(), buffer.end(), out.data().begin());
  return out;
}

}  // namespace repcycle::io

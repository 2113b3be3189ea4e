#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace repcycle {

// Dense row-major H x W x C grid. Used for images, label maps, masks and depth.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, int channels = 1, T fill = T{})
      : height_(height),
        width_(width),
        channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  template <typename U>
  bool same_extent(const Raster<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

// Unit-interval RGB, three channels.
using RgbImage = Raster<double>;
// Part labels in [0, 14]; 0 is background.
using LabelMap = Raster<std::uint8_t>;
// Binary {0, 1}.
using Mask = Raster<std::uint8_t>;
using DepthMap = Raster<double>;

}  // namespace repcycle

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dreampipe/error.hpp"

namespace dreampipe {

// Row-major interleaved image. Row 0 is the top row.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    require(width > 0 && height > 0 && channels > 0, ErrorKind::InvalidArgument,
            "image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  T& operator()(int x, int y, int c = 0) noexcept { return pixels_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const noexcept { return pixels_[index(x, y, c)]; }

  std::span<T> row(int y) noexcept {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_ * channels_,
            static_cast<std::size_t>(width_) * channels_};
  }
  std::span<const T> row(int y) const noexcept {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_ * channels_,
            static_cast<std::size_t>(width_) * channels_};
  }

  std::vector<T>& data() noexcept { return pixels_; }
  const std::vector<T>& data() const noexcept { return pixels_; }

  template <typename U>
  bool same_shape(const Image<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height() && channels_ == other.channels();
  }
  template <typename U>
  bool same_extent(const Image<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
           a.pixels_ == b.pixels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> pixels_;
};

using Image8 = Image<std::uint8_t>;
using ImageF = Image<float>;

enum class MaskSpace { Uv, Panorama };

const char* to_string(MaskSpace space) noexcept;

// Single-channel [0,1] mask tagged with the space it lives in.
struct MaskImage {
  ImageF values;
  MaskSpace space = MaskSpace::Uv;

  MaskImage() = default;
  MaskImage(int width, int height, MaskSpace s, float fill = 0.0f)
      : values(width, height, 1, fill), space(s) {}

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
  float& operator()(int x, int y) noexcept { return values(x, y); }
  float operator()(int x, int y) const noexcept { return values(x, y); }
  bool on(int x, int y) const noexcept { return values(x, y) >= 0.5f; }

  std::size_t count_on() const noexcept;
};

void require_space(const MaskImage& mask, MaskSpace expected, const char* what);

// Conversions between 8-bit and [0,1] float storage.
ImageF to_float(const Image8& image);
Image8 to_8bit(const ImageF& image);
MaskImage mask_from_8bit(const Image8& gray, MaskSpace space);
Image8 mask_to_8bit(const MaskImage& mask);

// Mean |a-b| over all samples, in 8-bit units.
double mean_abs_diff(const Image8& a, const Image8& b);

}  // namespace dreampipe

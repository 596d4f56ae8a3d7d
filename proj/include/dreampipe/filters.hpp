#pragma once

#include "dreampipe/image.hpp"

// Image filters for equirectangular buffers. With wrap_x the left and right
// borders are neighbours; rows always clamp. Each output pixel runs the same
// arithmetic regardless of its column, so a horizontal cyclic shift commutes
// with every filter exactly.

namespace dreampipe {

// Squared Euclidean distance (in pixels) from every pixel to the nearest
// pixel with value >= 0.5. Pixels with no such pixel get a huge value.
ImageF squared_distance_transform(const ImageF& mask, bool wrap_x);

// Binary disk dilation: 1 where a set pixel lies within `radius`.
ImageF dilate_disk(const ImageF& mask, double radius, bool wrap_x);

// Separable Gaussian with taps out to ceil(3 sigma); any channel count.
ImageF gaussian_blur(const ImageF& image, double sigma, bool wrap_x);

// Cyclic horizontal shift: out(x) = in(x - shift mod W).
template <typename T>
Image<T> roll_columns(const Image<T>& image, int shift) {
  Image<T> out(image.width(), image.height(), image.channels());
  const int w = image.width();
  int s = shift % w;
  if (s < 0) s += w;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < w; ++x) {
      const int dst = (x + s) % w;
      for (int c = 0; c < image.channels(); ++c) out(dst, y, c) = image(x, y, c);
    }
  return out;
}

}  // namespace dreampipe

#include "dreampipe/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace dreampipe {

const char* to_string(MaskSpace space) noexcept {
  return space == MaskSpace::Uv ? "uv" : "panorama";
}

std::size_t MaskImage::count_on() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values.data().begin(), values.data().end(), [](float v) { return v >= 0.5f; }));
}

void require_space(const MaskImage& mask, MaskSpace expected, const char* what) {
  require(mask.space == expected, ErrorKind::InvalidArgument,
          std::string(what) + ": expected a " + to_string(expected) + "-space mask, got " +
              to_string(mask.space));
}

ImageF to_float(const Image8& image) {
  ImageF out(image.width(), image.height(), image.channels());
  std::transform(image.data().begin(), image.data().end(), out.data().begin(),
                 [](std::uint8_t v) { return v / 255.0f; });
  return out;
}

Image8 to_8bit(const ImageF& image) {
  Image8 out(image.width(), image.height(), image.channels());
  std::transform(image.data().begin(), image.data().end(), out.data().begin(), [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  });
  return out;
}

MaskImage mask_from_8bit(const Image8& gray, MaskSpace space) {
  MaskImage mask(gray.width(), gray.height(), space);
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x) mask(x, y) = gray(x, y, 0) / 255.0f;
  return mask;
}

Image8 mask_to_8bit(const MaskImage& mask) { return to_8bit(mask.values); }

double mean_abs_diff(const Image8& a, const Image8& b) {
  require(a.same_shape(b), ErrorKind::InvalidArgument, "mean_abs_diff: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    sum += std::abs(static_cast<int>(a.data()[i]) - static_cast<int>(b.data()[i]));
  return a.data().empty() ? 0.0 : sum / static_cast<double>(a.data().size());
}

}  // namespace dreampipe

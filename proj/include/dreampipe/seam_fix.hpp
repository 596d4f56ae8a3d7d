#pragma once

#include <cstdint>
#include <vector>

#include "dreampipe/image.hpp"

namespace dreampipe {

class Stylizer;
struct StylizeRequest;

enum class Pole { Up, Down };

// Inverse mapping from panorama pixels back into a pole view: for every
// panorama pixel inside the view's inscribed disk, the continuous pixel
// coordinate in the perspective image and its radius from the centre.
struct PoleWarp {
  Pole pole = Pole::Up;
  double fov_deg = 90.0;
  int view_size = 0;
  int pano_width = 0;
  int pano_height = 0;
  std::vector<std::int32_t> pano_pixel;
  std::vector<float> view_x;
  std::vector<float> view_y;
  std::vector<float> radius;
};

template <typename T>
struct PoleView {
  Image<T> image;
  PoleWarp warp;
};

// Gnomonic view straight up or down with bilinear sampling.
// Looking up, image +x is world +X and image +y (down the rows) is world +Y;
// looking down, image +y is world -Y.
PoleView<std::uint8_t> unwrap_pole(const Image8& pano, Pole pole, double fov_deg, int out_size);
PoleView<float> unwrap_pole(const ImageF& pano, Pole pole, double fov_deg, int out_size);

// Writes the edited view back into the pole region with an alpha that ramps
// from 1 inside the disk to 0 at its rim over blend_radius view pixels.
void rewarp_pole(const Image8& edited, const PoleWarp& warp, Image8& pano, double blend_radius);

// Cyclic half-width shift; unroll_half is the exact inverse.
Image8 roll_half(const Image8& pano);
Image8 unroll_half(const Image8& pano);
ImageF roll_half(const ImageF& pano);

struct SeamParams {
  bool fix_horizontal = true;
  bool fix_poles = true;
  bool poles_first = false;
  double pole_fov_deg = 90.0;
  int pole_size = 512;
  double pole_disk_fraction = 0.4;  // inpainted disk radius / half view size
  double blend_radius = 8.0;
  int strip_divisor = 8;            // strip width = W / strip_divisor
  double strip_feather = 8.0;
  void validate() const;
};

// Soft mask over the centre columns: 1 inside the strip, linear to 0 over
// the feather on each side.
MaskImage center_strip_mask(int width, int height, double strip_width, double feather);

// Soft disk mask centred in a size x size view.
MaskImage disk_mask(int size, double radius, double feather);

// Roll, inpaint the centre strip, unroll; then the poles (or the reverse).
// `distance` may be empty, in which case a unit-distance map is sent.
Image8 fix_seams(const Image8& pano, const ImageF& distance, Stylizer& stylizer,
                 const StylizeRequest& base, const SeamParams& params);

}  // namespace dreampipe

#pragma once

#include "dreampipe/image.hpp"
#include "dreampipe/render.hpp"
#include "dreampipe/uv_fields.hpp"

namespace dreampipe {

inline constexpr double kDefaultVisibilityEpsilon = 0.01;  // metres

// A valid texel is visible when its distance to the camera agrees with the
// rendered distance along its viewing ray (x - c) to within epsilon. The
// distance map is sampled nearest-neighbour.
MaskImage compute_visibility_mask(const UvFieldSet& fields, const PanoramaFrame& frame,
                                  double epsilon = kDefaultVisibilityEpsilon);

// Bilinear RGB sample of an equirectangular image; columns wrap, rows clamp.
Vec3 sample_panorama_bilinear(const Image8& pano, EquirectCoord e) noexcept;

// For texels with write_mask >= 0.5, atlas <- bilinear sample of the panorama
// along the texel's viewing ray. Other texels are untouched. The panorama may
// have any 2:1 resolution.
void project_panorama_to_uv(const UvFieldSet& fields, const CameraPose& pose,
                            const Image8& stylized_pano, const MaskImage& write_mask,
                            Image8& atlas);

// Grows written texels outward by `radius` rings of the 8-neighbourhood (so
// one texel becomes a (2r+1)^2 square). Each new texel takes the mean of its
// already-written neighbours from the previous ring. Written texels are
// unchanged. `written` is updated to the grown footprint.
Image8 dilate_texels(const Image8& atlas, MaskImage& written, int radius);

}  // namespace dreampipe

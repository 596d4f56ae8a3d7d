#pragma once

#include "dreampipe/camera.hpp"
#include "dreampipe/image.hpp"
#include "dreampipe/render.hpp"
#include "dreampipe/uv_fields.hpp"

namespace dreampipe {

struct MaskParams {
  // Sobel magnitude of log(distance), per pixel, above which a pixel is a depth edge.
  double depth_edge_threshold = 0.1;
  // Dilation radius and blur sigma in pixels at `reference_width`; both scale
  // linearly with the panorama width. reference_width = 0 disables scaling.
  double dilation_radius = 5.0;
  double blur_sigma = 3.0;
  int reference_width = 1024;
  double grazing_cutoff_deg = 10.0;
  double max_surface_distance = 2.5;  // metres

  double scale_for(int width) const noexcept {
    return reference_width > 0 ? static_cast<double>(width) / reference_width : 1.0;
  }
  void validate() const;
};

// Ones near depth discontinuities of a panoramic distance map: Sobel on
// log-distance, thresholded, disk-dilated, Gaussian-blurred, clamped. Pixels
// on a hit/miss border count as edges. Columns wrap.
MaskImage detect_depth_edges(const ImageF& distance, const MaskParams& params);

// Write permission away from depth edges: 1 - edge sampled (nearest) at each
// texel's projection into the frame. Invalid texels are 0.
MaskImage uv_depth_edge_mask(const UvFieldSet& fields, const PanoramaFrame& frame,
                             const MaskImage& edge_pano);

// 1 where the viewing ray meets the surface at more than the grazing cutoff
// (dot(n, (c - x)/|c - x|) > sin(cutoff)) and |c - x| <= max distance.
MaskImage safe_view_mask(const UvFieldSet& fields, const CameraPose& pose,
                         const MaskParams& params);

// Texelwise intersection of binarized (>= 0.5) UV masks.
MaskImage confidential_mask(const MaskImage& dep_edge, const MaskImage& safe_view,
                            const MaskImage& inp_vis);

// Region the stylizer must synthesize: dilate + blur of (1 - painted).
MaskImage inpaint_request_mask(const MaskImage& painted_pano, const MaskParams& params);

// Texelwise max (union) of two same-space masks.
MaskImage mask_union(const MaskImage& a, const MaskImage& b);
// a AND NOT b on binarized masks.
MaskImage mask_subtract(const MaskImage& a, const MaskImage& b);

}  // namespace dreampipe

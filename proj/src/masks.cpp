#include "dreampipe/masks.hpp"

#include <algorithm>
#include <cmath>

#include "dreampipe/filters.hpp"

namespace dreampipe {
namespace {

void require_same_extent(const MaskImage& a, const MaskImage& b, const char* what) {
  require(a.width() == b.width() && a.height() == b.height(), ErrorKind::InvalidArgument,
          std::string(what) + ": mask dimensions differ");
}

}  // namespace

void MaskParams::validate() const {
  require(depth_edge_threshold > 0.0 && dilation_radius > 0.0 && blur_sigma > 0.0 &&
              max_surface_distance > 0.0,
          ErrorKind::Config, "mask parameters must be positive");
  require(grazing_cutoff_deg > 0.0 && grazing_cutoff_deg < 90.0, ErrorKind::Config,
          "grazing cutoff must lie in (0, 90) degrees");
  require(reference_width >= 0, ErrorKind::Config, "reference width must be non-negative");
}

MaskImage detect_depth_edges(const ImageF& distance, const MaskParams& params) {
  params.validate();
  require(distance.channels() == 1, ErrorKind::InvalidArgument, "distance map needs one channel");
  const int w = distance.width();
  const int h = distance.height();
  ImageF logd(w, h, 1, 0.0f);
  for (std::size_t i = 0; i < logd.data().size(); ++i) {
    const float d = distance.data()[i];
    logd.data()[i] = d > 0.0f ? std::log(d) : 0.0f;
  }
  auto is_hit = [&](int x, int y) { return distance(x, y) > 0.0f; };
  auto wrap = [w](int x) { return x < 0 ? x + w : (x >= w ? x - w : x); };

  ImageF edges(w, h, 1, 0.0f);
  const double thr2 = params.depth_edge_threshold * params.depth_edge_threshold;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool any_hit = false;
      bool any_miss = false;
      float v[3][3];
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = wrap(x + dx);
          const int sy = std::clamp(y + dy, 0, h - 1);
          const bool hit = is_hit(sx, sy);
          any_hit |= hit;
          any_miss |= !hit;
          v[dy + 1][dx + 1] = logd(sx, sy);
        }
      if (any_hit && any_miss) {
        edges(x, y) = 1.0f;
        continue;
      }
      if (!any_hit) continue;
      const double gx =
          ((v[0][2] + 2.0 * v[1][2] + v[2][2]) - (v[0][0] + 2.0 * v[1][0] + v[2][0])) / 8.0;
      const double gy =
          ((v[2][0] + 2.0 * v[2][1] + v[2][2]) - (v[0][0] + 2.0 * v[0][1] + v[0][2])) / 8.0;
      if (gx * gx + gy * gy > thr2) edges(x, y) = 1.0f;
    }
  }
  const double scale = params.scale_for(w);
  ImageF grown = dilate_disk(edges, params.dilation_radius * scale, true);
  ImageF blurred = gaussian_blur(grown, params.blur_sigma * scale, true);
  MaskImage out;
  out.space = MaskSpace::Panorama;
  out.values = std::move(blurred);
  for (float& f : out.values.data()) f = std::clamp(f, 0.0f, 1.0f);
  return out;
}

MaskImage uv_depth_edge_mask(const UvFieldSet& fields, const PanoramaFrame& frame,
                             const MaskImage& edge_pano) {
  require_space(edge_pano, MaskSpace::Panorama, "uv_depth_edge_mask");
  require(edge_pano.width() == frame.width() && edge_pano.height() == frame.height(),
          ErrorKind::InvalidArgument, "edge panorama does not match the frame");
  MaskImage out(fields.width, fields.height, MaskSpace::Uv, 0.0f);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < fields.height; ++y)
    for (int x = 0; x < fields.width; ++x) {
      if (!fields.is_valid(x, y)) continue;
      EquirectCoord e;
      double dist = 0.0;
      if (!project_to_equirect(frame.pose, fields.position_at(x, y), e, dist)) continue;
      const auto [px, py] = equirect_to_nearest_pixel(e, edge_pano.width(), edge_pano.height());
      out(x, y) = std::clamp(1.0f - edge_pano(px, py), 0.0f, 1.0f);
    }
  return out;
}

MaskImage safe_view_mask(const UvFieldSet& fields, const CameraPose& pose,
                         const MaskParams& params) {
  params.validate();
  const double min_cos = std::sin(deg_to_rad(params.grazing_cutoff_deg));
  MaskImage out(fields.width, fields.height, MaskSpace::Uv, 0.0f);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < fields.height; ++y)
    for (int x = 0; x < fields.width; ++x) {
      if (!fields.is_valid(x, y)) continue;
      const Vec3 to_cam = pose.center - fields.position_at(x, y);
      const double dist = to_cam.norm();
      if (!(dist > 0.0) || dist > params.max_surface_distance) continue;
      if (fields.normal_at(x, y).dot(to_cam / dist) > min_cos) out(x, y) = 1.0f;
    }
  return out;
}

MaskImage confidential_mask(const MaskImage& dep_edge, const MaskImage& safe_view,
                            const MaskImage& inp_vis) {
  for (const MaskImage* m : {&dep_edge, &safe_view, &inp_vis})
    require_space(*m, MaskSpace::Uv, "confidential_mask");
  require_same_extent(dep_edge, safe_view, "confidential_mask");
  require_same_extent(dep_edge, inp_vis, "confidential_mask");
  MaskImage out(dep_edge.width(), dep_edge.height(), MaskSpace::Uv, 0.0f);
  for (std::size_t i = 0; i < out.values.data().size(); ++i) {
    const bool on = dep_edge.values.data()[i] >= 0.5f && safe_view.values.data()[i] >= 0.5f &&
                    inp_vis.values.data()[i] >= 0.5f;
    out.values.data()[i] = on ? 1.0f : 0.0f;
  }
  return out;
}

MaskImage inpaint_request_mask(const MaskImage& painted_pano, const MaskParams& params) {
  params.validate();
  require_space(painted_pano, MaskSpace::Panorama, "inpaint_request_mask");
  ImageF unpainted(painted_pano.width(), painted_pano.height(), 1, 0.0f);
  for (std::size_t i = 0; i < unpainted.data().size(); ++i)
    unpainted.data()[i] = painted_pano.values.data()[i] >= 0.5f ? 0.0f : 1.0f;
  const double scale = params.scale_for(painted_pano.width());
  ImageF grown = dilate_disk(unpainted, params.dilation_radius * scale, true);
  MaskImage out;
  out.space = MaskSpace::Panorama;
  out.values = gaussian_blur(grown, params.blur_sigma * scale, true);
  for (float& f : out.values.data()) f = std::clamp(f, 0.0f, 1.0f);
  return out;
}

MaskImage mask_union(const MaskImage& a, const MaskImage& b) {
  require(a.space == b.space, ErrorKind::InvalidArgument, "mask_union: space mismatch");
  require_same_extent(a, b, "mask_union");
  MaskImage out = a;
  for (std::size_t i = 0; i < out.values.data().size(); ++i)
    out.values.data()[i] = std::max(a.values.data()[i], b.values.data()[i]);
  return out;
}

MaskImage mask_subtract(const MaskImage& a, const MaskImage& b) {
  require(a.space == b.space, ErrorKind::InvalidArgument, "mask_subtract: space mismatch");
  require_same_extent(a, b, "mask_subtract");
  MaskImage out(a.width(), a.height(), a.space, 0.0f);
  for (std::size_t i = 0; i < out.values.data().size(); ++i)
    out.values.data()[i] =
        (a.values.data()[i] >= 0.5f && b.values.data()[i] < 0.5f) ? 1.0f : 0.0f;
  return out;
}

}  // namespace dreampipe

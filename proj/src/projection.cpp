#include "dreampipe/projection.hpp"

#include <algorithm>
#include <cmath>

namespace dreampipe {

MaskImage compute_visibility_mask(const UvFieldSet& fields, const PanoramaFrame& frame,
                                  double epsilon) {
  require(epsilon > 0.0, ErrorKind::InvalidArgument, "visibility epsilon must be positive");
  MaskImage mask(fields.width, fields.height, MaskSpace::Uv, 0.0f);
  const int pw = frame.width();
  const int ph = frame.height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < fields.height; ++y) {
    for (int x = 0; x < fields.width; ++x) {
      if (!fields.is_valid(x, y)) continue;
      EquirectCoord e;
      double dist = 0.0;
      if (!project_to_equirect(frame.pose, fields.position_at(x, y), e, dist)) continue;
      const auto [px, py] = equirect_to_nearest_pixel(e, pw, ph);
      const float rendered = frame.distance(px, py);
      if (rendered < 0.0f) continue;
      if (std::abs(dist - static_cast<double>(rendered)) < epsilon) mask(x, y) = 1.0f;
    }
  }
  return mask;
}

Vec3 sample_panorama_bilinear(const Image8& pano, EquirectCoord e) noexcept {
  const int w = pano.width();
  const int h = pano.height();
  const double fx = e.u * w - 0.5;
  const double fy = e.v * h - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double ax = fx - x0f;
  const double ay = fy - y0f;
  int x0 = static_cast<int>(x0f) % w;
  if (x0 < 0) x0 += w;
  const int x1 = (x0 + 1) % w;
  const int y0 = std::clamp(static_cast<int>(y0f), 0, h - 1);
  const int y1 = std::clamp(static_cast<int>(y0f) + 1, 0, h - 1);
  Vec3 out;
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - ax) * pano(x0, y0, c) + ax * pano(x1, y0, c);
    const double bottom = (1.0 - ax) * pano(x0, y1, c) + ax * pano(x1, y1, c);
    out[c] = (1.0 - ay) * top + ay * bottom;
  }
  return out;
}

void project_panorama_to_uv(const UvFieldSet& fields, const CameraPose& pose,
                            const Image8& stylized_pano, const MaskImage& write_mask,
                            Image8& atlas) {
  require_space(write_mask, MaskSpace::Uv, "project_panorama_to_uv");
  require(write_mask.width() == fields.width && write_mask.height() == fields.height &&
              atlas.width() == fields.width && atlas.height() == fields.height &&
              atlas.channels() == 3,
          ErrorKind::InvalidArgument, "project_panorama_to_uv: atlas/mask/fields size mismatch");
  require(stylized_pano.channels() == 3 && stylized_pano.width() == 2 * stylized_pano.height(),
          ErrorKind::InvalidArgument, "stylized panorama must be a 2:1 RGB image");
#pragma omp parallel for schedule(static)
  for (int y = 0; y < fields.height; ++y) {
    for (int x = 0; x < fields.width; ++x) {
      if (!write_mask.on(x, y) || !fields.is_valid(x, y)) continue;
      EquirectCoord e;
      double dist = 0.0;
      if (!project_to_equirect(pose, fields.position_at(x, y), e, dist)) continue;
      const Vec3 c = sample_panorama_bilinear(stylized_pano, e);
      for (int k = 0; k < 3; ++k)
        atlas(x, y, k) = static_cast<std::uint8_t>(std::lround(std::clamp(c[k], 0.0, 255.0)));
    }
  }
}

Image8 dilate_texels(const Image8& atlas, MaskImage& written, int radius) {
  require(radius >= 0, ErrorKind::InvalidArgument, "dilation radius must be non-negative");
  require(written.width() == atlas.width() && written.height() == atlas.height(),
          ErrorKind::InvalidArgument, "dilate_texels: mask/atlas size mismatch");
  Image8 out = atlas;
  const int w = atlas.width();
  const int h = atlas.height();
  const int ch = atlas.channels();
  for (int ring = 0; ring < radius; ++ring) {
    const MaskImage before = written;
    const Image8 src = out;
    bool grew = false;
#pragma omp parallel for schedule(static) reduction(|| : grew)
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (before.on(x, y)) continue;
        int sum[4] = {0, 0, 0, 0};
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || !before.on(nx, ny)) continue;
            for (int c = 0; c < ch; ++c) sum[c] += src(nx, ny, c);
            ++count;
          }
        if (count == 0) continue;
        for (int c = 0; c < ch; ++c)
          out(x, y, c) = static_cast<std::uint8_t>((sum[c] + count / 2) / count);
        written(x, y) = 1.0f;
        grew = true;
      }
    }
    if (!grew) break;
  }
  return out;
}

}  // namespace dreampipe

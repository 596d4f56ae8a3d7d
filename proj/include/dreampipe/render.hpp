#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dreampipe/bvh.hpp"
#include "dreampipe/camera.hpp"
#include "dreampipe/image.hpp"
#include "dreampipe/mesh.hpp"

namespace dreampipe {

// Distance stored for pixels whose ray leaves the scene.
inline constexpr float kMissDistance = -1.0f;

// Per-pixel primary hit: triangle (-1 on a miss) and the barycentric weights
// of corners 1 and 2.
struct HitBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> triangle;
  std::vector<float> w1;
  std::vector<float> w2;

  bool hit(int x, int y) const noexcept { return triangle[static_cast<std::size_t>(y) * width + x] >= 0; }
  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  BarycentricSample sample(int x, int y) const noexcept;
};

struct PanoramaFrame {
  Image8 color;       // RGB8, black at misses
  ImageF distance;    // metres |c - x|, kMissDistance at misses
  ImageF normal;      // 3-channel unit normals, zero at misses
  CameraPose pose;
  HitBuffer hits;

  int width() const noexcept { return distance.width(); }
  int height() const noexcept { return distance.height(); }
  bool hit(int x, int y) const noexcept { return distance(x, y) >= 0.0f; }
};

// One primary ray per pixel through the pixel centre, no anti-aliasing.
PanoramaFrame render_panorama(const TexturedMesh& mesh, const Bvh& bvh, const CameraPose& pose,
                              int width, int height);
PanoramaFrame render_panorama(const TexturedMesh& mesh, const CameraPose& pose, int width,
                              int height);

// Trace only; distance is written into `distance` (resized) when non-null.
HitBuffer trace_panorama(const Bvh& bvh, const CameraPose& pose, int width, int height,
                         ImageF* distance = nullptr);

// Pinhole camera looking down its +X axis with +Z up; `fov_deg` is horizontal.
HitBuffer trace_perspective(const Bvh& bvh, const CameraPose& pose, int width, int height,
                            double fov_deg, ImageF* distance = nullptr);
Vec3 perspective_ray(int x, int y, int width, int height, double fov_deg) noexcept;

// Re-shades traced hits with any atlas: bilinear colour lookup.
Image8 shade_texture(const HitBuffer& hits, const TexturedMesh& mesh, const Image8& atlas);
// Nearest-texel lookup of a UV mask; misses are 0.
MaskImage shade_uv_mask(const HitBuffer& hits, const TexturedMesh& mesh, const MaskImage& uv_mask);

MaskImage render_uv_mask_as_panorama(const TexturedMesh& mesh, const Bvh& bvh,
                                     const CameraPose& pose, const MaskImage& uv_mask, int width,
                                     int height);

Vec2 hit_uv(const TexturedMesh& mesh, const BarycentricSample& s) noexcept;

}  // namespace dreampipe

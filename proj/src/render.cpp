#include "dreampipe/render.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace dreampipe {
namespace {

HitBuffer make_hit_buffer(int width, int height) {
  HitBuffer hits;
  hits.width = width;
  hits.height = height;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  hits.triangle.assign(n, -1);
  hits.w1.assign(n, 0.0f);
  hits.w2.assign(n, 0.0f);
  return hits;
}

template <typename RayFn>
HitBuffer trace_with(const Bvh& bvh, int width, int height, const Vec3& origin, RayFn&& ray_for,
                     ImageF* distance) {
  HitBuffer hits = make_hit_buffer(width, height);
  if (distance) *distance = ImageF(width, height, 1, kMissDistance);
#pragma omp parallel for schedule(dynamic, 4)
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Ray ray;
      ray.origin = origin;
      ray.direction = ray_for(x, y);
      const auto hit = bvh.intersect(ray);
      if (!hit) continue;
      const std::size_t i = hits.index(x, y);
      hits.triangle[i] = static_cast<std::int32_t>(hit->sample.triangle);
      hits.w1[i] = static_cast<float>(hit->sample.weights[1]);
      hits.w2[i] = static_cast<float>(hit->sample.weights[2]);
      if (distance) (*distance)(x, y) = static_cast<float>(hit->distance);
    }
  }
  return hits;
}

}  // namespace

BarycentricSample HitBuffer::sample(int x, int y) const noexcept {
  const std::size_t i = index(x, y);
  BarycentricSample s;
  s.triangle = static_cast<std::uint32_t>(triangle[i]);
  s.weights = {1.0 - w1[i] - w2[i], w1[i], w2[i]};
  return s;
}

Vec2 hit_uv(const TexturedMesh& mesh, const BarycentricSample& s) noexcept {
  const IndexTriple& t = mesh.uv_indices[s.triangle];
  return mesh.uvs[t[0]] * s.weights[0] + mesh.uvs[t[1]] * s.weights[1] +
         mesh.uvs[t[2]] * s.weights[2];
}

HitBuffer trace_panorama(const Bvh& bvh, const CameraPose& pose, int width, int height,
                         ImageF* distance) {
  require(width > 0 && height > 0 && width == 2 * height, ErrorKind::InvalidArgument,
          "panorama width must be twice its height");
  pose.validate();
  return trace_with(bvh, width, height, pose.center,
                    [&](int x, int y) {
                      return pose.to_world(
                          equirect_to_dir(pixel_center_to_equirect(x, y, width, height)).vec());
                    },
                    distance);
}

Vec3 perspective_ray(int x, int y, int width, int height, double fov_deg) noexcept {
  const double half = std::tan(deg_to_rad(fov_deg) * 0.5);
  const double aspect = static_cast<double>(height) / width;
  const double a = (2.0 * (x + 0.5) / width - 1.0) * half;
  const double b = (2.0 * (y + 0.5) / height - 1.0) * half * aspect;
  // Image right is camera -Y, image down is camera -Z.
  return Vec3(1.0, -a, -b).normalized();
}

HitBuffer trace_perspective(const Bvh& bvh, const CameraPose& pose, int width, int height,
                            double fov_deg, ImageF* distance) {
  require(width > 0 && height > 0 && fov_deg > 0.0 && fov_deg < 180.0, ErrorKind::InvalidArgument,
          "invalid perspective camera");
  pose.validate();
  return trace_with(
      bvh, width, height, pose.center,
      [&](int x, int y) { return pose.to_world(perspective_ray(x, y, width, height, fov_deg)); },
      distance);
}

Image8 shade_texture(const HitBuffer& hits, const TexturedMesh& mesh, const Image8& atlas) {
  require(atlas.channels() == 3, ErrorKind::InvalidArgument, "atlas must be RGB");
  Image8 out(hits.width, hits.height, 3, 0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < hits.height; ++y)
    for (int x = 0; x < hits.width; ++x) {
      if (!hits.hit(x, y)) continue;
      const Vec3 c = sample_bilinear(atlas, hit_uv(mesh, hits.sample(x, y)));
      for (int k = 0; k < 3; ++k)
        out(x, y, k) = static_cast<std::uint8_t>(std::lround(std::clamp(c[k], 0.0, 255.0)));
    }
  return out;
}

MaskImage shade_uv_mask(const HitBuffer& hits, const TexturedMesh& mesh, const MaskImage& uv_mask) {
  require_space(uv_mask, MaskSpace::Uv, "shade_uv_mask");
  require(uv_mask.width() == mesh.atlas_width() && uv_mask.height() == mesh.atlas_height(),
          ErrorKind::InvalidArgument, "UV mask dimensions do not match the mesh atlas");
  MaskImage out(hits.width, hits.height, MaskSpace::Panorama, 0.0f);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < hits.height; ++y)
    for (int x = 0; x < hits.width; ++x) {
      if (!hits.hit(x, y)) continue;
      const auto [tx, ty] = uv_to_texel(hit_uv(mesh, hits.sample(x, y)), uv_mask.width(),
                                        uv_mask.height());
      out(x, y) = uv_mask(tx, ty);
    }
  return out;
}

PanoramaFrame render_panorama(const TexturedMesh& mesh, const Bvh& bvh, const CameraPose& pose,
                              int width, int height) {
  PanoramaFrame frame;
  frame.pose = pose;
  frame.hits = trace_panorama(bvh, pose, width, height, &frame.distance);
  frame.color = shade_texture(frame.hits, mesh, mesh.texture);
  frame.normal = ImageF(width, height, 3, 0.0f);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      if (!frame.hits.hit(x, y)) continue;
      const BarycentricSample s = frame.hits.sample(x, y);
      Vec3 n = interpolate_attribute<Vec3>(s, mesh.normal_indices, mesh.normals);
      const double len = n.norm();
      if (len > 0.0) n /= len;
      for (int k = 0; k < 3; ++k) frame.normal(x, y, k) = static_cast<float>(n[k]);
    }
  return frame;
}

PanoramaFrame render_panorama(const TexturedMesh& mesh, const CameraPose& pose, int width,
                              int height) {
  const Bvh bvh(mesh);
  return render_panorama(mesh, bvh, pose, width, height);
}

MaskImage render_uv_mask_as_panorama(const TexturedMesh& mesh, const Bvh& bvh,
                                     const CameraPose& pose, const MaskImage& uv_mask, int width,
                                     int height) {
  require(uv_mask.width() == mesh.atlas_width() && uv_mask.height() == mesh.atlas_height(),
          ErrorKind::InvalidArgument, "UV mask dimensions do not match the mesh atlas");
  return shade_uv_mask(trace_panorama(bvh, pose, width, height), mesh, uv_mask);
}

}  // namespace dreampipe

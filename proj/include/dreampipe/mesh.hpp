#pragma once

#include <cstddef>
#include <vector>

#include "dreampipe/geometry.hpp"
#include "dreampipe/image.hpp"

namespace dreampipe {

// Triangle mesh in metres with per-corner texture coordinates and one RGB8
// atlas. Texture space: u right, v up, atlas row 0 is v = 1 and texel (x, y)
// has its centre at u = (x + 0.5) / W, v = 1 - (y + 0.5) / H.
struct TexturedMesh {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Vec2> uvs;
  std::vector<IndexTriple> position_indices;
  std::vector<IndexTriple> uv_indices;
  std::vector<IndexTriple> normal_indices;
  Image8 texture;

  std::size_t triangle_count() const noexcept { return position_indices.size(); }
  int atlas_width() const noexcept { return texture.width(); }
  int atlas_height() const noexcept { return texture.height(); }

  Aabb bounds() const noexcept;
  double uv_area(std::size_t tri) const noexcept;

  // Index ranges, unit normals (1e-4), 3-channel atlas.
  void validate() const;
};

// Area-weighted vertex normals; normal_indices mirror position_indices.
void compute_vertex_normals(TexturedMesh& mesh);

// Texel centre of atlas pixel (x, y) in texture space.
inline Vec2 texel_center_uv(int x, int y, int width, int height) noexcept {
  return {(x + 0.5) / width, 1.0 - (y + 0.5) / height};
}

// Bilinear RGB lookup of an 8-bit texture; samples are clamped to the edge.
Vec3 sample_bilinear(const Image8& texture, const Vec2& uv) noexcept;
// Nearest texel holding uv (clamped).
std::array<int, 2> uv_to_texel(const Vec2& uv, int width, int height) noexcept;

}  // namespace dreampipe

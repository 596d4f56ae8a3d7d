#pragma once

#include <cstdint>
#include <vector>

#include "dreampipe/mesh.hpp"

namespace dreampipe {

// Per-texel surface samples over the atlas: where each texel lives in the
// scene and which way it faces.
struct UvFieldSet {
  int width = 0;
  int height = 0;
  std::vector<Vec3> position;
  std::vector<Vec3> normal;
  std::vector<std::uint8_t> valid;
  std::vector<std::int32_t> triangle;  // -1 for invalid texels
  std::vector<std::array<double, 3>> weights;
  std::size_t valid_count = 0;
  std::size_t skipped_degenerate = 0;

  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  bool is_valid(int x, int y) const noexcept { return valid[index(x, y)] != 0; }
  const Vec3& position_at(int x, int y) const noexcept { return position[index(x, y)]; }
  const Vec3& normal_at(int x, int y) const noexcept { return normal[index(x, y)]; }
  Aabb bounds() const noexcept;
};

// Texels whose centre falls inside a triangle's UV footprint, with a top-left
// fill rule on shared edges. Where charts overlap the lower triangle index
// wins. Zero-area UV triangles are skipped and counted.
UvFieldSet rasterize_uv_fields(const TexturedMesh& mesh);

}  // namespace dreampipe

#pragma once

#include <filesystem>
#include <optional>
#include <span>

#include "dreampipe/mesh.hpp"

namespace dreampipe {

struct MeshLoadOptions {
  // Atlas size used when the OBJ references no texture; the atlas is then a
  // flat mid-gray image.
  int default_atlas_size = 4096;
};

// Wavefront OBJ with vt records and at most one distinct map_Kd texture.
// Polygons are fan-triangulated. When any face lacks vn, all normals are
// recomputed by area-weighted averaging.
TexturedMesh load_mesh(const std::filesystem::path& path, const MeshLoadOptions& options = {});

// Writes <stem>.obj, <stem>.mtl and <stem>.png next to `obj_path`. Floats
// are written in shortest round-trip form, so reloading reproduces positions,
// normals and texture coordinates bit-exactly. With an alpha mask the PNG is
// RGBA and alpha = round(255 * mask).
void save_mesh_with_texture(const TexturedMesh& mesh, const Image8& texture,
                            const MaskImage* alpha_mask, const std::filesystem::path& obj_path);

// Axis-aligned region of texture space, u0 <= u < u1 and v0 <= v < v1.
struct UvRect {
  double u0 = 0.0;
  double v0 = 0.0;
  double u1 = 0.0;
  double v1 = 0.0;
};

// Alpha mask that is 0 at texels whose centre falls in any rectangle, else 1.
MaskImage window_alpha_mask(int width, int height, std::span<const UvRect> windows);

}  // namespace dreampipe

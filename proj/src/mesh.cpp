#include "dreampipe/mesh.hpp"

#include <algorithm>
#include <cmath>

namespace dreampipe {

Aabb TexturedMesh::bounds() const noexcept {
  Aabb box;
  for (const Vec3& p : positions) box.extend(p);
  return box;
}

double TexturedMesh::uv_area(std::size_t tri) const noexcept {
  const IndexTriple& t = uv_indices[tri];
  const Vec2 a = uvs[t[1]] - uvs[t[0]];
  const Vec2 b = uvs[t[2]] - uvs[t[0]];
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

void TexturedMesh::validate() const {
  const std::size_t n = triangle_count();
  require(n > 0, ErrorKind::Format, "mesh has no triangles");
  require(uv_indices.size() == n && normal_indices.size() == n, ErrorKind::Format,
          "mesh index arrays disagree in length");
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      require(position_indices[i][k] < positions.size(), ErrorKind::Format,
              "triangle " + std::to_string(i) + " has an invalid vertex index");
      require(uv_indices[i][k] < uvs.size(), ErrorKind::Format,
              "triangle " + std::to_string(i) + " has an invalid texture coordinate index");
      require(normal_indices[i][k] < normals.size(), ErrorKind::Format,
              "triangle " + std::to_string(i) + " has an invalid normal index");
    }
  }
  for (const Vec3& nrm : normals)
    require(std::abs(nrm.norm() - 1.0) < 1e-4, ErrorKind::Format, "mesh normal is not unit length");
  require(!texture.empty() && texture.channels() == 3, ErrorKind::Format,
          "mesh atlas must be an RGB image");
}

void compute_vertex_normals(TexturedMesh& mesh) {
  std::vector<Vec3> acc(mesh.positions.size(), Vec3::Zero());
  for (const IndexTriple& t : mesh.position_indices) {
    const Vec3& a = mesh.positions[t[0]];
    const Vec3& b = mesh.positions[t[1]];
    const Vec3& c = mesh.positions[t[2]];
    // Cross product length is twice the area, which is the weight we want.
    const Vec3 face = (b - a).cross(c - a);
    for (std::uint32_t v : t) acc[v] += face;
  }
  for (Vec3& n : acc) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, 1.0);
  }
  mesh.normals = std::move(acc);
  mesh.normal_indices = mesh.position_indices;
}

Vec3 sample_bilinear(const Image8& tex, const Vec2& uv) noexcept {
  const double fx = uv.x() * tex.width() - 0.5;
  const double fy = (1.0 - uv.y()) * tex.height() - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double ax = fx - x0f;
  const double ay = fy - y0f;
  const int x0 = std::clamp(static_cast<int>(x0f), 0, tex.width() - 1);
  const int y0 = std::clamp(static_cast<int>(y0f), 0, tex.height() - 1);
  const int x1 = std::clamp(static_cast<int>(x0f) + 1, 0, tex.width() - 1);
  const int y1 = std::clamp(static_cast<int>(y0f) + 1, 0, tex.height() - 1);
  Vec3 out;
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - ax) * tex(x0, y0, c) + ax * tex(x1, y0, c);
    const double bottom = (1.0 - ax) * tex(x0, y1, c) + ax * tex(x1, y1, c);
    out[c] = (1.0 - ay) * top + ay * bottom;
  }
  return out;
}

std::array<int, 2> uv_to_texel(const Vec2& uv, int width, int height) noexcept {
  const int x = std::clamp(static_cast<int>(std::floor(uv.x() * width)), 0, width - 1);
  const int y = std::clamp(static_cast<int>(std::floor((1.0 - uv.y()) * height)), 0, height - 1);
  return {x, y};
}

}  // namespace dreampipe

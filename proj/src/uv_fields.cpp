#include "dreampipe/uv_fields.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace dreampipe {
namespace {

constexpr int kBandRows = 32;

struct UvTriangle {
  Vec2 p[3];       // texel-space corners, positively oriented
  int order[3];    // corner permutation applied for orientation
  double area2 = 0.0;
  int y_min = 0;
  int y_max = -1;
  int x_min = 0;
  int x_max = -1;
};

double edge_fn(const Vec2& a, const Vec2& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

// Edges whose direction is "top-left" in y-down texel space own the texels
// lying exactly on them. Opposite traversals of a shared edge disagree, so
// each such texel belongs to exactly one triangle.
bool owns_boundary(const Vec2& a, const Vec2& b) {
  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

}  // namespace

Aabb UvFieldSet::bounds() const noexcept {
  Aabb box;
  for (std::size_t i = 0; i < position.size(); ++i)
    if (valid[i]) box.extend(position[i]);
  return box;
}

UvFieldSet rasterize_uv_fields(const TexturedMesh& mesh) {
  const int width = mesh.atlas_width();
  const int height = mesh.atlas_height();
  require(width > 0 && height > 0, ErrorKind::InvalidArgument, "mesh atlas dimensions not set");

  UvFieldSet f;
  f.width = width;
  f.height = height;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  f.position.assign(n, Vec3::Zero());
  f.normal.assign(n, Vec3::Zero());
  f.valid.assign(n, 0);
  f.triangle.assign(n, -1);
  f.weights.assign(n, {0.0, 0.0, 0.0});

  const std::size_t tri_count = mesh.triangle_count();
  std::vector<UvTriangle> tris(tri_count);
  const int bands = (height + kBandRows - 1) / kBandRows;
  std::vector<std::vector<std::uint32_t>> band_tris(bands);
  for (std::size_t i = 0; i < tri_count; ++i) {
    UvTriangle& t = tris[i];
    for (int k = 0; k < 3; ++k) {
      const Vec2& uv = mesh.uvs[mesh.uv_indices[i][k]];
      t.p[k] = Vec2(uv.x() * width, (1.0 - uv.y()) * height);
      t.order[k] = k;
    }
    t.area2 = edge_fn(t.p[0], t.p[1], t.p[2].x(), t.p[2].y());
    if (std::abs(t.area2) < 1e-12) {
      ++f.skipped_degenerate;
      continue;
    }
    if (t.area2 < 0.0) {
      std::swap(t.p[1], t.p[2]);
      std::swap(t.order[1], t.order[2]);
      t.area2 = -t.area2;
    }
    const double xmin = std::min({t.p[0].x(), t.p[1].x(), t.p[2].x()});
    const double xmax = std::max({t.p[0].x(), t.p[1].x(), t.p[2].x()});
    const double ymin = std::min({t.p[0].y(), t.p[1].y(), t.p[2].y()});
    const double ymax = std::max({t.p[0].y(), t.p[1].y(), t.p[2].y()});
    // Texel x has its centre at x + 0.5.
    t.x_min = std::max(0, static_cast<int>(std::ceil(xmin - 0.5)));
    t.x_max = std::min(width - 1, static_cast<int>(std::floor(xmax - 0.5)));
    t.y_min = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
    t.y_max = std::min(height - 1, static_cast<int>(std::floor(ymax - 0.5)));
    if (t.x_min > t.x_max || t.y_min > t.y_max) continue;
    for (int b = t.y_min / kBandRows; b <= t.y_max / kBandRows; ++b)
      band_tris[b].push_back(static_cast<std::uint32_t>(i));
  }
  if (f.skipped_degenerate > 0)
    spdlog::warn("rasterize_uv_fields: skipped {} zero-area UV triangles", f.skipped_degenerate);

#pragma omp parallel for schedule(dynamic, 1)
  for (int b = 0; b < bands; ++b) {
    const int row_lo = b * kBandRows;
    const int row_hi = std::min(height - 1, row_lo + kBandRows - 1);
    for (std::uint32_t ti : band_tris[b]) {
      const UvTriangle& t = tris[ti];
      const bool own0 = owns_boundary(t.p[1], t.p[2]);
      const bool own1 = owns_boundary(t.p[2], t.p[0]);
      const bool own2 = owns_boundary(t.p[0], t.p[1]);
      const IndexTriple& pi = mesh.position_indices[ti];
      const IndexTriple& ni = mesh.normal_indices[ti];
      for (int y = std::max(row_lo, t.y_min); y <= std::min(row_hi, t.y_max); ++y) {
        const double py = y + 0.5;
        for (int x = t.x_min; x <= t.x_max; ++x) {
          const std::size_t idx = f.index(x, y);
          if (f.valid[idx]) continue;
          const double px = x + 0.5;
          const double e0 = edge_fn(t.p[1], t.p[2], px, py);
          const double e1 = edge_fn(t.p[2], t.p[0], px, py);
          const double e2 = edge_fn(t.p[0], t.p[1], px, py);
          if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
          if ((e0 == 0.0 && !own0) || (e1 == 0.0 && !own1) || (e2 == 0.0 && !own2)) continue;
          // Weights in the mesh's original corner order.
          std::array<double, 3> w{};
          w[t.order[0]] = e0 / t.area2;
          w[t.order[1]] = e1 / t.area2;
          w[t.order[2]] = e2 / t.area2;
          const Vec3 pos = mesh.positions[pi[0]] * w[0] + mesh.positions[pi[1]] * w[1] +
                           mesh.positions[pi[2]] * w[2];
          Vec3 nrm = mesh.normals[ni[0]] * w[0] + mesh.normals[ni[1]] * w[1] +
                     mesh.normals[ni[2]] * w[2];
          double len = nrm.norm();
          if (!(len > 1e-12)) {
            nrm = (mesh.positions[pi[1]] - mesh.positions[pi[0]])
                      .cross(mesh.positions[pi[2]] - mesh.positions[pi[0]]);
            len = nrm.norm();
          }
          f.position[idx] = pos;
          f.normal[idx] = len > 0.0 ? Vec3(nrm / len) : Vec3(0.0, 0.0, 1.0);
          f.valid[idx] = 1;
          f.triangle[idx] = static_cast<std::int32_t>(ti);
          f.weights[idx] = w;
        }
      }
    }
  }
  f.valid_count = static_cast<std::size_t>(std::count(f.valid.begin(), f.valid.end(), 1));
  return f;
}

}  // namespace dreampipe

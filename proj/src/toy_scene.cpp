#include "dreampipe/toy_scene.hpp"

#include <algorithm>
#include <cmath>

#include "dreampipe/rng.hpp"

namespace dreampipe {
namespace {

struct Face {
  Vec3 origin;
  Vec3 a;
  Vec3 b;
};

// Faces whose a x b points outward.
std::vector<Face> box_faces(const BoxSpec& box) {
  const Vec3 d = box.hi - box.lo;
  const Vec3 X(d.x(), 0, 0), Y(0, d.y(), 0), Z(0, 0, d.z());
  const Vec3& o = box.lo;
  std::vector<Face> faces{
      {o, Y, X},            // bottom, -z
      {o + Z, X, Y},        // top, +z
      {o, Z, Y},            // x = lo, -x
      {o + X, Y, Z},        // x = hi, +x
      {o, X, Z},            // y = lo, -y
      {o + Y, Z, X},        // y = hi, +y
  };
  if (box.skip_bottom) faces.erase(faces.begin());
  if (box.inward)
    for (Face& f : faces) std::swap(f.a, f.b);
  return faces;
}

void paint_chart(Image8& atlas, int x0, int y0, int x1, int y1, int chart) {
  std::array<double, 3> base;
  for (int c = 0; c < 3; ++c) base[c] = 60.0 + 150.0 * hash_unit(0x70F, chart, c);
  const int check = 8 + static_cast<int>(hash_unit(0x70F, chart, 7) * 8.0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool dark = (((x - x0) / check) + ((y - y0) / check)) % 2 == 0;
      const double grad = 0.85 + 0.3 * (x - x0) / std::max(1, x1 - x0);
      for (int c = 0; c < 3; ++c)
        atlas(x, y, c) = static_cast<std::uint8_t>(
            std::clamp(std::lround(base[c] * grad * (dark ? 0.75 : 1.0)), 0L, 255L));
    }
}

}  // namespace

void append_box(TexturedMesh& mesh, const BoxSpec& box, int subdivisions, int& chart, int grid,
                int atlas_size, int gutter) {
  const int n = subdivisions;
  const double cell = static_cast<double>(atlas_size) / grid;
  for (const Face& f : box_faces(box)) {
    const int cx = chart % grid;
    const int cy = chart / grid;
    require(cy < grid, ErrorKind::InvalidArgument, "toy scene: atlas grid too small");
    // Texel rectangle of the chart; row 0 of the atlas is v = 1.
    const int tx0 = static_cast<int>(std::lround(cx * cell)) + gutter;
    const int tx1 = static_cast<int>(std::lround((cx + 1) * cell)) - gutter;
    const int ty0 = static_cast<int>(std::lround(cy * cell)) + gutter;
    const int ty1 = static_cast<int>(std::lround((cy + 1) * cell)) - gutter;
    paint_chart(mesh.texture, tx0 - gutter / 2, ty0 - gutter / 2, tx1 + gutter / 2,
                ty1 + gutter / 2, chart);
    const double u0 = static_cast<double>(tx0) / atlas_size;
    const double u1 = static_cast<double>(tx1) / atlas_size;
    const double v_top = 1.0 - static_cast<double>(ty0) / atlas_size;
    const double v_bottom = 1.0 - static_cast<double>(ty1) / atlas_size;

    const auto base_pos = static_cast<std::uint32_t>(mesh.positions.size());
    const auto base_uv = static_cast<std::uint32_t>(mesh.uvs.size());
    const auto normal_id = static_cast<std::uint32_t>(mesh.normals.size());
    mesh.normals.push_back(f.a.cross(f.b).normalized());
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        const double s = static_cast<double>(i) / n;
        const double t = static_cast<double>(j) / n;
        mesh.positions.push_back(f.origin + s * f.a + t * f.b);
        mesh.uvs.emplace_back(u0 + s * (u1 - u0), v_bottom + t * (v_top - v_bottom));
      }
    auto id = [n](int i, int j) { return static_cast<std::uint32_t>(j * (n + 1) + i); };
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const IndexTriple t1{id(i, j), id(i + 1, j), id(i + 1, j + 1)};
        const IndexTriple t2{id(i, j), id(i + 1, j + 1), id(i, j + 1)};
        for (const IndexTriple& t : {t1, t2}) {
          mesh.position_indices.push_back({base_pos + t[0], base_pos + t[1], base_pos + t[2]});
          mesh.uv_indices.push_back({base_uv + t[0], base_uv + t[1], base_uv + t[2]});
          mesh.normal_indices.push_back({normal_id, normal_id, normal_id});
        }
      }
    ++chart;
  }
}

ToyScene build_toy_scene(const ToySceneOptions& options) {
  require(options.subdivisions >= 1 && options.atlas_size >= 64, ErrorKind::InvalidArgument,
          "toy scene needs subdivisions >= 1 and an atlas of at least 64 texels");
  ToyScene scene;
  TexturedMesh& mesh = scene.mesh;
  std::size_t faces = 6;
  for (const BoxSpec& b : options.occluders) faces += b.skip_bottom ? 5 : 6;
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(faces))));
  mesh.texture = Image8(options.atlas_size, options.atlas_size, 3, 0);
  int chart = 0;
  append_box(mesh, {Vec3::Zero(), options.room, true, false}, options.subdivisions, chart, grid,
             options.atlas_size, options.gutter);
  for (const BoxSpec& b : options.occluders)
    append_box(mesh, b, options.subdivisions, chart, grid, options.atlas_size, options.gutter);
  mesh.validate();

  // Candidate capture positions on a grid at eye height, skipping any inside
  // or right next to an occluder.
  const Vec3& r = options.room;
  for (int iy = 1; iy <= 3; ++iy)
    for (int ix = 1; ix <= 3; ++ix) {
      const Vec3 c(r.x() * ix / 4.0, r.y() * iy / 4.0, std::min(1.5, r.z() * 0.55));
      bool blocked = false;
      for (const BoxSpec& b : options.occluders)
        blocked |= (c.array() > b.lo.array() - 0.2).all() && (c.array() < b.hi.array() + 0.2).all();
      if (!blocked) scene.candidate_poses.push_back(CameraPose{c, Mat3::Identity()});
    }
  return scene;
}

}  // namespace dreampipe

#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "dreampipe/projection.hpp"
#include "dreampipe/render.hpp"
#include "dreampipe/toy_scene.hpp"
#include "dreampipe/uv_fields.hpp"
#include "support.hpp"

using namespace dreampipe;
using testsupport::add_quad;
using testsupport::brute_intersect;
using testsupport::finish_mesh;

namespace {

// Independent point-in-UV-triangle search; returns the triangle and
// barycentrics when the point is strictly inside one (margin in UV units).
bool locate_uv(const TexturedMesh& m, const Vec2& p, double margin, std::size_t& tri,
               std::array<double, 3>& w) {
  for (std::size_t i = 0; i < m.triangle_count(); ++i) {
    const IndexTriple& t = m.uv_indices[i];
    const Vec2 a = m.uvs[t[0]], b = m.uvs[t[1]], c = m.uvs[t[2]];
    const double den = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (den == 0.0) continue;
    const double w1 = ((p - a).x() * (c - a).y() - (p - a).y() * (c - a).x()) / den;
    const double w2 = ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x()) / den;
    const double w0 = 1.0 - w1 - w2;
    if (w0 > margin && w1 > margin && w2 > margin) {
      tri = i;
      w = {w0, w1, w2};
      return true;
    }
  }
  return false;
}

TexturedMesh unit_quad(int atlas, double umax = 1.0) {
  TexturedMesh m;
  add_quad(m, {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, 0.0, 0.0, umax, umax);
  finish_mesh(m, atlas);
  return m;
}

// Quad in the plane x = depth facing -X, spanning y, z in [-s, s], with its
// own UV rectangle.
void wall(TexturedMesh& m, double depth, double s, double u0, double u1) {
  add_quad(m, {depth, s, -s}, {depth, -s, -s}, {depth, -s, s}, {depth, s, s}, u0, 0.0, u1, 1.0);
}

Image8 smooth_panorama(int W, int H) {
  Image8 p(W, H, 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double u = (x + 0.5) / W, v = (y + 0.5) / H;
      p(x, y, 0) = static_cast<std::uint8_t>(std::lround(127.5 + 100 * std::sin(2 * kPi * u)));
      p(x, y, 1) = static_cast<std::uint8_t>(std::lround(127.5 + 100 * std::cos(kPi * v)));
      p(x, y, 2) = static_cast<std::uint8_t>(std::lround(127.5 + 60 * std::sin(4 * kPi * u + 2 * kPi * v)));
    }
  return p;
}

}  // namespace

TEST_CASE("full-atlas quad: texel positions are the affine image of UV") {
  const TexturedMesh m = unit_quad(16);
  const UvFieldSet f = rasterize_uv_fields(m);
  CHECK(f.valid_count == 256u);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      REQUIRE(f.is_valid(x, y));
      const Vec2 uv = texel_center_uv(x, y, 16, 16);
      CHECK((f.position_at(x, y) - Vec3(uv.x(), uv.y(), 0)).norm() < 1e-12);
      CHECK((f.normal_at(x, y) - Vec3(0, 0, 1)).norm() < 1e-12);
    }
  // Texel (4, 11) has its centre at UV (0.28125, 0.28125).
  CHECK((f.position_at(4, 11) - Vec3(0.28125, 0.28125, 0)).norm() < 1e-12);
}

TEST_CASE("texels outside every chart are invalid") {
  const TexturedMesh m = unit_quad(16, 0.5);
  const UvFieldSet f = rasterize_uv_fields(m);
  CHECK(f.valid_count == 64u);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const Vec2 uv = texel_center_uv(x, y, 16, 16);
      CHECK(f.is_valid(x, y) == (uv.x() < 0.5 && uv.y() < 0.5));
      if (!f.is_valid(x, y)) CHECK(f.triangle[f.index(x, y)] == -1);
    }
}

TEST_CASE("degenerate UV triangles are skipped and counted") {
  TexturedMesh m = unit_quad(8);
  m.positions.push_back({0, 0, 1});
  m.uvs.push_back({0.5, 0.5});
  const auto p = static_cast<std::uint32_t>(m.positions.size() - 1);
  const auto t = static_cast<std::uint32_t>(m.uvs.size() - 1);
  m.position_indices.push_back({0, 1, p});
  m.uv_indices.push_back({t, t, t});
  finish_mesh(m);
  const UvFieldSet f = rasterize_uv_fields(m);
  CHECK(f.skipped_degenerate == 1u);
  CHECK(f.valid_count == 64u);
}

TEST_CASE("1000-triangle mesh: texel positions match a brute-force UV lookup") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  TexturedMesh m;
  const int cols = 25, rows = 20;
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) {
      const double u0 = static_cast<double>(i) / cols, u1 = static_cast<double>(i + 1) / cols;
      const double v0 = static_cast<double>(j) / rows, v1 = static_cast<double>(j + 1) / rows;
      for (int half = 0; half < 2; ++half) {
        const auto b = static_cast<std::uint32_t>(m.positions.size());
        for (int k = 0; k < 3; ++k) m.positions.emplace_back(d(rng), d(rng), d(rng));
        if (half == 0) m.uvs.insert(m.uvs.end(), {Vec2(u0, v0), Vec2(u1, v0), Vec2(u1, v1)});
        else m.uvs.insert(m.uvs.end(), {Vec2(u0, v0), Vec2(u1, v1), Vec2(u0, v1)});
        m.position_indices.push_back({b, b + 1, b + 2});
        m.uv_indices.push_back({b, b + 1, b + 2});
      }
    }
  REQUIRE(m.triangle_count() == 1000u);
  finish_mesh(m, 256);
  const UvFieldSet f = rasterize_uv_fields(m);

  std::vector<std::array<int, 2>> valid;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x)
      if (f.is_valid(x, y)) valid.push_back({x, y});
  REQUIRE(valid.size() > 500u);
  std::shuffle(valid.begin(), valid.end(), rng);
  int checked = 0;
  for (const auto& [x, y] : valid) {
    std::size_t tri;
    std::array<double, 3> w;
    if (!locate_uv(m, texel_center_uv(x, y, 256, 256), 1e-9, tri, w)) continue;
    const IndexTriple& t = m.position_indices[tri];
    const Vec3 want = w[0] * m.positions[t[0]] + w[1] * m.positions[t[1]] + w[2] * m.positions[t[2]];
    CHECK(f.triangle[f.index(x, y)] == static_cast<std::int32_t>(tri));
    CHECK((f.position_at(x, y) - want).norm() < 1e-6);
    if (++checked == 500) break;
  }
  CHECK(checked == 500);

  // Every valid texel lies inside some UV footprint (closed).
  for (const auto& [x, y] : valid) {
    std::size_t tri;
    std::array<double, 3> w;
    CHECK(locate_uv(m, texel_center_uv(x, y, 256, 256), -1e-12, tri, w));
  }
}

TEST_CASE("visibility: lone quad facing the camera is fully visible") {
  TexturedMesh m;
  wall(m, 2.0, 1.0, 0.0, 1.0);
  finish_mesh(m, 32);
  const UvFieldSet f = rasterize_uv_fields(m);
  const PanoramaFrame frame = render_panorama(m, CameraPose{}, 1024, 512);
  const MaskImage vis = compute_visibility_mask(f, frame);
  CHECK(vis.space == MaskSpace::Uv);
  CHECK(vis.count_on() == f.valid_count);
}

TEST_CASE("visibility: quad behind a larger quad is invisible") {
  TexturedMesh m;
  wall(m, 3.0, 0.5, 0.0, 0.5);   // hidden
  wall(m, 1.5, 1.0, 0.5, 1.0);   // occluder
  finish_mesh(m, 32);
  const UvFieldSet f = rasterize_uv_fields(m);
  const PanoramaFrame frame = render_panorama(m, CameraPose{}, 1024, 512);
  const MaskImage vis = compute_visibility_mask(f, frame);
  std::size_t hidden_visible = 0, front_visible = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      if (!f.is_valid(x, y)) continue;
      if (x < 16) hidden_visible += vis.on(x, y);
      else front_visible += vis.on(x, y);
    }
  CHECK(hidden_visible == 0u);
  CHECK(front_visible == 16u * 32u);
  // Invalid texels are never visible.
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (!f.is_valid(x, y)) CHECK_FALSE(vis.on(x, y));
}

TEST_CASE("visibility agrees with a ray-cast oracle on a two-box room") {
  ToySceneOptions opt;
  opt.atlas_size = 256;
  const ToyScene scene = build_toy_scene(opt);
  const TexturedMesh& m = scene.mesh;
  const UvFieldSet f = rasterize_uv_fields(m);
  CameraPose pose;
  pose.center = Vec3(2.5, 2.0, 1.4);
  const PanoramaFrame frame = render_panorama(m, pose, 2048, 1024);
  const MaskImage vis = compute_visibility_mask(f, frame, 0.01);
  std::size_t agree = 0, occluded = 0;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      if (!f.is_valid(x, y)) continue;
      const Vec3 diff = f.position_at(x, y) - pose.center;
      const double r = diff.norm();
      const auto h = brute_intersect(m.positions, m.position_indices, pose.center, diff / r);
      const bool want = h && h->t >= r - 0.01;
      occluded += !want;
      agree += vis.on(x, y) == want;
    }
  CHECK(occluded > 1000u);
  CHECK(static_cast<double>(agree) / f.valid_count >= 0.995);
}

TEST_CASE("visibility is monotone in epsilon") {
  const ToyScene scene = build_toy_scene({.atlas_size = 128});
  const UvFieldSet f = rasterize_uv_fields(scene.mesh);
  CameraPose pose;
  pose.center = Vec3(3.0, 2.5, 1.2);
  const PanoramaFrame frame = render_panorama(scene.mesh, pose, 512, 256);
  MaskImage prev = compute_visibility_mask(f, frame, 0.001);
  for (double eps : {0.005, 0.01, 0.05, 0.2}) {
    const MaskImage cur = compute_visibility_mask(f, frame, eps);
    for (std::size_t i = 0; i < cur.values.data().size(); ++i)
      if (prev.values.data()[i] >= 0.5f) CHECK(cur.values.data()[i] >= 0.5f);
    CHECK(cur.count_on() >= prev.count_on());
    prev = cur;
  }
}

TEST_CASE("projection from panorama to atlas") {
  const ToyScene scene = build_toy_scene({.atlas_size = 256});
  const TexturedMesh& m = scene.mesh;
  const UvFieldSet f = rasterize_uv_fields(m);
  CameraPose pose;
  pose.center = Vec3(2.4, 1.9, 1.5);
  const Bvh bvh(m);
  const PanoramaFrame frame = render_panorama(m, bvh, pose, 1024, 512);
  const MaskImage vis = compute_visibility_mask(f, frame);

  SUBCASE("constant panorama writes that constant") {
    Image8 atlas(256, 256, 3, 0);
    project_panorama_to_uv(f, pose, Image8(1024, 512, 3, 77), vis, atlas);
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x)
        for (int c = 0; c < 3; ++c) CHECK(atlas(x, y, c) == (vis.on(x, y) ? 77 : 0));
  }
  SUBCASE("zero mask leaves the atlas untouched") {
    Image8 atlas = m.texture;
    project_panorama_to_uv(f, pose, smooth_panorama(1024, 512),
                           MaskImage(256, 256, MaskSpace::Uv, 0.0f), atlas);
    CHECK(atlas == m.texture);
  }
  SUBCASE("panorama resolution may differ from the render") {
    Image8 atlas(256, 256, 3, 0);
    project_panorama_to_uv(f, pose, Image8(3072, 1536, 3, 9), vis, atlas);
    CHECK(atlas(0, 0, 0) == (vis.on(0, 0) ? 9 : 0));
  }
  SUBCASE("projection is idempotent") {
    const Image8 pano = smooth_panorama(1024, 512);
    Image8 once(256, 256, 3, 0);
    project_panorama_to_uv(f, pose, pano, vis, once);
    Image8 twice = once;
    project_panorama_to_uv(f, pose, pano, vis, twice);
    CHECK(twice == once);
  }
  SUBCASE("project then render reproduces the panorama on visible pixels") {
    const Image8 pano = smooth_panorama(1024, 512);
    Image8 atlas(256, 256, 3, 0);
    project_panorama_to_uv(f, pose, pano, vis, atlas);
    const PanoramaFrame small = render_panorama(m, bvh, pose, 512, 256);
    const Image8 back = shade_texture(small.hits, m, atlas);
    const MaskImage seen = shade_uv_mask(small.hits, m, vis);
    const Image8 ref = smooth_panorama(512, 256);
    double total = 0;
    std::size_t n = 0;
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 512; ++x) {
        if (!seen.on(x, y)) continue;
        for (int c = 0; c < 3; ++c) total += std::abs(back(x, y, c) - ref(x, y, c));
        n += 3;
      }
    REQUIRE(n > 0);
    CHECK(total / n <= 3.0);
  }
}

TEST_CASE("colour-coded faces land on their own texels") {
  // Every wall of a room gets a unique solid colour in the panorama; each
  // written texel must carry the colour of the face it belongs to.
  TexturedMesh m;
  const double s = 2.0;
  const std::array<std::array<std::uint8_t, 3>, 4> colors{{{200, 0, 0}, {0, 200, 0}, {0, 0, 200}, {200, 200, 0}}};
  wall(m, s, s, 0.0, 0.25);
  add_quad(m, {-s, -s, -s}, {-s, s, -s}, {-s, s, s}, {-s, -s, s}, 0.25, 0.0, 0.5, 1.0);
  add_quad(m, {-s, s, -s}, {s, s, -s}, {s, s, s}, {-s, s, s}, 0.5, 0.0, 0.75, 1.0);
  add_quad(m, {s, -s, -s}, {-s, -s, -s}, {-s, -s, s}, {s, -s, s}, 0.75, 0.0, 1.0, 1.0);
  finish_mesh(m, 128);
  m.texture = Image8(128, 128, 3);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      for (int c = 0; c < 3; ++c) m.texture(x, y, c) = colors[x / 32][c];
  CameraPose pose;
  pose.center = Vec3(0.3, -0.2, 0.1);
  const PanoramaFrame frame = render_panorama(m, pose, 2048, 1024);
  // Colour straight from the hit face, so the panorama has no texture blur.
  Image8 pano(2048, 1024, 3, 0);
  for (int y = 0; y < 1024; ++y)
    for (int x = 0; x < 2048; ++x) {
      const int tri = frame.hits.triangle[frame.hits.index(x, y)];
      if (tri >= 0)
        for (int c = 0; c < 3; ++c) pano(x, y, c) = colors[tri / 2][c];
    }
  const UvFieldSet f = rasterize_uv_fields(m);
  const MaskImage vis = compute_visibility_mask(f, frame);
  Image8 atlas(128, 128, 3, 0);
  project_panorama_to_uv(f, pose, pano, vis, atlas);
  for (int face = 0; face < 4; ++face) {
    std::size_t written = 0, exact = 0;
    // The outermost texel rings sit within a panorama pixel of a corner or
    // the open top and bottom edges, where bilinear sampling reaches past
    // the wall.
    for (int y = 1; y < 127; ++y)
      for (int x = face * 32 + 1; x < face * 32 + 31; ++x) {
        if (!vis.on(x, y)) continue;
        ++written;
        exact += atlas(x, y, 0) == colors[face][0] && atlas(x, y, 1) == colors[face][1] &&
                 atlas(x, y, 2) == colors[face][2];
      }
    CHECK(written > 500u);
    CHECK(exact == written);
  }
}

TEST_CASE("texel dilation") {
  SUBCASE("radius 0 is the identity") {
    Image8 a(8, 8, 3, 5);
    MaskImage w(8, 8, MaskSpace::Uv, 0.0f);
    w(3, 3) = 1.0f;
    const MaskImage before = w;
    CHECK(dilate_texels(a, w, 0) == a);
    CHECK(w.values == before.values);
  }
  SUBCASE("single texel, radius 2, fills a 5x5 square") {
    Image8 a(9, 9, 3, 0);
    for (int c = 0; c < 3; ++c) a(4, 4, c) = static_cast<std::uint8_t>(50 + c);
    MaskImage w(9, 9, MaskSpace::Uv, 0.0f);
    w(4, 4) = 1.0f;
    const Image8 out = dilate_texels(a, w, 2);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) {
        const bool in = std::abs(x - 4) <= 2 && std::abs(y - 4) <= 2;
        CHECK(w.on(x, y) == in);
        for (int c = 0; c < 3; ++c) CHECK(out(x, y, c) == (in ? 50 + c : 0));
      }
  }
  SUBCASE("dilation removes background fringe at chart borders") {
    const ToyScene scene = build_toy_scene({.atlas_size = 256});
    const TexturedMesh& m = scene.mesh;
    const UvFieldSet f = rasterize_uv_fields(m);
    Image8 atlas(256, 256, 3, 0);
    MaskImage written(256, 256, MaskSpace::Uv, 0.0f);
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x)
        if (f.is_valid(x, y)) {
          written(x, y) = 1.0f;
          atlas(x, y, 0) = 200, atlas(x, y, 1) = 120, atlas(x, y, 2) = 40;
        }
    const Bvh bvh(m);
    CameraPose pose;
    pose.center = Vec3(2.5, 2.0, 1.5);
    const HitBuffer hits = trace_panorama(bvh, pose, 2048, 1024);
    auto fringe = [&](const Image8& tex) {
      const Image8 img = shade_texture(hits, m, tex);
      std::size_t n = 0;
      for (int y = 0; y < 1024; ++y)
        for (int x = 0; x < 2048; ++x)
          if (hits.hit(x, y) && (img(x, y, 0) != 200 || img(x, y, 1) != 120 || img(x, y, 2) != 40)) ++n;
      return n;
    };
    CHECK(fringe(atlas) > 0u);
    const Image8 grown = dilate_texels(atlas, written, 2);
    CHECK(fringe(grown) == 0u);
  }
}

#include <cmath>
#include <random>

#include "doctest.h"
#include "dreampipe/filters.hpp"
#include "dreampipe/masks.hpp"
#include "dreampipe/render.hpp"
#include "dreampipe/uv_fields.hpp"
#include "support.hpp"

using namespace dreampipe;
using testsupport::add_quad;
using testsupport::finish_mesh;

namespace {

ImageF random_image(std::mt19937_64& rng, int w, int h, int ch, double p_on = -1.0) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageF img(w, h, ch);
  for (float& v : img.data()) v = p_on < 0 ? u(rng) : (u(rng) < p_on ? 1.0f : 0.0f);
  return img;
}

MaskImage random_mask(std::mt19937_64& rng, int w, int h) {
  MaskImage m;
  m.values = random_image(rng, w, h, 1, 0.5);
  m.space = MaskSpace::Uv;
  return m;
}

ImageF step_distance(int w, int h, int split) {
  ImageF d(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) d(x, y) = x < split ? 1.0f : 2.0f;
  return d;
}

}  // namespace

TEST_CASE("default mask constants") {
  const MaskParams p;
  CHECK(p.grazing_cutoff_deg == 10.0);
  CHECK(p.max_surface_distance == 2.5);
  CHECK(p.depth_edge_threshold == 0.1);
  CHECK(p.scale_for(2048) == 2.0);
  MaskParams bad;
  bad.grazing_cutoff_deg = 90.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = MaskParams{};
  bad.dilation_radius = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("depth edges: constant distance gives an empty mask") {
  const MaskImage m = detect_depth_edges(ImageF(256, 128, 1, 3.0f), MaskParams{});
  CHECK(m.space == MaskSpace::Panorama);
  for (float v : m.values.data()) CHECK(v == 0.0f);
}

TEST_CASE("depth edges: two half-planes give a band of the expected width") {
  MaskParams p;
  p.reference_width = 1024;
  const int W = 1024, H = 64;
  const MaskImage m = detect_depth_edges(step_distance(W, H, 512), p);
  // The step sits between columns 511 and 512; Sobel flags both, and the
  // disk dilation adds the radius on either side.
  for (int y : {0, 31, 63}) {
    int width = 0;
    for (int x = 400; x < 624; ++x) width += m(x, y) >= 0.5f;
    const double r = p.dilation_radius;
    CHECK(width >= 2 * r);
    CHECK(width <= 2 * r + 2 + 2 * p.blur_sigma);
    CHECK(m(511, y) > 0.9f);
    CHECK(m(300, y) == 0.0f);
  }
  // The same step wraps around at u = 0.
  CHECK(m(0, 10) >= 0.5f);
  CHECK(m(W - 1, 10) >= 0.5f);
}

TEST_CASE("depth edges: a discontinuity on the seam matches one in the interior") {
  const MaskParams p;
  const int W = 512, H = 64;
  // Depth 1 on columns [100, 300), 2 elsewhere, then rolled so one edge sits at the seam.
  ImageF d(W, H, 1, 2.0f);
  for (int y = 0; y < H; ++y)
    for (int x = 100; x < 300; ++x) d(x, y) = 1.0f;
  const MaskImage interior = detect_depth_edges(d, p);
  const MaskImage seam = detect_depth_edges(roll_columns(d, -100), p);
  CHECK(roll_columns(interior.values, -100) == seam.values);
}

TEST_CASE("depth edges: hit/miss borders count as edges") {
  ImageF d(128, 64, 1, 2.0f);
  for (int y = 0; y < 64; ++y)
    for (int x = 64; x < 128; ++x) d(x, y) = kMissDistance;
  MaskParams p;
  p.reference_width = 0;
  p.dilation_radius = 1.0;
  p.blur_sigma = 0.5;
  const MaskImage m = detect_depth_edges(d, p);
  CHECK(m(63, 30) >= 0.5f);
  CHECK(m(64, 30) >= 0.5f);
  CHECK(m(30, 30) == 0.0f);
  CHECK(m(96, 30) == 0.0f);
}

TEST_CASE("panorama filters commute with horizontal cyclic shifts exactly") {
  std::mt19937_64 rng(71);
  const MaskParams p;
  for (int shift : {1, 17, 128, 255}) {
    const ImageF img = random_image(rng, 256, 64, 3);
    CHECK(gaussian_blur(roll_columns(img, shift), 2.5, true) == roll_columns(gaussian_blur(img, 2.5, true), shift));
    const ImageF bin = random_image(rng, 256, 64, 1, 0.02);
    CHECK(dilate_disk(roll_columns(bin, shift), 4.5, true) == roll_columns(dilate_disk(bin, 4.5, true), shift));
    ImageF dist = random_image(rng, 256, 64, 1);
    for (float& v : dist.data()) v = v < 0.05f ? kMissDistance : 1.0f + 3.0f * v;
    CHECK(detect_depth_edges(roll_columns(dist, shift), p).values ==
          roll_columns(detect_depth_edges(dist, p).values, shift));
    MaskImage painted;
    painted.space = MaskSpace::Panorama;
    painted.values = random_image(rng, 256, 64, 1, 0.97);
    MaskImage rolled = painted;
    rolled.values = roll_columns(painted.values, shift);
    CHECK(inpaint_request_mask(rolled, p).values == roll_columns(inpaint_request_mask(painted, p).values, shift));
  }
}

TEST_CASE("distance transform and disk dilation") {
  ImageF m(64, 32, 1, 0.0f);
  m(10, 10) = 1.0f;
  const ImageF d2 = squared_distance_transform(m, true);
  CHECK(d2(10, 10) == 0.0f);
  CHECK(d2(13, 14) == 25.0f);
  CHECK(d2(60, 10) == 196.0f);  // 14 columns away across the seam
  const ImageF grown = dilate_disk(m, 3.0, false);
  int n = 0;
  for (float v : grown.data()) n += v >= 0.5f;
  // Lattice points within radius 3.
  int want = 0;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) want += dx * dx + dy * dy <= 9;
  CHECK(n == want);
}

TEST_CASE("gaussian blur preserves constants and mass") {
  const ImageF c(64, 32, 2, 0.25f);
  const ImageF b = gaussian_blur(c, 3.0, true);
  for (float v : b.data()) CHECK(v == doctest::Approx(0.25f).epsilon(1e-5));
  ImageF dot(64, 32, 1, 0.0f);
  dot(5, 16) = 1.0f;
  double mass = 0;
  const ImageF spread = gaussian_blur(dot, 2.0, true);
  for (float v : spread.data()) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("uv depth-edge mask") {
  // Far wall at x = 3 and a small near quad at x = 1 in front of it.
  TexturedMesh m;
  add_quad(m, {3, 2, -2}, {3, -2, -2}, {3, -2, 2}, {3, 2, 2}, 0.0, 0.0, 0.5, 1.0);
  add_quad(m, {1, 0.3, -0.3}, {1, -0.3, -0.3}, {1, -0.3, 0.3}, {1, 0.3, 0.3}, 0.5, 0.0, 1.0, 1.0);
  finish_mesh(m, 128);
  const UvFieldSet f = rasterize_uv_fields(m);
  const PanoramaFrame frame = render_panorama(m, CameraPose{}, 1024, 512);
  const int W = frame.width(), H = frame.height();

  SUBCASE("empty edge panorama permits every valid texel") {
    const MaskImage dep = uv_depth_edge_mask(f, frame, MaskImage(W, H, MaskSpace::Panorama, 0.0f));
    CHECK(dep.space == MaskSpace::Uv);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) CHECK(dep.on(x, y) == f.is_valid(x, y));
  }
  SUBCASE("full edge panorama forbids everything") {
    const MaskImage dep = uv_depth_edge_mask(f, frame, MaskImage(W, H, MaskSpace::Panorama, 1.0f));
    CHECK(dep.count_on() == 0u);
  }
  SUBCASE("space mismatch is rejected") {
    CHECK_THROWS_AS(uv_depth_edge_mask(f, frame, MaskImage(W, H, MaskSpace::Uv, 0.0f)), Error);
  }
  SUBCASE("far-wall texels next to the silhouette are rejected, the rest kept") {
    MaskParams p;
    p.reference_width = 0;
    p.dilation_radius = 4.0;
    p.blur_sigma = 1.0;
    const MaskImage edges = detect_depth_edges(frame.distance, p);
    const MaskImage dep = uv_depth_edge_mask(f, frame, edges);
    // Hand-built expectation: the near quad covers directions with
    // |y/x|, |z/x| <= 0.3 and the far wall those within 2/3; the wall's own
    // outline against empty space is a silhouette too. Measure the distance
    // in panorama pixels from each far-wall texel's pixel to the nearest
    // pixel of another coverage state.
    auto covered = [&](int px, int py) {
      const Vec3 d = testsupport::reference_direction((px + 0.5) / W, (py + 0.5) / H);
      if (d.x() <= 0) return 0;
      const double ay = std::abs(d.y() / d.x()), az = std::abs(d.z() / d.x());
      if (ay <= 0.3 && az <= 0.3) return 2;
      return ay <= 2.0 / 3.0 && az <= 2.0 / 3.0 ? 1 : 0;
    };
    int rejected = 0, accepted = 0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 64; ++x) {
        if (!f.is_valid(x, y)) continue;
        EquirectCoord e;
        double dist;
        REQUIRE(project_to_equirect(frame.pose, f.position_at(x, y), e, dist));
        const auto [px, py] = equirect_to_nearest_pixel(e, W, H);
        const int self = covered(px, py);
        if (self != 1) continue;  // hidden behind the near quad
        double nearest = 1e9;
        for (int dy = -12; dy <= 12; ++dy)
          for (int dx = -12; dx <= 12; ++dx) {
            const int qx = px + dx, qy = py + dy;
            if (qy < 0 || qy >= H) continue;
            if (covered((qx + W) % W, qy) != self) nearest = std::min(nearest, std::hypot(dx, dy));
          }
        if (nearest <= 3.0) {
          CHECK_FALSE(dep.on(x, y));
          ++rejected;
        } else if (nearest >= 9.0) {
          CHECK(dep.on(x, y));
          ++accepted;
        }
      }
    CHECK(rejected > 10);
    CHECK(accepted > 1000);
  }
}

TEST_CASE("safe-view mask") {
  SUBCASE("wall facing the camera at 1 m is safe; floor at 3 m is not") {
    TexturedMesh m;
    add_quad(m, {1, 0.2, -0.2}, {1, -0.2, -0.2}, {1, -0.2, 0.2}, {1, 0.2, 0.2}, 0.0, 0.0, 0.5, 1.0);
    add_quad(m, {2.9, -0.1, -1}, {3.1, -0.1, -1}, {3.1, 0.1, -1}, {2.9, 0.1, -1}, 0.5, 0.0, 1.0, 1.0);
    finish_mesh(m, 32);
    const UvFieldSet f = rasterize_uv_fields(m);
    REQUIRE(f.normal_at(4, 16).x() < -0.99);  // facing the camera
    const MaskImage s = safe_view_mask(f, CameraPose{}, MaskParams{});
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        if (!f.is_valid(x, y)) continue;
        CHECK(s.on(x, y) == (x < 16));
      }
  }
  SUBCASE("back faces are not safe") {
    TexturedMesh m;
    add_quad(m, {1, -0.2, -0.2}, {1, 0.2, -0.2}, {1, 0.2, 0.2}, {1, -0.2, 0.2});
    finish_mesh(m, 16);
    const UvFieldSet f = rasterize_uv_fields(m);
    CHECK(safe_view_mask(f, CameraPose{}, MaskParams{}).count_on() == 0u);
  }
  SUBCASE("grazing isoline on a floor plane") {
    // Camera 0.3 m above a floor: sin(grazing) = 0.3 / d, so the cutoff is at
    // d = 0.3 / sin(10 deg), well inside the 2.5 m distance limit.
    TexturedMesh m;
    add_quad(m, {-2, -2, 0}, {2, -2, 0}, {2, 2, 0}, {-2, 2, 0});
    finish_mesh(m, 256);
    const UvFieldSet f = rasterize_uv_fields(m);
    CameraPose pose;
    pose.center = Vec3(0, 0, 0.3);
    const MaskImage s = safe_view_mask(f, pose, MaskParams{});
    const double rho_star = std::sqrt(std::pow(0.3 / std::sin(deg_to_rad(10.0)), 2) - 0.09);
    const double texel = 4.0 / 256;
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x) {
        const double rho = f.position_at(x, y).head<2>().norm();
        if (rho < rho_star - texel) CHECK(s.on(x, y));
        if (rho > rho_star + texel) CHECK_FALSE(s.on(x, y));
      }
  }
}

TEST_CASE("confidential mask is the intersection") {
  const MaskImage one(8, 8, MaskSpace::Uv, 1.0f);
  CHECK(confidential_mask(one, one, one).count_on() == 64u);
  MaskImage hole = one;
  hole(3, 4) = 0.0f;
  for (int k = 0; k < 3; ++k) {
    const MaskImage c = k == 0 ? confidential_mask(hole, one, one)
                        : k == 1 ? confidential_mask(one, hole, one)
                                 : confidential_mask(one, one, hole);
    CHECK_FALSE(c.on(3, 4));
    CHECK(c.count_on() == 63u);
  }
  std::mt19937_64 rng(5);
  const MaskImage a = random_mask(rng, 64, 64), b = random_mask(rng, 64, 64), c = random_mask(rng, 64, 64);
  const MaskImage conf = confidential_mask(a, b, c);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      CHECK(conf.on(x, y) == (a.on(x, y) && b.on(x, y) && c.on(x, y)));
      CHECK(conf(x, y) <= std::min({a(x, y), b(x, y), c(x, y)}));
    }
  CHECK_THROWS_AS(confidential_mask(a, b, MaskImage(32, 64, MaskSpace::Uv)), Error);
  CHECK_THROWS_AS(confidential_mask(a, b, MaskImage(64, 64, MaskSpace::Panorama)), Error);
}

TEST_CASE("mask union and subtraction") {
  std::mt19937_64 rng(6);
  const MaskImage a = random_mask(rng, 32, 32), b = random_mask(rng, 32, 32);
  const MaskImage u = mask_union(a, b), d = mask_subtract(a, b);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      CHECK(u(x, y) == std::max(a(x, y), b(x, y)));
      CHECK(d.on(x, y) == (a.on(x, y) && !b.on(x, y)));
    }
}

TEST_CASE("inpaint request mask") {
  const MaskParams p;
  const int W = 1024, H = 512;
  SUBCASE("fully painted needs nothing") {
    const MaskImage m = inpaint_request_mask(MaskImage(W, H, MaskSpace::Panorama, 1.0f), p);
    for (float v : m.values.data()) CHECK(v == 0.0f);
  }
  SUBCASE("fully unpainted needs everything") {
    const MaskImage m = inpaint_request_mask(MaskImage(W, H, MaskSpace::Panorama, 0.0f), p);
    for (float v : m.values.data()) CHECK(v == doctest::Approx(1.0f));
  }
  SUBCASE("disk hole grows by the dilation radius") {
    MaskImage painted(W, H, MaskSpace::Panorama, 1.0f);
    const double r = 40.0;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        if (std::hypot(x - 500.0, y - 256.0) <= r) painted(x, y) = 0.0f;
    const MaskImage m = inpaint_request_mask(painted, p);
    const double want = kPi * std::pow(r + p.dilation_radius, 2);
    const double got = static_cast<double>(m.count_on());
    CHECK(std::abs(got - want) / want < 0.05);
  }
  SUBCASE("UV-space input is rejected") {
    CHECK_THROWS_AS(inpaint_request_mask(MaskImage(8, 4, MaskSpace::Uv, 1.0f), p), Error);
  }
}

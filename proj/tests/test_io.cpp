#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "doctest.h"
#include "dreampipe/image_io.hpp"
#include "dreampipe/mesh_io.hpp"
#include "support.hpp"

using namespace dreampipe;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("2x2 checkerboard PNG round trips bit-exactly") {
  Image8 img(2, 2, 3, 0);
  for (int c = 0; c < 3; ++c) img(0, 0, c) = img(1, 1, c) = 255;
  CHECK(decode_png(encode_png(img)) == img);

  Image8 gray(5, 3, 1);
  Image8 rgba(5, 3, 4);
  for (std::size_t i = 0; i < gray.data().size(); ++i) gray.data()[i] = static_cast<std::uint8_t>(i * 17);
  for (std::size_t i = 0; i < rgba.data().size(); ++i) rgba.data()[i] = static_cast<std::uint8_t>(i * 7);
  CHECK(decode_png(encode_png(gray)) == gray);
  CHECK(decode_png(encode_png(rgba)) == rgba);
}

TEST_CASE("PFM keeps distances and the miss sentinel bit-exactly") {
  ImageF d(3, 1, 1);
  d(0, 0) = 1.0f;
  d(1, 0) = 2.5f;
  d(2, 0) = -1.0f;
  const ImageF back = decode_pfm(encode_pfm(d));
  CHECK(back == d);
  ImageF inf(1, 1, 1, std::numeric_limits<float>::infinity());
  CHECK(std::isinf(decode_pfm(encode_pfm(inf))(0, 0)));
}

TEST_CASE("random 512x256 float image round trips with zero error") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1e3f, 1e3f);
  for (int ch : {1, 3}) {
    ImageF img(512, 256, ch);
    for (float& v : img.data()) v = u(rng);
    CHECK(decode_pfm(encode_pfm(img)) == img);
  }
}

TEST_CASE("PFM rows are stored bottom to top") {
  ImageF img(1, 2, 1);
  img(0, 0) = 1.0f;  // top
  img(0, 1) = 2.0f;
  const auto bytes = encode_pfm(img);
  float first;
  std::memcpy(&first, bytes.data() + bytes.size() - 8, 4);
  CHECK(first == 2.0f);
}

TEST_CASE("malformed images are format errors") {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
  CHECK_THROWS_AS(decode_png(junk), Error);
  CHECK_THROWS_AS(decode_pfm(junk), Error);
  try {
    decode_pfm(junk);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
  }
  CHECK_THROWS_AS(load_png("/nonexistent/x.png"), Error);
}

TEST_CASE("unit quad OBJ without normals") {
  const fs::path dir = testsupport::scratch_dir("quad");
  write_text(dir / "quad.obj",
             "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
             "vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n"
             "f 1/1 2/2 3/3 4/4\n");
  MeshLoadOptions opt;
  opt.default_atlas_size = 32;
  const TexturedMesh m = load_mesh(dir / "quad.obj", opt);
  CHECK(m.triangle_count() == 2);
  CHECK(m.positions.size() == 4);
  CHECK(m.atlas_width() == 32);
  double area = 0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) area += m.uv_area(t);
  CHECK(area == doctest::Approx(1.0));
  for (const Vec3& n : m.normals) CHECK((n - Vec3(0, 0, 1)).norm() < 1e-12);
  m.validate();
  fs::remove_all(dir);
}

TEST_CASE("OBJ errors are reported as format errors") {
  const fs::path dir = testsupport::scratch_dir("badobj");
  write_text(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 3\n");
  CHECK_THROWS_AS(load_mesh(dir / "bad.obj"), Error);
  write_text(dir / "bad2.obj", "v 0 0 0\nvt 0 0\nf 1/1 7/1 1/1\n");
  CHECK_THROWS_AS(load_mesh(dir / "bad2.obj"), Error);
  fs::remove_all(dir);
}

TEST_CASE("save then load reproduces a random mesh and its texture bit-exactly") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> d(-10.0, 10.0);
  std::uniform_real_distribution<double> t(0.0, 1.0);
  TexturedMesh m;
  for (int i = 0; i < 1000; ++i) {
    const auto b = static_cast<std::uint32_t>(m.positions.size());
    for (int k = 0; k < 3; ++k) {
      m.positions.emplace_back(d(rng), d(rng), d(rng));
      m.uvs.emplace_back(t(rng), t(rng));
    }
    m.position_indices.push_back({b, b + 1, b + 2});
    m.uv_indices.push_back({b, b + 1, b + 2});
  }
  compute_vertex_normals(m);
  m.texture = Image8(16, 8, 3);
  for (std::size_t i = 0; i < m.texture.data().size(); ++i)
    m.texture.data()[i] = static_cast<std::uint8_t>(rng());

  const fs::path dir = testsupport::scratch_dir("roundtrip");
  save_mesh_with_texture(m, m.texture, nullptr, dir / "mesh.obj");
  const TexturedMesh r = load_mesh(dir / "mesh.obj");
  REQUIRE(r.positions.size() == m.positions.size());
  REQUIRE(r.uvs.size() == m.uvs.size());
  REQUIRE(r.triangle_count() == m.triangle_count());
  bool exact = true;
  for (std::size_t i = 0; i < m.positions.size(); ++i)
    for (int k = 0; k < 3; ++k) exact &= same_bits(r.positions[i][k], m.positions[i][k]);
  for (std::size_t i = 0; i < m.uvs.size(); ++i)
    for (int k = 0; k < 2; ++k) exact &= same_bits(r.uvs[i][k], m.uvs[i][k]);
  CHECK(exact);
  CHECK(r.position_indices == m.position_indices);
  CHECK(r.texture == m.texture);
  fs::remove_all(dir);
}

TEST_CASE("alpha masks") {
  const fs::path dir = testsupport::scratch_dir("alpha");
  TexturedMesh m;
  testsupport::add_quad(m, {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0});
  testsupport::finish_mesh(m, 20);

  SUBCASE("all-ones mask gives a fully opaque RGBA atlas") {
    const MaskImage ones = window_alpha_mask(20, 20, {});
    CHECK(ones.count_on() == 400u);
    save_mesh_with_texture(m, m.texture, &ones, dir / "a.obj");
    const Image8 png = load_png(dir / "a.png");
    REQUIRE(png.channels() == 4);
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) CHECK(png(x, y, 3) == 255);
  }
  SUBCASE("window rectangle zeroes exactly the texels it covers") {
    // u in [0.25, 0.5), v in [0.5, 1.0): 5 columns x 10 rows of texel centres.
    const std::vector<UvRect> win{{0.25, 0.5, 0.5, 1.0}};
    const MaskImage a = window_alpha_mask(20, 20, win);
    std::size_t zeros = 0;
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) {
        const Vec2 uv = texel_center_uv(x, y, 20, 20);
        const bool inside = uv.x() >= 0.25 && uv.x() < 0.5 && uv.y() >= 0.5 && uv.y() < 1.0;
        CHECK((a(x, y) == 0.0f) == inside);
        zeros += a(x, y) == 0.0f;
      }
    CHECK(zeros == 50u);
  }
  fs::remove_all(dir);
}

TEST_CASE("masks load from PNG scaled to [0,1]") {
  const fs::path dir = testsupport::scratch_dir("mask");
  MaskImage m(4, 2, MaskSpace::Uv, 0.0f);
  m(1, 0) = 1.0f;
  save_mask_png(dir / "m.png", m);
  const MaskImage r = load_mask(dir / "m.png", MaskSpace::Uv);
  CHECK(r.values == m.values);
  CHECK(r.space == MaskSpace::Uv);
  fs::remove_all(dir);
}

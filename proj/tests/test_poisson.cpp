#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "dreampipe/poisson.hpp"

using namespace dreampipe;

namespace {

Image8 random_rgb(std::mt19937_64& rng, int w, int h, int lo = 0, int hi = 255) {
  std::uniform_int_distribution<int> d(lo, hi);
  Image8 img(w, h, 3);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

Image8 smooth_rgb(int w, int h, double phase) {
  Image8 img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img(x, y, c) = static_cast<std::uint8_t>(
            std::lround(128 + 90 * std::sin(phase + 0.2 * x + 0.13 * y + c)));
  return img;
}

MaskImage blob_mask(int w, int h, double cx, double cy, double r) {
  MaskImage m(w, h, MaskSpace::Panorama, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double dx = std::abs(x - cx);
      dx = std::min(dx, w - dx);
      if (std::hypot(dx, y - cy) <= r) m(x, y) = 1.0f;
    }
  return m;
}

// Dense reference: assembles the same discrete system pixel by pixel and
// solves it with LU. Columns wrap; a missing vertical neighbour contributes
// the target value at p with zero guidance.
Eigen::MatrixXd dense_solution(const Image8& t, const Image8& s, const MaskImage& m) {
  const int w = t.width(), h = t.height();
  std::vector<int> id(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::array<int, 2>> px;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (m(x, y) >= 0.5f) {
        id[y * w + x] = static_cast<int>(px.size());
        px.push_back({x, y});
      }
  const int n = static_cast<int>(px.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, 3);
  for (int i = 0; i < n; ++i) {
    const auto [x, y] = px[i];
    A(i, i) = 4.0;
    const int nx[4] = {(x + w - 1) % w, (x + 1) % w, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k) {
      for (int c = 0; c < 3; ++c) {
        if (ny[k] < 0 || ny[k] >= h) {
          B(i, c) += t(x, y, c) / 255.0;
          continue;
        }
        B(i, c) += (s(x, y, c) - s(nx[k], ny[k], c)) / 255.0;
      }
      if (ny[k] < 0 || ny[k] >= h) continue;
      const int j = id[ny[k] * w + nx[k]];
      if (j >= 0) A(i, j) -= 1.0;
      else
        for (int c = 0; c < 3; ++c) B(i, c) += t(nx[k], ny[k], c) / 255.0;
    }
  }
  return A.partialPivLu().solve(B);
}

double max_diff_vs_dense(const Image8& t, const Image8& s, const MaskImage& m) {
  const Eigen::MatrixXd ref = dense_solution(t, s, m);
  const PoissonResult got = poisson_solve(t, s, m);
  CHECK(got.converged);
  double worst = 0;
  int i = 0;
  for (int y = 0; y < t.height(); ++y)
    for (int x = 0; x < t.width(); ++x) {
      if (m(x, y) < 0.5f) continue;
      for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(got.solution(x, y, c) - ref(i, c)));
      ++i;
    }
  return worst;
}

}  // namespace

TEST_CASE("empty mask returns the target byte-exactly") {
  std::mt19937_64 rng(1);
  const Image8 t = random_rgb(rng, 40, 20), s = random_rgb(rng, 40, 20);
  PoissonResult info;
  CHECK(poisson_blend(t, s, MaskImage(40, 20, MaskSpace::Panorama, 0.0f), {}, &info) == t);
  CHECK(info.iterations == 0);
}

TEST_CASE("source equal to target leaves the target unchanged") {
  std::mt19937_64 rng(2);
  const Image8 t = random_rgb(rng, 48, 24);
  const Image8 out = poisson_blend(t, t, blob_mask(48, 24, 20, 12, 7));
  for (std::size_t i = 0; i < t.data().size(); ++i)
    CHECK(std::abs(out.data()[i] - t.data()[i]) <= 1);
}

TEST_CASE("a brightness offset in the source is removed by the boundary") {
  const Image8 t = smooth_rgb(64, 32, 0.0);
  Image8 shifted(64, 32, 3);
  bool clipped = false;
  for (std::size_t i = 0; i < t.data().size(); ++i) {
    clipped |= t.data()[i] < 30;
    shifted.data()[i] = static_cast<std::uint8_t>(std::max(t.data()[i] - 30, 0));
  }
  REQUIRE_FALSE(clipped);
  const Image8 out = poisson_blend(t, shifted, blob_mask(64, 32, 30, 16, 9));
  for (std::size_t i = 0; i < t.data().size(); ++i) CHECK(std::abs(out.data()[i] - t.data()[i]) <= 1);
}

TEST_CASE("32x32 solve matches a dense direct solve") {
  std::mt19937_64 rng(3);
  SUBCASE("interior blob") {
    const Image8 t = random_rgb(rng, 32, 32), s = random_rgb(rng, 32, 32);
    CHECK(max_diff_vs_dense(t, s, blob_mask(32, 32, 15.5, 15.5, 11)) < 0.5 / 255.0);
  }
  SUBCASE("mask across the horizontal seam and touching the top row") {
    const Image8 t = smooth_rgb(32, 32, 1.0), s = random_rgb(rng, 32, 32);
    MaskImage m = blob_mask(32, 32, 0.0, 4.0, 8);
    CHECK(max_diff_vs_dense(t, s, m) < 0.5 / 255.0);
  }
  SUBCASE("nearly full mask") {
    const Image8 t = random_rgb(rng, 32, 32), s = random_rgb(rng, 32, 32);
    MaskImage m(32, 32, MaskSpace::Panorama, 1.0f);
    for (int x = 0; x < 32; x += 5) m(x, 16) = 0.0f;
    CHECK(max_diff_vs_dense(t, s, m) < 0.5 / 255.0);
  }
}

TEST_CASE("solution satisfies the discrete Poisson equation and keeps the boundary") {
  std::mt19937_64 rng(4);
  const int w = 96, h = 48;
  const Image8 t = random_rgb(rng, w, h), s = random_rgb(rng, w, h);
  const MaskImage m = blob_mask(w, h, 90, 20, 14);
  PoissonResult info;
  const Image8 out = poisson_blend(t, s, m, {}, &info);
  CHECK(info.converged);
  CHECK(info.residual < 1e-4);
  double worst = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.on(x, y)) {
        for (int c = 0; c < 3; ++c) CHECK(out(x, y, c) == t(x, y, c));
        continue;
      }
      for (int c = 0; c < 3; ++c) {
        auto f = [&](int qx, int qy) {
          if (qy < 0 || qy >= h) return t(x, y, c) / 255.0;
          qx = (qx + w) % w;
          return m.on(qx, qy) ? static_cast<double>(info.solution(qx, qy, c)) : t(qx, qy, c) / 255.0;
        };
        auto g = [&](int qx, int qy) {
          if (qy < 0 || qy >= h) return 0.0;
          qx = (qx + w) % w;
          return (s(x, y, c) - s(qx, qy, c)) / 255.0;
        };
        const double lap = 4.0 * info.solution(x, y, c) - f(x - 1, y) - f(x + 1, y) - f(x, y - 1) - f(x, y + 1);
        const double div = g(x - 1, y) + g(x + 1, y) + g(x, y - 1) + g(x, y + 1);
        worst = std::max(worst, std::abs(lap - div));
      }
    }
  CHECK(worst < 1e-3);
}

TEST_CASE("mixed gradients keep the stronger target texture") {
  const Image8 t = smooth_rgb(64, 32, 0.5);
  const Image8 flat(64, 32, 3, 100);
  PoissonOptions opt;
  opt.mixed_gradients = true;
  const Image8 out = poisson_blend(t, flat, blob_mask(64, 32, 32, 16, 10), opt);
  for (std::size_t i = 0; i < t.data().size(); ++i) CHECK(std::abs(out.data()[i] - t.data()[i]) <= 1);
}

TEST_CASE("non-convergence is reported with the residual") {
  std::mt19937_64 rng(5);
  const Image8 t = random_rgb(rng, 64, 32), s = random_rgb(rng, 64, 32);
  const MaskImage m = blob_mask(64, 32, 32, 16, 14);
  PoissonOptions opt;
  opt.max_iterations = 2;
  try {
    poisson_solve(t, s, m, opt);
    FAIL("expected a numerical error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
  opt.throw_on_failure = false;
  const PoissonResult r = poisson_solve(t, s, m, opt);
  CHECK_FALSE(r.converged);
  CHECK(r.residual >= opt.tolerance);
}

TEST_CASE("argument checks") {
  const Image8 a(16, 8, 3), b(16, 8, 1);
  CHECK_THROWS_AS(poisson_blend(a, b, MaskImage(16, 8, MaskSpace::Panorama)), Error);
  CHECK_THROWS_AS(poisson_blend(a, a, MaskImage(8, 8, MaskSpace::Panorama)), Error);
  CHECK_THROWS_AS(poisson_blend(a, a, MaskImage(16, 8, MaskSpace::Uv)), Error);
}

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "dreampipe/simd/kernels.hpp"

using namespace dreampipe::simd;

namespace {

std::vector<Isa> available() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
    if (supported(isa)) out.push_back(isa);
  return out;
}

std::vector<float> random_floats(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<float> d(-2.0f, 2.0f);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar kernels are always available and the active table is supported") {
  CHECK(supported(Isa::Scalar));
  CHECK(supported(active().isa));
  CHECK_THROWS(kernels_for(supported(Isa::Neon) ? Isa::Avx2 : Isa::Neon));
}

TEST_CASE("axpy variants are bit-identical to the scalar reference") {
  std::mt19937_64 rng(7);
  const KernelTable& ref = kernels_for(Isa::Scalar);
  for (Isa isa : available()) {
    const KernelTable& k = kernels_for(isa);
    for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 9u, 31u, 64u, 129u, 1000u}) {
      const auto x = random_floats(rng, n);
      auto y0 = random_floats(rng, n);
      auto y1 = y0;
      ref.axpy_f32(0.37f, x.data(), y0.data(), n);
      k.axpy_f32(0.37f, x.data(), y1.data(), n);
      CHECK(std::memcmp(y0.data(), y1.data(), n * sizeof(float)) == 0);
    }
  }
}

TEST_CASE("dot variants agree with a double-precision sum") {
  std::mt19937_64 rng(11);
  for (Isa isa : available()) {
    const KernelTable& k = kernels_for(isa);
    for (std::size_t n : {0u, 1u, 5u, 8u, 17u, 128u, 777u}) {
      const auto a = random_floats(rng, n);
      const auto b = random_floats(rng, n);
      double exact = 0.0, mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        exact += static_cast<double>(a[i]) * b[i];
        mag += std::abs(static_cast<double>(a[i]) * b[i]);
      }
      const double got = k.dot_f32(a.data(), b.data(), n);
      CHECK(std::abs(got - exact) <= 4.0 * n * 6e-8 * mag + 1e-30);
    }
  }
}

TEST_CASE("intersect4 variants are bit-identical to the scalar reference") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const KernelTable& ref = kernels_for(Isa::Scalar);
  for (Isa isa : available()) {
    const KernelTable& k = kernels_for(isa);
    int hits = 0;
    for (int trial = 0; trial < 4000; ++trial) {
      TrianglePacket4 p;
      const int lanes = 1 + trial % 4;
      for (int l = 0; l < lanes; ++l) {
        for (int c = 0; c < 3; ++c) {
          p.v0[c][l] = d(rng);
          p.e1[c][l] = d(rng);
          p.e2[c][l] = d(rng);
        }
        p.ids[l] = static_cast<std::uint32_t>(l);
      }
      double o[3] = {d(rng) * 3, d(rng) * 3, d(rng) * 3};
      double dir[3] = {-o[0] + d(rng), -o[1] + d(rng), -o[2] + d(rng)};
      const double len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
      for (double& c : dir) c /= len;
      PacketHits4 h0{}, h1{};
      const unsigned m0 = ref.intersect4(p, o, dir, 1e-9, 1e30, h0);
      const unsigned m1 = k.intersect4(p, o, dir, 1e-9, 1e30, h1);
      REQUIRE(m0 == m1);
      for (int l = 0; l < 4; ++l)
        if (m0 & (1u << l)) {
          ++hits;
          CHECK(std::memcmp(&h0.t[l], &h1.t[l], sizeof(double)) == 0);
          CHECK(std::memcmp(&h0.u[l], &h1.u[l], sizeof(double)) == 0);
          CHECK(std::memcmp(&h0.v[l], &h1.v[l], sizeof(double)) == 0);
        }
      // Padding lanes never report hits.
      CHECK((m0 >> lanes) == 0u);
    }
    CHECK(hits > 100);
  }
}

TEST_CASE("set_active switches the dispatched table") {
  const Isa before = active().isa;
  set_active(Isa::Scalar);
  CHECK(active().isa == Isa::Scalar);
  set_active(before);
  CHECK(active().isa == before);
}

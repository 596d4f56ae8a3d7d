#pragma once

// Small fixtures and independent reference computations shared by the tests.
// Nothing here calls into the code under test except to build meshes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "dreampipe/mesh.hpp"

namespace testsupport {

using dreampipe::IndexTriple;
using dreampipe::TexturedMesh;
using dreampipe::Vec2;
using dreampipe::Vec3;

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("dreampipe_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-6) return v / len;
  }
}

// Appends the quad a, b, c, d (counter-clockwise seen from the front) with
// texture coordinates spanning [u0,u1] x [v0,v1].
inline void add_quad(TexturedMesh& m, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                     double u0 = 0.0, double v0 = 0.0, double u1 = 1.0, double v1 = 1.0) {
  const auto p = static_cast<std::uint32_t>(m.positions.size());
  const auto t = static_cast<std::uint32_t>(m.uvs.size());
  m.positions.insert(m.positions.end(), {a, b, c, d});
  m.uvs.insert(m.uvs.end(), {Vec2(u0, v0), Vec2(u1, v0), Vec2(u1, v1), Vec2(u0, v1)});
  m.position_indices.push_back({p, p + 1, p + 2});
  m.position_indices.push_back({p, p + 2, p + 3});
  m.uv_indices.push_back({t, t + 1, t + 2});
  m.uv_indices.push_back({t, t + 2, t + 3});
}

// Flat normals, one per corner, and a solid atlas.
inline void finish_mesh(TexturedMesh& m, int atlas = 64, std::uint8_t gray = 128) {
  m.normals.clear();
  m.normal_indices.clear();
  for (const IndexTriple& tri : m.position_indices) {
    const Vec3 n = (m.positions[tri[1]] - m.positions[tri[0]])
                       .cross(m.positions[tri[2]] - m.positions[tri[0]])
                       .normalized();
    const auto k = static_cast<std::uint32_t>(m.normals.size());
    m.normals.push_back(n);
    m.normal_indices.push_back({k, k, k});
  }
  if (m.texture.empty()) m.texture = dreampipe::Image8(atlas, atlas, 3, gray);
}

struct BruteHit {
  std::uint32_t triangle = 0;
  double t = 0.0;
};

// Plain Moller-Trumbore over every triangle, double precision. Ties keep
// the lower triangle index.
inline std::optional<BruteHit> brute_intersect(const std::vector<Vec3>& pos,
                                               const std::vector<IndexTriple>& tris,
                                               const Vec3& o, const Vec3& d,
                                               double t_min = 1e-9) {
  std::optional<BruteHit> best;
  for (std::size_t i = 0; i < tris.size(); ++i) {
    const Vec3& a = pos[tris[i][0]];
    const Vec3 e1 = pos[tris[i][1]] - a;
    const Vec3 e2 = pos[tris[i][2]] - a;
    const Vec3 p = d.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) continue;
    const double inv = 1.0 / det;
    const Vec3 s = o - a;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 q = s.cross(e1);
    const double v = d.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(q) * inv;
    if (t <= t_min) continue;
    if (!best || t < best->t) best = BruteHit{static_cast<std::uint32_t>(i), t};
  }
  return best;
}

// Reference equirect mapping written out independently of the library:
// u = 0.5 - atan2(y, x) / 2pi (wrapped to [0,1)), v = acos(z) / pi.
inline void reference_equirect(const Vec3& d, double& u, double& v) {
  u = 0.5 - std::atan2(d.y(), d.x()) / (2.0 * M_PI);
  u -= std::floor(u);
  v = std::acos(std::clamp(d.z(), -1.0, 1.0)) / M_PI;
}

inline Vec3 reference_direction(double u, double v) {
  const double phi = (0.5 - u) * 2.0 * M_PI;
  const double theta = v * M_PI;
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

}  // namespace testsupport

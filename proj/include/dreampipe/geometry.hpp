#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dreampipe/error.hpp"

// World and camera frames are right-handed with +Z up. In a camera frame +X
// is forward and maps to the panorama centre (u = 0.5), +Y points left, and u
// grows to the right when looking forward. v = 0 is the zenith, v = 1 the
// nadir. All angles are radians.

namespace dreampipe {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using IndexTriple = std::array<std::uint32_t, 3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

constexpr double deg_to_rad(double degrees) noexcept { return degrees * kPi / 180.0; }
constexpr double rad_to_deg(double radians) noexcept { return radians * 180.0 / kPi; }

// Unit 3-vector.
class Direction {
 public:
  Direction() = default;
  // Normalizes; a zero vector is rejected.
  explicit Direction(const Vec3& v);
  // Caller guarantees |v| = 1.
  static Direction from_unit(const Vec3& v) noexcept {
    Direction d;
    d.v_ = v;
    return d;
  }

  const Vec3& vec() const noexcept { return v_; }
  double x() const noexcept { return v_.x(); }
  double y() const noexcept { return v_.y(); }
  double z() const noexcept { return v_.z(); }

 private:
  Vec3 v_{1.0, 0.0, 0.0};
};

// u in [0,1) wraps; v in [0,1].
struct EquirectCoord {
  double u = 0.0;
  double v = 0.0;
};

EquirectCoord dir_to_equirect(const Direction& d) noexcept;
Direction equirect_to_dir(EquirectCoord e) noexcept;

// Pixel (x, y) covers [x, x+1) x [y, y+1) in continuous pixel space.
EquirectCoord pixel_center_to_equirect(int x, int y, int width, int height) noexcept;
// Continuous pixel position of an equirect coordinate.
Vec2 equirect_to_pixel(EquirectCoord e, int width, int height) noexcept;
// Pixel containing the coordinate; column wraps, row clamps.
std::array<int, 2> equirect_to_nearest_pixel(EquirectCoord e, int width, int height) noexcept;

// Angle between two unit directions, robust near 0.
double angular_distance(const Vec3& a, const Vec3& b) noexcept;

struct BarycentricSample {
  std::uint32_t triangle = 0;
  std::array<double, 3> weights{1.0, 0.0, 0.0};
};

template <typename T>
T interpolate_attribute(const BarycentricSample& sample, std::span<const IndexTriple> corners,
                        std::span<const T> attributes) {
  require(sample.triangle < corners.size(), ErrorKind::InvalidArgument,
          "triangle index " + std::to_string(sample.triangle) + " out of range");
  const IndexTriple& tri = corners[sample.triangle];
  for (std::uint32_t idx : tri) {
    require(idx < attributes.size(), ErrorKind::InvalidArgument,
            "attribute index out of range");
  }
  return attributes[tri[0]] * sample.weights[0] + attributes[tri[1]] * sample.weights[1] +
         attributes[tri[2]] * sample.weights[2];
}

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) noexcept {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) noexcept {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool valid() const noexcept { return (lo.array() <= hi.array()).all(); }
  Vec3 center() const noexcept { return 0.5 * (lo + hi); }
  Vec3 extent() const noexcept { return hi - lo; }
};

}  // namespace dreampipe

#include "dreampipe/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace dreampipe {

Direction::Direction(const Vec3& v) {
  const double n = v.norm();
  require(n > 0.0 && std::isfinite(n), ErrorKind::InvalidArgument,
          "direction must be a finite non-zero vector");
  v_ = v / n;
}

EquirectCoord dir_to_equirect(const Direction& d) noexcept {
  const double x = d.x();
  const double y = d.y();
  const double z = d.z();
  const double horizontal = std::hypot(x, y);
  EquirectCoord e;
  // atan2 keeps the colatitude well conditioned next to the poles.
  e.v = std::atan2(horizontal, z) / kPi;
  if (x == 0.0 && y == 0.0) {
    e.u = 0.0;
    return e;
  }
  double u = 0.5 - std::atan2(y, x) / kTwoPi;
  if (u >= 1.0) u -= 1.0;
  if (u < 0.0) u += 1.0;
  e.u = u;
  return e;
}

Direction equirect_to_dir(EquirectCoord e) noexcept {
  if (e.v <= 0.0) return Direction::from_unit(Vec3(0.0, 0.0, 1.0));
  if (e.v >= 1.0) return Direction::from_unit(Vec3(0.0, 0.0, -1.0));
  const double phi = (0.5 - e.u) * kTwoPi;
  const double theta = e.v * kPi;
  const double s = std::sin(theta);
  return Direction::from_unit(Vec3(s * std::cos(phi), s * std::sin(phi), std::cos(theta)));
}

EquirectCoord pixel_center_to_equirect(int x, int y, int width, int height) noexcept {
  return {(x + 0.5) / width, (y + 0.5) / height};
}

Vec2 equirect_to_pixel(EquirectCoord e, int width, int height) noexcept {
  return {e.u * width, e.v * height};
}

std::array<int, 2> equirect_to_nearest_pixel(EquirectCoord e, int width, int height) noexcept {
  int col = static_cast<int>(std::floor(e.u * width));
  col %= width;
  if (col < 0) col += width;
  int row = static_cast<int>(std::floor(e.v * height));
  row = std::clamp(row, 0, height - 1);
  return {col, row};
}

double angular_distance(const Vec3& a, const Vec3& b) noexcept {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace dreampipe

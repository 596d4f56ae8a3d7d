#pragma once

#include <array>

#include "dreampipe/geometry.hpp"

namespace dreampipe {

// Camera centre in metres plus world-from-camera rotation.
struct CameraPose {
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();

  // Quaternion order is (w, x, y, z); it is normalized before use.
  static CameraPose from_translation_quaternion(const Vec3& t, double qw, double qx, double qy,
                                                double qz);
  // [tx, ty, tz, qw, qx, qy, qz]
  static CameraPose from_array(const std::array<double, 7>& values);
  std::array<double, 7> to_array() const;

  Vec3 to_world(const Vec3& camera_dir) const noexcept { return rotation * camera_dir; }
  Vec3 to_camera(const Vec3& world_dir) const noexcept { return rotation.transpose() * world_dir; }

  // Throws if the centre is not finite or the rotation is not orthonormal to 1e-6.
  void validate() const;
};

// Equirect coordinate of world point x as seen from the pose (viewing ray x - c).
// Returns false when x coincides with the centre.
bool project_to_equirect(const CameraPose& pose, const Vec3& x, EquirectCoord& out,
                         double& distance) noexcept;

}  // namespace dreampipe

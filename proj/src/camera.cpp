#include "dreampipe/camera.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace dreampipe {

CameraPose CameraPose::from_translation_quaternion(const Vec3& t, double qw, double qx, double qy,
                                                   double qz) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  require(std::isfinite(q.norm()) && q.norm() > 1e-12, ErrorKind::InvalidArgument,
          "pose quaternion must be non-zero");
  q.normalize();
  CameraPose pose;
  pose.center = t;
  pose.rotation = q.toRotationMatrix();
  pose.validate();
  return pose;
}

CameraPose CameraPose::from_array(const std::array<double, 7>& v) {
  return from_translation_quaternion(Vec3(v[0], v[1], v[2]), v[3], v[4], v[5], v[6]);
}

std::array<double, 7> CameraPose::to_array() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return {center.x(), center.y(), center.z(), q.w(), q.x(), q.y(), q.z()};
}

void CameraPose::validate() const {
  require(center.allFinite(), ErrorKind::InvalidArgument, "camera centre is not finite");
  require(rotation.allFinite(), ErrorKind::InvalidArgument, "camera rotation is not finite");
  const double err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  require(err < 1e-6 && rotation.determinant() > 0.0, ErrorKind::InvalidArgument,
          "camera rotation is not orthonormal");
}

bool project_to_equirect(const CameraPose& pose, const Vec3& x, EquirectCoord& out,
                         double& distance) noexcept {
  const Vec3 ray = x - pose.center;
  distance = ray.norm();
  if (!(distance > 0.0)) return false;
  out = dir_to_equirect(Direction::from_unit(pose.to_camera(ray / distance)));
  return true;
}

}  // namespace dreampipe

#include "dynsdf/types.hpp"

#include <cmath>

namespace dynsdf {

bool RigidTransform::is_orthonormal(double tol) const {
  if (!R.allFinite() || !T.allFinite()) return false;
  const Mat3 residual = R * R.transpose() - Mat3::Identity();
  return residual.cwiseAbs().maxCoeff() <= tol && R.determinant() > 0.0;
}

Mat3 yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    Mat3 K;
    K << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return Mat3::Identity() + K;
  }
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

}  // namespace dynsdf

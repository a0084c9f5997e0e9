#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dynsdf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (wrong record size, arity, unparsable token).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that breaks a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Query point outside the allocated part of the feature octree.
class NotAllocatedError : public Error {
 public:
  NotAllocatedError(const std::string& what, int depth)
      : Error(what), depth_(depth) {}
  int depth() const { return depth_; }

 private:
  int depth_;
};

/// Non-finite value produced inside a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Rigid transform mapping sensor coordinates to world coordinates.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 T = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + T; }
  RigidTransform inverse() const { return {R.transpose(), -R.transpose() * T}; }
  RigidTransform operator*(const RigidTransform& o) const {
    return {R * o.R, R * o.T + T};
  }

  /// True when R·Rᵀ − I has every entry within `tol` and det(R) > 0.
  bool is_orthonormal(double tol = 1e-6) const;
};

/// Rotation about +z by `yaw` radians.
Mat3 yaw_rotation(double yaw);

/// Rodrigues' formula for the rotation vector `w`.
Mat3 so3_exp(const Vec3& w);

}  // namespace dynsdf

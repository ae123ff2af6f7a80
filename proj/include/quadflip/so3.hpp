#pragma once

#include <Eigen/Dense>

namespace quadflip {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3T = Eigen::Matrix<T, 3, 3>;

inline const Vec3 kE3 = Vec3::UnitZ();

/// Cross-product matrix: hat(v) * w == v.cross(w).
template <typename T>
Mat3T<T> hat(const Vec3T<T>& v) {
  Mat3T<T> S;
  S << T(0), -v.z(), v.y(),
       v.z(), T(0), -v.x(),
       -v.y(), v.x(), T(0);
  return S;
}

/// Inverse of hat. Throws NotSkew when ||S + S^T||_F exceeds `tol`.
Vec3 vee(const Mat3& S, double tol = 1e-9);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// Nearest rotation in the Frobenius sense (polar factor with det = +1).
Mat3 project_to_so3(const Mat3& M);

/// Unit quaternion stored as [x, y, z, w].
Vec4 quaternion_xyzw(const Mat3& R);
Mat3 rotation_from_xyzw(const Vec4& q);

double orthonormality_error(const Mat3& R);

}  // namespace quadflip

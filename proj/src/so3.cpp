#include "quadflip/so3.hpp"

#include <cmath>

#include "quadflip/errors.hpp"

namespace quadflip {

Vec3 vee(const Mat3& S, double tol) {
  if ((S + S.transpose()).norm() > tol) {
    throw NotSkew("vee: matrix is not skew-symmetric");
  }
  return Vec3(S(2, 1), S(0, 2), S(1, 0));
}

Mat3 rot_x(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix();
}

Mat3 rot_y(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix();
}

Mat3 rot_z(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 project_to_so3(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) U.col(2) = -U.col(2);
  return U * V.transpose();
}

Vec4 quaternion_xyzw(const Mat3& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q.coeffs();  // Eigen stores [x, y, z, w]
}

Mat3 rotation_from_xyzw(const Vec4& q) {
  return Eigen::Quaterniond(q(3), q(0), q(1), q(2)).normalized().toRotationMatrix();
}

double orthonormality_error(const Mat3& R) {
  return (R.transpose() * R - Mat3::Identity()).norm();
}

}  // namespace quadflip

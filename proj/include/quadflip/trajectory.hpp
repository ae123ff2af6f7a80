#pragma once

#include <Eigen/Dense>

#include "quadflip/so3.hpp"

namespace quadflip {

struct TrajectorySample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

/// Per-axis quintic between two (position, velocity, acceleration) boundary
/// states. Past the end it coasts at the final velocity.
class QuinticSegment {
 public:
  QuinticSegment() = default;
  QuinticSegment(const TrajectorySample& from, const TrajectorySample& to, double duration);

  /// Stationary segment holding `p`.
  static QuinticSegment hold(const Vec3& p);

  /// Shortest duration (on a 0.05 s grid, at least `min_duration`) whose
  /// peak acceleration stays below `max_accel`.
  static QuinticSegment fit(const TrajectorySample& from, const TrajectorySample& to,
                            double max_accel, double min_duration = 1.0);

  TrajectorySample sample(double t) const;
  double duration() const { return duration_; }
  const TrajectorySample& start() const { return start_; }
  const TrajectorySample& end() const { return end_; }
  double peak_acceleration() const;

 private:
  // coeffs_.col(axis) holds c0..c5 in p(t) = sum c_i t^i.
  Eigen::Matrix<double, 6, 3> coeffs_ = Eigen::Matrix<double, 6, 3>::Zero();
  double duration_ = 0.0;
  TrajectorySample start_;
  TrajectorySample end_;
};

}  // namespace quadflip

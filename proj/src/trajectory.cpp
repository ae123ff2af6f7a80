#include "quadflip/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace quadflip {

QuinticSegment::QuinticSegment(const TrajectorySample& from, const TrajectorySample& to,
                               double duration)
    : duration_(duration), start_(from), end_(to) {
  const double T = duration;
  if (!(T > 0.0)) {
    coeffs_.row(0) = to.position.transpose();
    duration_ = 0.0;
    return;
  }
  Eigen::Matrix3d M;
  M << std::pow(T, 3), std::pow(T, 4), std::pow(T, 5),
       3 * T * T, 4 * std::pow(T, 3), 5 * std::pow(T, 4),
       6 * T, 12 * T * T, 20 * std::pow(T, 3);
  const auto lu = M.partialPivLu();
  for (int a = 0; a < 3; ++a) {
    const double p0 = from.position(a), v0 = from.velocity(a), a0 = from.acceleration(a);
    const Eigen::Vector3d rhs(to.position(a) - (p0 + v0 * T + 0.5 * a0 * T * T),
                              to.velocity(a) - (v0 + a0 * T),
                              to.acceleration(a) - a0);
    const Eigen::Vector3d hi = lu.solve(rhs);
    coeffs_.col(a) << p0, v0, 0.5 * a0, hi(0), hi(1), hi(2);
  }
}

QuinticSegment QuinticSegment::hold(const Vec3& p) {
  TrajectorySample s;
  s.position = p;
  return QuinticSegment(s, s, 0.0);
}

QuinticSegment QuinticSegment::fit(const TrajectorySample& from, const TrajectorySample& to,
                                   double max_accel, double min_duration) {
  double T = std::max(min_duration, 0.05);
  for (int i = 0; i < 2000; ++i, T += 0.05) {
    QuinticSegment seg(from, to, T);
    if (seg.peak_acceleration() <= max_accel) return seg;
  }
  return QuinticSegment(from, to, T);
}

TrajectorySample QuinticSegment::sample(double t) const {
  TrajectorySample s;
  if (duration_ <= 0.0 || t >= duration_) {
    const double over = std::max(0.0, t - duration_);
    s.position = end_.position + end_.velocity * over;
    s.velocity = end_.velocity;
    s.acceleration = over > 0.0 ? Vec3::Zero() : end_.acceleration;
    return s;
  }
  t = std::max(t, 0.0);
  for (int a = 0; a < 3; ++a) {
    const auto c = coeffs_.col(a);
    s.position(a) = c(0) + t * (c(1) + t * (c(2) + t * (c(3) + t * (c(4) + t * c(5)))));
    s.velocity(a) = c(1) + t * (2 * c(2) + t * (3 * c(3) + t * (4 * c(4) + t * 5 * c(5))));
    s.acceleration(a) = 2 * c(2) + t * (6 * c(3) + t * (12 * c(4) + t * 20 * c(5)));
  }
  return s;
}

double QuinticSegment::peak_acceleration() const {
  if (duration_ <= 0.0) return end_.acceleration.norm();
  double peak = 0.0;
  constexpr int kSamples = 64;
  for (int i = 0; i <= kSamples; ++i) {
    peak = std::max(peak, sample(duration_ * i / kSamples).acceleration.norm());
  }
  return peak;
}

}  // namespace quadflip

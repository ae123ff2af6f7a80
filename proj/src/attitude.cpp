#include "quadflip/attitude.hpp"

#include <cmath>

#include "quadflip/errors.hpp"

namespace quadflip::attitude {

void AttitudeGains::validate() const {
  if (!(tau_omega > 0.0)) throw ConfigError("tau_omega must be > 0");
  if (!(rate_time_constant > 0.0)) throw ConfigError("rate_time_constant must be > 0");
}

Mat3 desired_attitude(const Vec3& force, double yaw, double mass, double gravity) {
  const Vec3 thrust_axis = force + mass * gravity * kE3;
  const double n = thrust_axis.norm();
  if (!(n > 1e-8)) throw DegenerateThrust("commanded force cancels gravity compensation");
  const Vec3 b3 = thrust_axis / n;
  const Vec3 b1(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 b2_raw = b3.cross(b1);
  const double m = b2_raw.norm();
  if (!(m > 1e-8)) throw SingularYaw("yaw heading parallel to thrust axis");
  const Vec3 b2 = b2_raw / m;
  Mat3 R;
  R.col(0) = b2.cross(b3);
  R.col(1) = b2;
  R.col(2) = b3;
  return R;
}

Vec3 attitude_error(const Mat3& desired, const Mat3& current) {
  const Mat3 S = desired.transpose() * current - current.transpose() * desired;
  return 0.5 * vee(S);
}

Vec3 body_rate_command(const Vec3& error, const AttitudeGains& gains) {
  return (2.0 / gains.tau_omega) * error;
}

AttitudeCmd attitude_command(const Vec3& force, double yaw, const Mat3& current, double mass,
                             double gravity, const AttitudeGains& gains) {
  AttitudeCmd cmd;
  cmd.desired_attitude = desired_attitude(force, yaw, mass, gravity);
  cmd.body_rate_cmd = body_rate_command(attitude_error(current, cmd.desired_attitude), gains);
  cmd.thrust_cmd = (force + mass * gravity * kE3).dot(current.col(2));
  return cmd;
}

Vec3 rate_loop_moment(const Vec3& rate_cmd, const Vec3& rate, const Mat3& inertia,
                      const AttitudeGains& gains) {
  return inertia * (rate_cmd - rate) / gains.rate_time_constant + rate.cross(inertia * rate);
}

}  // namespace quadflip::attitude

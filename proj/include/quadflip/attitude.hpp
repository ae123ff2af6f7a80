#pragma once

#include "quadflip/so3.hpp"

// Geometric attitude pipeline: commanded force -> desired attitude ->
// attitude error -> first-order body-rate command -> rate-loop moment.
namespace quadflip::attitude {

struct AttitudeGains {
  double tau_omega = 0.1;            // s, first-order attitude time constant
  double rate_time_constant = 0.01;  // s, inner rate loop

  void validate() const;
};

struct AttitudeCmd {
  Mat3 desired_attitude = Mat3::Identity();
  Vec3 body_rate_cmd = Vec3::Zero();
  double thrust_cmd = 0.0;
};

/// Desired attitude for a commanded net force `force` (N, ENU, gravity not
/// included). The thrust axis is force + mass*g*e3. Columns are
/// [b2 x b3, b2, b3] with b2 = (b3 x b1)/|b3 x b1| and b1 = [cos yaw, sin yaw, 0].
///
/// Throws DegenerateThrust when the thrust axis has near-zero length and
/// SingularYaw when b1 is parallel to b3.
Mat3 desired_attitude(const Vec3& force, double yaw, double mass, double gravity);

/// e = 1/2 vee(Rd^T R - R^T Rd).
Vec3 attitude_error(const Mat3& desired, const Mat3& current);

/// (2 / tau_omega) * e.
Vec3 body_rate_command(const Vec3& error, const AttitudeGains& gains);

/// Full outer-to-rate conversion. The rate law is applied to
/// attitude_error(current, desired), which rotates the body toward `desired`
/// under R' = R hat(omega).
AttitudeCmd attitude_command(const Vec3& force, double yaw, const Mat3& current, double mass,
                             double gravity, const AttitudeGains& gains);

/// Body moment tracking a rate command with first-order response plus
/// gyroscopic cancellation.
Vec3 rate_loop_moment(const Vec3& rate_cmd, const Vec3& rate, const Mat3& inertia,
                      const AttitudeGains& gains);

}  // namespace quadflip::attitude

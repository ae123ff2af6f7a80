#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string_view>

#include "quadflip/dynamics.hpp"
#include "quadflip/mpc.hpp"
#include "quadflip/trajectory.hpp"

namespace quadflip::mission {

enum class Phase {
  Takeoff,
  TransitToRally,
  FlipAscend,
  FlipThrow,
  Recovery,
  Hold,
  ReturnHome,
  Land,
};

inline constexpr int kPhaseCount = 8;

std::string_view to_string(Phase p);
std::optional<Phase> phase_from_string(std::string_view name);

struct MissionPhase {
  Phase phase = Phase::Takeoff;
  double entered_at = 0.0;
};

struct Tolerances {
  double position = 0.1;   // m
  double velocity = 0.1;   // m/s
  double rate = 0.2;       // rad/s
  double upright_r33 = 0.95;
  double hold_dwell = 3.0;      // s
  double phase_timeout = 15.0;  // s beyond the phase's planned duration
};

enum class ReleaseTrigger {
  PredictedRange,   // ballistic range from the current probe state crosses the target
  LaunchElevation,  // probe velocity elevation falls through the planned angle
  BodyPitch,        // accumulated flip angle rises through release_pitch
};

struct MissionConfig {
  Vec3 home = Vec3::Zero();
  double takeoff_altitude = 2.0;
  Vec3 rally = Vec3(4.0, 0.0, 2.0);
  Tolerances tol;

  double cruise_accel = 2.0;    // takeoff, transit, return, land
  double recovery_accel = 5.0;  // recovery braking and the hold return
  double runup_accel = 8.0;     // ascending run-up before the flip

  double flip_rate = 5.0 * std::numbers::pi;
  double flip_rate_cap = std::numeric_limits<double>::infinity();
  double flip_exit_angle = 2.0 * std::numbers::pi - 0.6;
  double flip_thrust_fraction = 0.0;  // of hover thrust while rotating

  // Flip-only ascend: climb this far, reaching this vertical speed.
  double ascend_climb = 1.0;
  double ascend_speed = 3.0;

  // Ballistic coast between thrust cut and the planned release.
  double coast_before_release = 0.2;
  ReleaseTrigger trigger = ReleaseTrigger::PredictedRange;

  bool throw_enabled = true;
  double throw_range = 20.0;
  double throw_v_max = 20.0;
  double throw_theta_min = 20.0 * std::numbers::pi / 180.0;
  double throw_theta_max = 70.0 * std::numbers::pi / 180.0;

  void validate() const;
  double effective_flip_rate() const { return std::min(flip_rate, flip_rate_cap); }
  Vec3 home_hover() const { return home + Vec3(0.0, 0.0, takeoff_altitude); }
};

struct ThrowPlan {
  bool enabled = false;
  double release_speed = 0.0;   // V
  double release_angle = 0.0;   // theta_t, elevation of the launch velocity
  double desired_range = 0.0;   // R
  double release_height = 0.0;  // h above ground
  double release_pitch = std::numeric_limits<double>::quiet_NaN();  // accumulated flip angle

  // Run-up that realises the plan: final velocity of the ascend segment and
  // its duration.
  Vec3 launch_velocity = Vec3::Zero();
  double runup_duration = 0.0;
};

/// Horizontal range of a drag-free projectile launched at speed V, elevation
/// theta, from height h above the landing plane.
double projectile_range(double speed, double theta, double height, double gravity);

/// Minimum release speed reaching `desired_range` with the elevation inside
/// [theta_min, theta_max]. Throws Unreachable when it exceeds v_max.
ThrowPlan solve_throw_params(double desired_range, double height, double v_max, double theta_min,
                             double theta_max, double gravity);

/// Throw plan plus the run-up that produces it; iterates the release height
/// implied by the run-up until it is self-consistent. Without a throw the
/// run-up is a vertical climb of `ascend_climb`.
ThrowPlan plan_throw(const MissionConfig& config, const dynamics::Params& params);

/// Link-tip velocity: v_quad + omega x (l * link_dir).
Vec3 release_speed_from_pitch_rate(const Vec3& omega, const Vec3& quad_velocity,
                                   const Vec3& link_dir, double link_length);

struct ProbeBallisticState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double released_at = 0.0;

  ProbeBallisticState propagate(double dt, double gravity) const;
  /// Time from now until position.z reaches `ground_z` (descending).
  double time_to_ground(double ground_z, double gravity) const;
};

struct ReleaseResult {
  dynamics::SystemState state;  // payload removed
  dynamics::Params params;      // probe_attached = false
  ProbeBallisticState probe;
};

/// Detaches the probe. The probe leaves with the link-tip state and the
/// quadrotor velocity is set from conservation of total linear momentum.
/// Throws NotAttached.
ReleaseResult release_probe(const dynamics::SystemState& s, const dynamics::Params& params,
                            double t = 0.0);

enum class ReferenceMode { Position, BodyRate };

struct ReferenceSet {
  ReferenceMode mode = ReferenceMode::Position;
  mpc::MpcState x_ref = mpc::MpcState::Zero();
  Vec4 q_d = Vec4(0.0, 0.0, 0.0, 1.0);  // [x, y, z, w]
  Vec3 omega_d = Vec3::Zero();
  double thrust = 0.0;  // body-rate mode only

  QuinticSegment trajectory;
  double trajectory_start = 0.0;

  /// Reference state of the active segment at absolute time t.
  mpc::MpcState state_at(double t) const;
};

struct MissionState {
  MissionPhase phase;
  QuinticSegment segment;
  double segment_start = 0.0;

  double flip_angle = 0.0;  // accumulated pitch since FlipThrow entry
  double last_pitch = 0.0;
  double last_elevation = std::numeric_limits<double>::quiet_NaN();
  double last_range_error = std::numeric_limits<double>::quiet_NaN();
  double settled_since = -1.0;

  int release_count = 0;
  bool complete = false;
  bool failsafe = false;
};

MissionState initial_mission_state(const dynamics::SystemState& s, double t,
                                   const MissionConfig& config);

struct MissionStep {
  MissionState state;
  ReferenceSet reference;
  bool release = false;
};

/// Advances the phase machine by one tick. Pure: the output depends only on
/// the arguments.
MissionStep mission_step(const MissionState& mission, const dynamics::SystemState& s, double t,
                         const ThrowPlan& plan, const MissionConfig& config,
                         const dynamics::Params& params);

/// Body pitch for the flip about body y: angle of the thrust axis in the x-z plane.
double body_pitch(const Mat3& R);

}  // namespace quadflip::mission

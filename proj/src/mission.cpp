#include "quadflip/mission.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "quadflip/errors.hpp"

namespace quadflip::mission {

namespace {

constexpr std::array<std::string_view, kPhaseCount> kPhaseNames = {
    "takeoff", "transit_to_rally", "flip_ascend", "flip_throw",
    "recovery", "hold", "return_home", "land"};

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

TrajectorySample at_rest(const Vec3& p) {
  TrajectorySample s;
  s.position = p;
  return s;
}

TrajectorySample moving(const dynamics::SystemState& s) {
  TrajectorySample out;
  out.position = s.quad.position;
  out.velocity = s.quad.velocity;
  return out;
}

}  // namespace

std::string_view to_string(Phase p) { return kPhaseNames[static_cast<std::size_t>(p)]; }

std::optional<Phase> phase_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kPhaseNames.size(); ++i) {
    if (kPhaseNames[i] == name) return static_cast<Phase>(i);
  }
  return std::nullopt;
}

void MissionConfig::validate() const {
  if (!home.allFinite() || !rally.allFinite()) throw ConfigError("mission waypoints must be finite");
  if (!(takeoff_altitude > 0.0)) throw ConfigError("takeoff_altitude must be > 0");
  if (!(tol.position > 0.0) || !(tol.velocity > 0.0) || !(tol.rate > 0.0)) {
    throw ConfigError("mission tolerances must be > 0");
  }
  if (!(tol.hold_dwell >= 0.0) || !(tol.phase_timeout > 0.0)) {
    throw ConfigError("hold_dwell must be >= 0 and phase_timeout > 0");
  }
  if (!(cruise_accel > 0.0) || !(recovery_accel > 0.0) || !(runup_accel > 0.0)) {
    throw ConfigError("trajectory accelerations must be > 0");
  }
  if (!(effective_flip_rate() > 0.0)) throw ConfigError("flip rate must be > 0");
  if (!(flip_exit_angle > 0.0) || !(flip_exit_angle <= 2.0 * std::numbers::pi)) {
    throw ConfigError("flip_exit_angle must lie in (0, 2pi]");
  }
  if (!(flip_thrust_fraction >= 0.0)) throw ConfigError("flip_thrust_fraction must be >= 0");
  if (!(ascend_climb > 0.0) || !(ascend_speed > 0.0)) {
    throw ConfigError("ascend_climb and ascend_speed must be > 0");
  }
  if (!(coast_before_release >= 0.0)) throw ConfigError("coast_before_release must be >= 0");
  if (!(throw_range >= 0.0) || !(throw_v_max >= 0.0)) throw ConfigError("throw target invalid");
  if (!(0.0 <= throw_theta_min && throw_theta_min <= throw_theta_max &&
        throw_theta_max <= std::numbers::pi / 2)) {
    throw ConfigError("throw angle bounds must satisfy 0 <= min <= max <= 90 deg");
  }
}

double projectile_range(double speed, double theta, double height, double gravity) {
  const double vs = speed * std::sin(theta);
  const double vc = speed * std::cos(theta);
  return std::max(0.0, vc * (vs + std::sqrt(vs * vs + 2.0 * gravity * height)) / gravity);
}

ThrowPlan solve_throw_params(double desired_range, double height, double v_max, double theta_min,
                             double theta_max, double gravity) {
  if (!(theta_min <= theta_max) || !(desired_range >= 0.0) || !(height >= 0.0)) {
    throw Unreachable("throw planner: invalid target or empty angle bounds");
  }
  ThrowPlan plan;
  plan.enabled = true;
  plan.desired_range = desired_range;
  plan.release_height = height;
  if (desired_range == 0.0) {
    plan.release_speed = 0.0;
    plan.release_angle = 0.5 * (theta_min + theta_max);
    return plan;
  }
  // Landing condition h + R tan(t) - g R^2 / (2 V^2 cos^2 t) = 0 gives
  // V^2 = g R^2 / (2 (h cos^2 t + R sin t cos t)); the denominator is
  // h/2 + sqrt(h^2 + R^2)/2 cos(2t - atan2(R, h)), unimodal in t, so the
  // clamped stationary point is the constrained minimiser.
  const double theta = std::clamp(0.5 * std::atan2(desired_range, height), theta_min, theta_max);
  const double c = std::cos(theta);
  const double denom = 2.0 * (height * c * c + desired_range * std::sin(theta) * c);
  if (!(denom > 0.0)) throw Unreachable("throw planner: no finite release speed in bounds");
  const double speed = desired_range * std::sqrt(gravity / denom);
  if (!(speed <= v_max)) throw Unreachable("throw planner: required speed exceeds v_max");
  plan.release_speed = speed;
  plan.release_angle = theta;
  return plan;
}

ThrowPlan plan_throw(const MissionConfig& config, const dynamics::Params& params) {
  const double g = params.gravity;
  const double ground = config.home.z();
  if (!config.throw_enabled || !params.probe_attached) {
    ThrowPlan plan;
    plan.launch_velocity = Vec3(0.0, 0.0, config.ascend_speed);
    plan.runup_duration = 2.0 * config.ascend_climb / config.ascend_speed;
    return plan;
  }

  // Probe hangs one link length below the quadrotor at the end of the run-up
  // (zero acceleration) and free-falls with it while the thrust is cut.
  const double tc = config.coast_before_release;
  double height = std::max(0.0, config.rally.z() - params.link_length - ground);
  ThrowPlan plan;
  for (int it = 0; it < 100; ++it) {
    plan = solve_throw_params(config.throw_range, height, config.throw_v_max,
                              config.throw_theta_min, config.throw_theta_max, g);
    plan.launch_velocity = Vec3(plan.release_speed * std::cos(plan.release_angle), 0.0,
                                plan.release_speed * std::sin(plan.release_angle) + g * tc);
    plan.runup_duration = std::max(0.3, 1.5 * plan.launch_velocity.norm() / config.runup_accel);
    const double z_end = config.rally.z() + 0.5 * plan.launch_velocity.z() * plan.runup_duration;
    const double z_release = z_end + plan.launch_velocity.z() * tc - 0.5 * g * tc * tc;
    const double next = std::max(0.0, z_release - params.link_length - ground);
    const bool done = std::abs(next - height) < 1e-10;
    height = next;
    if (done) break;
  }
  plan = [&] {
    ThrowPlan p = solve_throw_params(config.throw_range, height, config.throw_v_max,
                                     config.throw_theta_min, config.throw_theta_max, g);
    p.launch_velocity = plan.launch_velocity;
    p.runup_duration = plan.runup_duration;
    return p;
  }();
  plan.release_pitch = config.effective_flip_rate() * tc;
  return plan;
}

Vec3 release_speed_from_pitch_rate(const Vec3& omega, const Vec3& quad_velocity,
                                   const Vec3& link_dir, double link_length) {
  return quad_velocity + omega.cross(link_length * link_dir);
}

ProbeBallisticState ProbeBallisticState::propagate(double dt, double gravity) const {
  ProbeBallisticState next = *this;
  next.position = position + velocity * dt - 0.5 * gravity * dt * dt * kE3;
  next.velocity = velocity - gravity * dt * kE3;
  return next;
}

double ProbeBallisticState::time_to_ground(double ground_z, double gravity) const {
  const double dz = position.z() - ground_z;
  const double vz = velocity.z();
  return (vz + std::sqrt(std::max(0.0, vz * vz + 2.0 * gravity * dz))) / gravity;
}

ReleaseResult release_probe(const dynamics::SystemState& s, const dynamics::Params& params,
                            double t) {
  if (!params.probe_attached || !s.payload) throw NotAttached("release_probe: no probe attached");
  ReleaseResult out;
  out.probe.position = dynamics::probe_position(s, params);
  out.probe.velocity = dynamics::probe_velocity(s, params);
  out.probe.released_at = t;

  const Vec3 momentum = dynamics::linear_momentum(s, params);
  out.state = s;
  out.state.payload.reset();
  out.state.quad.velocity = (momentum - params.probe_mass * out.probe.velocity) / params.quad_mass;
  out.params = params;
  out.params.probe_attached = false;
  return out;
}

mpc::MpcState ReferenceSet::state_at(double t) const {
  const TrajectorySample s = trajectory.sample(t - trajectory_start);
  mpc::MpcState x;
  x << s.position, s.velocity, s.acceleration;
  return x;
}

double body_pitch(const Mat3& R) { return std::atan2(R(0, 2), R(2, 2)); }

namespace {

MissionState enter(const MissionState& prev, Phase phase, const dynamics::SystemState& s, double t,
                   const ThrowPlan& plan, const MissionConfig& cfg) {
  MissionState m = prev;
  m.phase = MissionPhase{phase, t};
  m.segment_start = t;
  m.settled_since = -1.0;
  const Vec3 p = s.quad.position;
  const Vec3 v = s.quad.velocity;
  switch (phase) {
    case Phase::Takeoff:
      m.segment = QuinticSegment::fit(moving(s), at_rest(cfg.home_hover()), cfg.cruise_accel);
      break;
    case Phase::TransitToRally:
      m.segment = QuinticSegment::fit(moving(s), at_rest(cfg.rally), cfg.cruise_accel);
      break;
    case Phase::FlipAscend: {
      TrajectorySample end;
      end.position = p + 0.5 * plan.runup_duration * plan.launch_velocity;
      end.velocity = plan.launch_velocity;
      m.segment = QuinticSegment(moving(s), end, plan.runup_duration);
      break;
    }
    case Phase::FlipThrow:
      m.segment = QuinticSegment::hold(p);
      m.flip_angle = 0.0;
      m.last_pitch = body_pitch(s.quad.attitude);
      m.last_elevation = std::numeric_limits<double>::quiet_NaN();
      m.last_range_error = std::numeric_limits<double>::quiet_NaN();
      break;
    case Phase::Recovery: {
      const double T = std::max(0.5, 1.5 * v.norm() / cfg.recovery_accel);
      TrajectorySample end;
      end.position = p + 0.5 * T * v;
      m.segment = QuinticSegment(moving(s), end, T);
      break;
    }
    case Phase::Hold:
      m.segment = QuinticSegment::fit(moving(s), at_rest(cfg.rally), cfg.recovery_accel, 1.5);
      break;
    case Phase::ReturnHome:
      m.segment = QuinticSegment::fit(moving(s), at_rest(cfg.home_hover()), cfg.cruise_accel);
      break;
    case Phase::Land:
      m.segment = QuinticSegment::fit(moving(s), at_rest(cfg.home), cfg.cruise_accel);
      break;
  }
  return m;
}

bool settled_at(const dynamics::SystemState& s, const Vec3& target, const Tolerances& tol) {
  return (s.quad.position - target).norm() < tol.position && s.quad.velocity.norm() < tol.velocity;
}

}  // namespace

MissionState initial_mission_state(const dynamics::SystemState& s, double t,
                                   const MissionConfig& config) {
  return enter(MissionState{}, Phase::Takeoff, s, t, ThrowPlan{}, config);
}

MissionStep mission_step(const MissionState& mission, const dynamics::SystemState& s, double t,
                         const ThrowPlan& plan, const MissionConfig& cfg,
                         const dynamics::Params& params) {
  MissionStep out;
  MissionState m = mission;
  const Tolerances& tol = cfg.tol;
  const double in_phase = t - m.phase.entered_at;

  if (!m.complete && !m.failsafe) {
    std::optional<Phase> next;
    switch (m.phase.phase) {
      case Phase::Takeoff:
        if (std::abs(s.quad.position.z() - cfg.home_hover().z()) < tol.position &&
            s.quad.velocity.norm() < tol.velocity) {
          next = Phase::TransitToRally;
        }
        break;
      case Phase::TransitToRally:
        if (settled_at(s, cfg.rally, tol)) next = Phase::FlipAscend;
        break;
      case Phase::FlipAscend:
        if (t - m.segment_start >= m.segment.duration()) next = Phase::FlipThrow;
        break;
      case Phase::FlipThrow: {
        const double pitch = body_pitch(s.quad.attitude);
        const double prev_angle = m.flip_angle;
        m.flip_angle += wrap_angle(pitch - m.last_pitch);
        m.last_pitch = pitch;

        const bool armed = plan.enabled && params.probe_attached && s.payload &&
                           m.release_count == 0;
        if (armed) {
          if (cfg.trigger == ReleaseTrigger::BodyPitch) {
            out.release = prev_angle < plan.release_pitch && m.flip_angle >= plan.release_pitch;
          } else if (cfg.trigger == ReleaseTrigger::PredictedRange) {
            const Vec3 v = dynamics::probe_velocity(s, params);
            const double height =
                std::max(0.0, dynamics::probe_position(s, params).z() - cfg.home.z());
            const double speed = v.norm();
            const double elevation = std::atan2(v.z(), v.head<2>().norm());
            const double error =
                projectile_range(speed, elevation, height, params.gravity) - plan.desired_range;
            out.release = !std::isnan(m.last_range_error) &&
                          (m.last_range_error < 0.0) != (error < 0.0);
            m.last_range_error = error;
          } else {
            const Vec3 v = dynamics::probe_velocity(s, params);
            const double elevation = std::atan2(v.z(), v.head<2>().norm());
            out.release = !std::isnan(m.last_elevation) && m.last_elevation > plan.release_angle &&
                          elevation <= plan.release_angle;
            m.last_elevation = elevation;
          }
        }
        if (m.flip_angle >= cfg.flip_exit_angle) {
          // Never leave the flip holding the probe.
          if (armed) out.release = true;
          next = Phase::Recovery;
        }
        if (out.release) ++m.release_count;
        break;
      }
      case Phase::Recovery:
        if (s.quad.attitude(2, 2) > tol.upright_r33 && s.quad.body_rate.norm() < tol.rate) {
          next = Phase::Hold;
        }
        break;
      case Phase::Hold:
        if (t - m.segment_start >= m.segment.duration() && settled_at(s, cfg.rally, tol)) {
          if (m.settled_since < 0.0) m.settled_since = t;
          if (t - m.settled_since >= tol.hold_dwell) next = Phase::ReturnHome;
        } else {
          m.settled_since = -1.0;
        }
        break;
      case Phase::ReturnHome:
        if (settled_at(s, cfg.home_hover(), tol)) next = Phase::Land;
        break;
      case Phase::Land:
        if (t - m.segment_start >= m.segment.duration() && settled_at(s, cfg.home, tol)) {
          m.complete = true;
        }
        break;
    }

    if (next) {
      m = enter(m, *next, s, t, plan, cfg);
    } else if (!m.complete && in_phase > m.segment.duration() + tol.phase_timeout) {
      m.failsafe = true;
      m.segment = QuinticSegment::hold(s.quad.position);
      m.segment_start = t;
    }
  }

  ReferenceSet& ref = out.reference;
  ref.trajectory = m.segment;
  ref.trajectory_start = m.segment_start;
  ref.x_ref = ref.state_at(t);
  if (m.phase.phase == Phase::FlipThrow && !m.failsafe) {
    ref.mode = ReferenceMode::BodyRate;
    ref.omega_d = Vec3(0.0, cfg.effective_flip_rate(), 0.0);
    ref.thrust = cfg.flip_thrust_fraction * params.total_mass() * params.gravity;
  }
  out.state = m;
  return out;
}

}  // namespace quadflip::mission

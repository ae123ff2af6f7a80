#include "quadflip/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "quadflip/attitude.hpp"
#include "quadflip/dynamics.hpp"
#include "quadflip/errors.hpp"

namespace quadflip::sim {

namespace {

using mission::Phase;

bool diverged(const dynamics::SystemState& s) {
  const Eigen::VectorXd x = dynamics::flatten(s);
  return !x.allFinite() || x.cwiseAbs().maxCoeff() > 1e6;
}

dynamics::SystemState initial_state(const SimConfig& cfg) {
  dynamics::SystemState s;
  s.quad.position = cfg.mission.home;
  if (cfg.initial_position_jitter > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> jitter(-cfg.initial_position_jitter,
                                                  cfg.initial_position_jitter);
    for (int i = 0; i < 3; ++i) s.quad.position(i) += jitter(rng);
  }
  if (cfg.params.probe_attached) {
    s.payload = dynamics::PayloadState{cfg.initial_link_dir.normalized(), Vec3::Zero()};
  }
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(v.begin(), mid));
}

}  // namespace

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Completed: return "completed";
    case Outcome::Incomplete: return "incomplete";
    case Outcome::Diverged: return "diverged";
  }
  return "unknown";
}

const TrackingStats* SimReport::tracking_for(mission::Phase p) const {
  for (const TrackingStats& t : tracking) {
    if (t.phase == p) return &t;
  }
  return nullptr;
}

SimReport run(const SimConfig& cfg) {
  cfg.validate();
  SimReport report;

  dynamics::Params params = cfg.params;
  dynamics::SystemState state = initial_state(cfg);
  const mission::MissionConfig& mcfg = cfg.mission;
  report.plan = mission::plan_throw(mcfg, params);

  const double dt = cfg.sim_dt;
  const int ratio = cfg.mpc_ratio();
  const auto steps = static_cast<std::int64_t>(std::floor(cfg.duration / dt + 1e-9));
  const double ground = mcfg.home.z();

  mission::MissionState ms = mission::initial_mission_state(state, 0.0, mcfg);
  report.timeline.push_back({ms.phase.phase, 0.0});

  mpc::MpcController controller;
  mpc::MpcSolution last_solution;
  last_solution.status = mpc::SolveStatus::Optimal;
  std::vector<double> solve_times;
  std::int64_t mpc_invocations = 0;

  double u_hold = params.total_mass() * params.gravity;
  double u_applied = u_hold;
  dynamics::ControlInput input{u_hold, Vec3::Zero()};
  Mat3 last_desired = Mat3::Identity();

  std::optional<mission::ProbeBallisticState> probe;
  std::vector<TrackingStats> tracking;
  Phase tracked_phase = ms.phase.phase;
  TrackingStats current_track{tracked_phase};

  double unwrapped_pitch = 0.0;
  double last_pitch = 0.0;

  for (std::int64_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;

    const mission::MissionStep ms_step = mission::mission_step(ms, state, t, report.plan, mcfg, params);
    if (ms_step.state.phase.phase != ms.phase.phase) {
      report.timeline.push_back({ms_step.state.phase.phase, t});
    }
    ms = ms_step.state;
    const mission::ReferenceSet& ref = ms_step.reference;

    if (ms_step.release) {
      const mission::ReleaseResult rel = mission::release_probe(state, params, t);
      state = rel.state;
      params = rel.params;
      probe = rel.probe;
      report.release_count += 1;
      report.release_time = t;
      report.release_point = rel.probe.position;
      report.release_velocity = rel.probe.velocity;
    }

    // Flip bookkeeping on the accumulated body pitch.
    const double pitch = mission::body_pitch(state.quad.attitude);
    if (ms.phase.phase == Phase::FlipThrow && report.flip_start < 0.0) {
      report.flip_start = t;
      unwrapped_pitch = 0.0;
      last_pitch = pitch;
    } else if (report.flip_start >= 0.0 &&
               (ms.phase.phase == Phase::FlipThrow || ms.phase.phase == Phase::Recovery ||
                report.upright_after < 0.0)) {
      unwrapped_pitch += std::remainder(pitch - last_pitch, 2.0 * std::numbers::pi);
      last_pitch = pitch;
      if (report.upright_after < 0.0 && unwrapped_pitch > std::numbers::pi &&
          state.quad.attitude(2, 2) > mcfg.tol.upright_r33) {
        report.upright_after = t - report.flip_start;
        report.flip_angle_at_upright = unwrapped_pitch;
      }
      report.flip_revolution = unwrapped_pitch;
    }
    report.peak_pitch_rate = std::max(report.peak_pitch_rate, std::abs(state.quad.body_rate.y()));

    const double mass = params.total_mass();
    const double g = params.gravity;
    Vec3 rate_cmd;
    if (ref.mode == mission::ReferenceMode::Position) {
      const mpc::PredictionModel model{mass, g, cfg.mpc.dt, cfg.lateral_kp, cfg.lateral_kd};
      mpc::MpcState x_now;
      x_now << state.quad.position, state.quad.velocity,
          dynamics::derivative(state, input, params).velocity;

      if (i % ratio == 0) {
        mpc::MpcProblem problem;
        problem.x0 = x_now;
        problem.u_prev = u_applied;
        problem.config = cfg.mpc;
        problem.model = model;
        problem.reference.reserve(static_cast<std::size_t>(cfg.mpc.horizon + 1));
        for (int k = 0; k <= cfg.mpc.horizon; ++k) {
          problem.reference.push_back(ref.state_at(t + k * cfg.mpc.dt));
        }
        const bool force_fail =
            std::find(cfg.mpc_fail_calls.begin(), cfg.mpc_fail_calls.end(), mpc_invocations) !=
            cfg.mpc_fail_calls.end();
        ++mpc_invocations;
        ++report.mpc_expected_calls;
        try {
          last_solution = controller.update(problem, force_fail);
          u_hold = last_solution.inputs.front();
        } catch (const NoFeasibleHistory&) {
          u_hold = model.hover_input();
          ++report.mpc_hover_commands;
        }
        ++report.mpc_calls;
        solve_times.push_back(last_solution.solve_time_us);
        u_applied = u_hold;
      }

      const Vec2 lateral = model.lateral_command(x_now, ref.x_ref);
      const Vec3 force(mass * lateral.x(), mass * lateral.y(), u_hold - mass * g);
      try {
        last_desired = attitude::desired_attitude(force, 0.0, mass, g);
      } catch (const Error&) {
        // Keep the previous desired attitude through a degenerate command.
      }
      rate_cmd = attitude::body_rate_command(
          attitude::attitude_error(state.quad.attitude, last_desired), cfg.attitude);
      const double thrust = (force + mass * g * kE3).dot(state.quad.attitude.col(2));
      input.thrust = std::clamp(thrust, 0.0, cfg.max_thrust);
    } else {
      rate_cmd = ref.omega_d;
      input.thrust = std::clamp(ref.thrust, 0.0, cfg.max_thrust);
    }
    input.moment = attitude::rate_loop_moment(rate_cmd, state.quad.body_rate, params.inertia,
                                              cfg.attitude);
    ++report.attitude_calls;

    // Steady-phase tracking against the active reference segment.
    if (ref.mode == mission::ReferenceMode::Position && !ms.failsafe) {
      if (ms.phase.phase != tracked_phase) {
        if (current_track.displacement > 0.0 || current_track.max_error > 0.0) {
          tracking.push_back(current_track);
        }
        tracked_phase = ms.phase.phase;
        current_track = TrackingStats{tracked_phase};
      }
      current_track.displacement =
          (ms.segment.end().position - ms.segment.start().position).norm();
      current_track.max_error = std::max(
          current_track.max_error, (state.quad.position - ref.x_ref.head<3>()).norm());
    }

    if (cfg.keep_records) {
      LogRecord r;
      r.t = t;
      r.phase = ms.phase.phase;
      r.position = state.quad.position;
      r.velocity = state.quad.velocity;
      r.attitude = quaternion_xyzw(state.quad.attitude);
      r.body_rate = state.quad.body_rate;
      r.probe_attached = params.probe_attached && state.payload.has_value();
      if (r.probe_attached) {
        r.link_dir = state.payload->link_dir;
        r.link_omega = state.payload->link_omega;
        r.probe_position = dynamics::probe_position(state, params);
        r.probe_velocity = dynamics::probe_velocity(state, params);
      } else if (probe) {
        r.probe_position = probe->position;
        r.probe_velocity = report.probe_landed ? Vec3::Zero() : probe->velocity;
      }
      r.thrust = input.thrust;
      r.moment = input.moment;
      r.reference_position = ref.x_ref.head<3>();
      r.mpc_cost = last_solution.cost;
      r.mpc_status = last_solution.status;
      r.mpc_solved = ref.mode == mission::ReferenceMode::Position && i % ratio == 0;
      r.solve_us = r.mpc_solved ? last_solution.solve_time_us : 0.0;
      report.records.push_back(r);
    }

    state = dynamics::step(state, input, params, dt);
    report.steps = i + 1;
    report.sim_time = t + dt;

    if (probe && !report.probe_landed) {
      const mission::ProbeBallisticState next = probe->propagate(dt, params.gravity);
      if (next.position.z() <= ground) {
        const double tl = probe->time_to_ground(ground, params.gravity);
        *probe = probe->propagate(tl, params.gravity);
        probe->position.z() = ground;
        report.probe_landed = true;
        report.landing_point = probe->position;
        report.landing_distance = (report.landing_point - report.release_point).head<2>().norm();
      } else {
        *probe = next;
      }
    }

    if (diverged(state)) {
      report.outcome = Outcome::Diverged;
      report.diverged_tick = i;
      report.diverged_detail = "state non-finite or beyond 1e6 after tick " + std::to_string(i);
      break;
    }
    if (ms.complete && (!probe || report.probe_landed)) break;
  }

  if (current_track.displacement > 0.0 || current_track.max_error > 0.0) {
    tracking.push_back(current_track);
  }
  report.tracking = std::move(tracking);
  report.phase_reached = ms.phase.phase;
  report.failsafe = ms.failsafe;
  report.mpc_fallbacks = controller.fallback_count();
  report.mpc_solve_us_median = median(solve_times);
  report.mpc_solve_us_max =
      solve_times.empty() ? 0.0 : *std::max_element(solve_times.begin(), solve_times.end());
  if (report.outcome != Outcome::Diverged) {
    report.outcome = ms.complete ? Outcome::Completed : Outcome::Incomplete;
  }
  return report;
}

}  // namespace quadflip::sim

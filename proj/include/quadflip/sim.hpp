#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quadflip/config.hpp"
#include "quadflip/mission.hpp"
#include "quadflip/mpc.hpp"

namespace quadflip::sim {

/// One row per dynamics step; field order is the CSV column order.
struct LogRecord {
  double t = 0.0;
  mission::Phase phase = mission::Phase::Takeoff;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec4 attitude = Vec4(0, 0, 0, 1);  // quaternion [x, y, z, w]
  Vec3 body_rate = Vec3::Zero();
  bool probe_attached = false;
  Vec3 link_dir = Vec3::Zero();    // zero once released
  Vec3 link_omega = Vec3::Zero();  // zero once released
  Vec3 probe_position = Vec3::Zero();
  Vec3 probe_velocity = Vec3::Zero();
  double thrust = 0.0;
  Vec3 moment = Vec3::Zero();
  Vec3 reference_position = Vec3::Zero();
  double mpc_cost = 0.0;
  mpc::SolveStatus mpc_status = mpc::SolveStatus::Optimal;
  bool mpc_solved = false;  // MPC invoked on this step
  double solve_us = 0.0;  // wall clock; excluded from determinism checks
};

enum class Outcome { Completed, Incomplete, Diverged };

std::string_view to_string(Outcome o);

struct PhaseEntry {
  mission::Phase phase;
  double entered_at;
};

struct TrackingStats {
  mission::Phase phase;
  double max_error = 0.0;     // max |p - p_ref|, m
  double displacement = 0.0;  // |segment end - segment start|, m
  double relative() const { return displacement > 0.0 ? max_error / displacement : 0.0; }
};

struct SimReport {
  Outcome outcome = Outcome::Incomplete;
  std::optional<std::int64_t> diverged_tick;
  std::string diverged_detail;

  std::vector<PhaseEntry> timeline;
  mission::Phase phase_reached = mission::Phase::Takeoff;
  bool failsafe = false;
  double sim_time = 0.0;
  std::int64_t steps = 0;

  mission::ThrowPlan plan;
  int release_count = 0;
  double release_time = -1.0;
  Vec3 release_point = Vec3::Zero();
  Vec3 release_velocity = Vec3::Zero();
  bool probe_landed = false;
  Vec3 landing_point = Vec3::Zero();
  double landing_distance = 0.0;  // horizontal distance release -> landing

  double peak_pitch_rate = 0.0;
  double flip_start = -1.0;
  double flip_angle_at_upright = 0.0;  // accumulated pitch when back upright
  double upright_after = -1.0;         // s from flip start to R33 > threshold
  double flip_revolution = 0.0;        // accumulated pitch when recovery ends

  std::vector<TrackingStats> tracking;

  std::int64_t mpc_calls = 0;
  std::int64_t mpc_expected_calls = 0;
  std::int64_t attitude_calls = 0;
  int mpc_fallbacks = 0;
  int mpc_hover_commands = 0;
  double mpc_solve_us_median = 0.0;
  double mpc_solve_us_max = 0.0;

  std::vector<LogRecord> records;

  const TrackingStats* tracking_for(mission::Phase p) const;
};

/// Closed-loop mission: dynamics every sim_dt, MPC every mpc.dt, attitude
/// and rate loops every step. Throws ConfigError on an invalid config.
SimReport run(const SimConfig& config);

/// CSV: fixed header, 9 significant digits, LF line endings. Throws IoError.
void write_logs(const std::vector<LogRecord>& records, const std::string& path);
std::vector<LogRecord> read_logs(const std::string& path);
std::string log_header();

/// JSON report (no per-step records). Throws IoError.
void write_report(const SimReport& report, const std::string& path);
std::string report_json(const SimReport& report);

}  // namespace quadflip::sim

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadflip/attitude.hpp"
#include "quadflip/dynamics.hpp"
#include "quadflip/mission.hpp"
#include "quadflip/mpc.hpp"

namespace quadflip::sim {

inline constexpr int kConfigVersion = 1;

struct SimConfig {
  dynamics::Params params;
  Vec3 initial_link_dir = -Vec3::UnitZ();

  mpc::MpcConfig mpc;
  double lateral_kp = 6.25;
  double lateral_kd = 5.0;
  double max_thrust = 2.0 * 1.2 * 9.81;  // collective limit, N

  attitude::AttitudeGains attitude;
  mission::MissionConfig mission;

  double sim_dt = 0.001;
  double duration = 90.0;
  std::uint64_t seed = 0;
  double initial_position_jitter = 0.0;  // uniform +/- per axis, m
  std::vector<int> mpc_fail_calls;       // MPC invocations forced to fail

  std::string log_file = "log.csv";
  std::string report_file = "report.json";
  bool keep_records = true;

  /// Throws ConfigError.
  void validate() const;
  /// Dynamics steps per MPC period.
  int mpc_ratio() const;
};

/// Defaults: thrust bounds follow the vehicle mass (0 to twice hover).
SimConfig default_config();

/// Parses a versioned JSON document; missing keys take defaults, unknown
/// keys are rejected. Throws ConfigError.
SimConfig parse_config(const std::string& json_text);
SimConfig load_config(const std::string& path);

/// Canonical JSON form of a configuration (all keys present).
std::string dump_config(const SimConfig& config);

}  // namespace quadflip::sim

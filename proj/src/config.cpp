#include "quadflip/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "quadflip/errors.hpp"

namespace quadflip::sim {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Reads optional keys from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  void get_vec3(const std::string& key, Vec3& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(path_ + "." + key + ": expected [x, y, z]");
    for (int i = 0; i < 3; ++i) out(i) = number(v[i], key);
  }

  template <int N>
  void get_diag(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != N) {
      throw ConfigError(path_ + "." + key + ": expected " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) out(i) = number(v[i], key);
  }

  void get_matrix3(const std::string& key, Mat3& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (v.is_array() && v.size() == 3 && v[0].is_number()) {
      out = Vec3(number(v[0], key), number(v[1], key), number(v[2], key)).asDiagonal();
      return;
    }
    if (!v.is_array() || v.size() != 3) throw ConfigError(path_ + "." + key + ": expected 3x3");
    for (int r = 0; r < 3; ++r) {
      if (!v[r].is_array() || v[r].size() != 3) throw ConfigError(path_ + "." + key + ": expected 3x3");
      for (int c = 0; c < 3; ++c) out(r, c) = number(v[r][c], key);
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : kEmpty, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  double number(const json& v, const std::string& key) const {
    if (!v.is_number()) throw ConfigError(path_ + "." + key + ": expected a number");
    return v.get<double>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <int N>
json diag_json(const Eigen::Matrix<double, N, 1>& v) {
  json a = json::array();
  for (int i = 0; i < N; ++i) a.push_back(v(i));
  return a;
}

std::string trigger_name(mission::ReleaseTrigger t) {
  switch (t) {
    case mission::ReleaseTrigger::PredictedRange: return "predicted_range";
    case mission::ReleaseTrigger::LaunchElevation: return "launch_elevation";
    case mission::ReleaseTrigger::BodyPitch: return "body_pitch";
  }
  return "predicted_range";
}

}  // namespace

void SimConfig::validate() const {
  params.validate();
  mpc.validate();
  attitude.validate();
  mission.validate();
  if (!(sim_dt > 0.0)) throw ConfigError("sim.dt must be > 0");
  if (!(duration >= 0.0)) throw ConfigError("sim.duration must be >= 0");
  const double ratio = mpc.dt / sim_dt;
  if (std::abs(ratio - std::round(ratio)) * sim_dt > 1e-9 || std::round(ratio) < 1.0) {
    throw ConfigError("sim.dt must divide mpc.dt");
  }
  if (!(max_thrust > 0.0)) throw ConfigError("max_thrust must be > 0");
  if (!(initial_position_jitter >= 0.0)) throw ConfigError("initial_position_jitter must be >= 0");
  if (!(initial_link_dir.norm() > 0.0)) throw ConfigError("initial_link_dir must be non-zero");
}

int SimConfig::mpc_ratio() const { return static_cast<int>(std::lround(mpc.dt / sim_dt)); }

SimConfig default_config() {
  SimConfig c;
  const double hover = c.params.total_mass() * c.params.gravity;
  c.mpc.u_min = 0.0;
  c.mpc.u_max = 2.0 * hover;
  c.max_thrust = c.mpc.u_max;
  return c;
}

SimConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json_text.find_first_not_of(" \t\r\n") == std::string::npos ? json::object()
                                                                         : json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  SimConfig c;
  Section top(root, "config");
  int version = kConfigVersion;
  top.get("version", version);
  if (version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version));
  }

  {
    Section s = top.child("vehicle");
    s.get("quad_mass", c.params.quad_mass);
    s.get("probe_mass", c.params.probe_mass);
    s.get("link_length", c.params.link_length);
    s.get_matrix3("inertia", c.params.inertia);
    s.get("gravity", c.params.gravity);
    s.get("probe_attached", c.params.probe_attached);
    s.get_vec3("initial_link_dir", c.initial_link_dir);
    s.finish();
  }

  const double hover = c.params.total_mass() * c.params.gravity;
  c.mpc.u_max = 2.0 * hover;
  bool max_thrust_given = false;
  {
    Section s = top.child("mpc");
    s.get("horizon", c.mpc.horizon);
    s.get("dt", c.mpc.dt);
    s.get_diag("q", c.mpc.q_diag);
    s.get_diag("p", c.mpc.p_diag);
    s.get("r", c.mpc.r_weight);
    s.get("u_min", c.mpc.u_min);
    s.get("u_max", c.mpc.u_max);
    s.get("max_sqp_iters", c.mpc.max_sqp_iters);
    s.get("kkt_tol", c.mpc.kkt_tol);
    s.get("lateral_kp", c.lateral_kp);
    s.get("lateral_kd", c.lateral_kd);
    max_thrust_given = s.has("max_thrust");
    s.get("max_thrust", c.max_thrust);
    s.finish();
  }
  if (!max_thrust_given) c.max_thrust = c.mpc.u_max;

  {
    Section s = top.child("attitude");
    s.get("tau_omega", c.attitude.tau_omega);
    s.get("rate_time_constant", c.attitude.rate_time_constant);
    s.finish();
  }

  {
    mission::MissionConfig& m = c.mission;
    Section s = top.child("mission");
    s.get_vec3("home", m.home);
    s.get("takeoff_altitude", m.takeoff_altitude);
    s.get_vec3("rally", m.rally);
    s.get("eps_position", m.tol.position);
    s.get("eps_velocity", m.tol.velocity);
    s.get("eps_rate", m.tol.rate);
    s.get("upright_r33", m.tol.upright_r33);
    s.get("hold_dwell", m.tol.hold_dwell);
    s.get("phase_timeout", m.tol.phase_timeout);
    s.get("cruise_accel", m.cruise_accel);
    s.get("recovery_accel", m.recovery_accel);
    s.get("runup_accel", m.runup_accel);
    s.get("flip_rate", m.flip_rate);
    s.get("flip_rate_cap", m.flip_rate_cap);
    s.get("flip_exit_angle", m.flip_exit_angle);
    s.get("flip_thrust_fraction", m.flip_thrust_fraction);
    s.get("ascend_climb", m.ascend_climb);
    s.get("ascend_speed", m.ascend_speed);
    s.get("coast_before_release", m.coast_before_release);
    if (s.has("release_trigger")) {
      std::string t;
      s.get("release_trigger", t);
      if (t == "predicted_range") {
        m.trigger = mission::ReleaseTrigger::PredictedRange;
      } else if (t == "launch_elevation") {
        m.trigger = mission::ReleaseTrigger::LaunchElevation;
      } else if (t == "body_pitch") {
        m.trigger = mission::ReleaseTrigger::BodyPitch;
      } else {
        throw ConfigError("config.mission.release_trigger: unknown value '" + t + "'");
      }
    }
    s.finish();
  }

  {
    mission::MissionConfig& m = c.mission;
    Section s = top.child("throw");
    s.get("enabled", m.throw_enabled);
    s.get("range", m.throw_range);
    s.get("v_max", m.throw_v_max);
    double lo = m.throw_theta_min / kDeg;
    double hi = m.throw_theta_max / kDeg;
    s.get("theta_min_deg", lo);
    s.get("theta_max_deg", hi);
    m.throw_theta_min = lo * kDeg;
    m.throw_theta_max = hi * kDeg;
    s.finish();
  }

  {
    Section s = top.child("sim");
    s.get("dt", c.sim_dt);
    s.get("duration", c.duration);
    s.get("seed", c.seed);
    s.get("initial_position_jitter", c.initial_position_jitter);
    s.get("mpc_fail_calls", c.mpc_fail_calls);
    s.finish();
  }

  {
    Section s = top.child("output");
    s.get("log", c.log_file);
    s.get("report", c.report_file);
    s.finish();
  }
  top.finish();

  c.validate();
  return c;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const SimConfig& c) {
  const mission::MissionConfig& m = c.mission;
  json inertia = json::array();
  for (int r = 0; r < 3; ++r) {
    inertia.push_back(json::array({c.params.inertia(r, 0), c.params.inertia(r, 1), c.params.inertia(r, 2)}));
  }
  json j = {
      {"version", kConfigVersion},
      {"vehicle",
       {{"quad_mass", c.params.quad_mass},
        {"probe_mass", c.params.probe_mass},
        {"link_length", c.params.link_length},
        {"inertia", inertia},
        {"gravity", c.params.gravity},
        {"probe_attached", c.params.probe_attached},
        {"initial_link_dir", vec_json(c.initial_link_dir)}}},
      {"mpc",
       {{"horizon", c.mpc.horizon},
        {"dt", c.mpc.dt},
        {"q", diag_json(c.mpc.q_diag)},
        {"p", diag_json(c.mpc.p_diag)},
        {"r", c.mpc.r_weight},
        {"u_min", c.mpc.u_min},
        {"u_max", c.mpc.u_max},
        {"max_sqp_iters", c.mpc.max_sqp_iters},
        {"kkt_tol", c.mpc.kkt_tol},
        {"lateral_kp", c.lateral_kp},
        {"lateral_kd", c.lateral_kd},
        {"max_thrust", c.max_thrust}}},
      {"attitude",
       {{"tau_omega", c.attitude.tau_omega}, {"rate_time_constant", c.attitude.rate_time_constant}}},
      {"mission",
       {{"home", vec_json(m.home)},
        {"takeoff_altitude", m.takeoff_altitude},
        {"rally", vec_json(m.rally)},
        {"eps_position", m.tol.position},
        {"eps_velocity", m.tol.velocity},
        {"eps_rate", m.tol.rate},
        {"upright_r33", m.tol.upright_r33},
        {"hold_dwell", m.tol.hold_dwell},
        {"phase_timeout", m.tol.phase_timeout},
        {"cruise_accel", m.cruise_accel},
        {"recovery_accel", m.recovery_accel},
        {"runup_accel", m.runup_accel},
        {"flip_rate", m.flip_rate},
        {"flip_rate_cap", std::isfinite(m.flip_rate_cap) ? json(m.flip_rate_cap) : json(nullptr)},
        {"flip_exit_angle", m.flip_exit_angle},
        {"flip_thrust_fraction", m.flip_thrust_fraction},
        {"ascend_climb", m.ascend_climb},
        {"ascend_speed", m.ascend_speed},
        {"coast_before_release", m.coast_before_release},
        {"release_trigger", trigger_name(m.trigger)}}},
      {"throw",
       {{"enabled", m.throw_enabled},
        {"range", m.throw_range},
        {"v_max", m.throw_v_max},
        {"theta_min_deg", m.throw_theta_min / kDeg},
        {"theta_max_deg", m.throw_theta_max / kDeg}}},
      {"sim",
       {{"dt", c.sim_dt},
        {"duration", c.duration},
        {"seed", c.seed},
        {"initial_position_jitter", c.initial_position_jitter},
        {"mpc_fail_calls", c.mpc_fail_calls}}},
      {"output", {{"log", c.log_file}, {"report", c.report_file}}},
  };
  return j.dump(2);
}

}  // namespace quadflip::sim

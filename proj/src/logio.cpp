#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "quadflip/errors.hpp"
#include "quadflip/sim.hpp"

namespace quadflip::sim {

namespace {

constexpr std::array<const char*, 39> kColumns = {
    "t",        "phase",    "px",       "py",       "pz",        "vx",         "vy",
    "vz",       "qx",       "qy",       "qz",       "qw",        "wx",         "wy",
    "wz",       "probe_attached", "link_dx", "link_dy", "link_dz", "link_wx", "link_wy",
    "link_wz",  "probe_x",  "probe_y",  "probe_z",  "probe_vx",  "probe_vy",   "probe_vz",
    "thrust",   "mx",       "my",       "mz",       "ref_x",     "ref_y",      "ref_z",
    "mpc_cost", "mpc_status", "mpc_solved", "solve_us"};

void put(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), ",%.9g", v);
  line += buf;
}

void put(std::string& line, const Vec3& v) {
  for (int i = 0; i < 3; ++i) put(line, v(i));
}

std::optional<mpc::SolveStatus> status_from_string(std::string_view s) {
  for (auto st : {mpc::SolveStatus::Optimal, mpc::SolveStatus::MaxIters, mpc::SolveStatus::Infeasible}) {
    if (mpc::to_string(st) == s) return st;
  }
  return std::nullopt;
}

}  // namespace

std::string log_header() {
  std::string h;
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i) h += ',';
    h += kColumns[i];
  }
  return h;
}

void write_logs(const std::vector<LogRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write log file " + path);
  out << log_header() << '\n';
  std::string line;
  for (const LogRecord& r : records) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", r.t);
    line = buf;
    line += ',';
    line += mission::to_string(r.phase);
    put(line, r.position);
    put(line, r.velocity);
    for (int i = 0; i < 4; ++i) put(line, r.attitude(i));
    put(line, r.body_rate);
    line += r.probe_attached ? ",1" : ",0";
    put(line, r.link_dir);
    put(line, r.link_omega);
    put(line, r.probe_position);
    put(line, r.probe_velocity);
    put(line, r.thrust);
    put(line, r.moment);
    put(line, r.reference_position);
    put(line, r.mpc_cost);
    line += ',';
    line += mpc::to_string(r.mpc_status);
    line += r.mpc_solved ? ",1" : ",0";
    put(line, r.solve_us);
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("failed while writing " + path);
}

std::vector<LogRecord> read_logs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read log file " + path);
  std::string line;
  if (!std::getline(in, line) || line != log_header()) throw IoError(path + ": unexpected header");

  std::vector<LogRecord> records;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    cells.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != kColumns.size()) throw IoError(path + ": malformed row");

    std::size_t c = 0;
    auto num = [&]() { return std::strtod(cells[c++].c_str(), nullptr); };
    auto vec = [&]() {
      Vec3 v;
      for (int i = 0; i < 3; ++i) v(i) = num();
      return v;
    };
    LogRecord r;
    r.t = num();
    const auto phase = mission::phase_from_string(cells[c++]);
    if (!phase) throw IoError(path + ": unknown phase");
    r.phase = *phase;
    r.position = vec();
    r.velocity = vec();
    for (int i = 0; i < 4; ++i) r.attitude(i) = num();
    r.body_rate = vec();
    r.probe_attached = cells[c++] == "1";
    r.link_dir = vec();
    r.link_omega = vec();
    r.probe_position = vec();
    r.probe_velocity = vec();
    r.thrust = num();
    r.moment = vec();
    r.reference_position = vec();
    r.mpc_cost = num();
    const auto status = status_from_string(cells[c++]);
    if (!status) throw IoError(path + ": unknown solver status");
    r.mpc_status = *status;
    r.mpc_solved = cells[c++] == "1";
    r.solve_us = num();
    records.push_back(r);
  }
  return records;
}

std::string report_json(const SimReport& r) {
  using nlohmann::json;
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };

  json timeline = json::array();
  for (const PhaseEntry& e : r.timeline) {
    timeline.push_back({{"phase", mission::to_string(e.phase)}, {"entered_at", e.entered_at}});
  }
  json tracking = json::array();
  for (const TrackingStats& t : r.tracking) {
    tracking.push_back({{"phase", mission::to_string(t.phase)},
                        {"max_error", t.max_error},
                        {"displacement", t.displacement},
                        {"relative", t.relative()}});
  }
  json j = {
      {"schema", "quadflip.report/1"},
      {"outcome", to_string(r.outcome)},
      {"phase_reached", mission::to_string(r.phase_reached)},
      {"failsafe", r.failsafe},
      {"sim_time", r.sim_time},
      {"steps", r.steps},
      {"timeline", timeline},
      {"throw_plan",
       {{"enabled", r.plan.enabled},
        {"release_speed", r.plan.release_speed},
        {"release_angle_deg", r.plan.release_angle * 180.0 / std::numbers::pi},
        {"desired_range", r.plan.desired_range},
        {"release_height", r.plan.release_height},
        {"launch_velocity", vec(r.plan.launch_velocity)},
        {"runup_duration", r.plan.runup_duration}}},
      {"probe",
       {{"release_count", r.release_count},
        {"release_time", r.release_time},
        {"release_point", vec(r.release_point)},
        {"release_velocity", vec(r.release_velocity)},
        {"landed", r.probe_landed},
        {"landing_point", vec(r.landing_point)},
        {"landing_distance", r.landing_distance}}},
      {"flip",
       {{"start", r.flip_start},
        {"peak_pitch_rate", r.peak_pitch_rate},
        {"angle_at_upright", r.flip_angle_at_upright},
        {"upright_after", r.upright_after},
        {"revolution", r.flip_revolution}}},
      {"tracking", tracking},
      {"mpc",
       {{"calls", r.mpc_calls},
        {"expected_calls", r.mpc_expected_calls},
        {"fallbacks", r.mpc_fallbacks},
        {"hover_commands", r.mpc_hover_commands},
        {"solve_us_median", r.mpc_solve_us_median},
        {"solve_us_max", r.mpc_solve_us_max}}},
      {"attitude_calls", r.attitude_calls},
      {"records", r.records.size()},
  };
  if (r.diverged_tick) {
    j["diverged_tick"] = *r.diverged_tick;
    j["diverged_detail"] = r.diverged_detail;
  }
  return j.dump(2);
}

void write_report(const SimReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report file " + path);
  out << report_json(report) << '\n';
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace quadflip::sim

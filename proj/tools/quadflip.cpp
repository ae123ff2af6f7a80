#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quadflip/config.hpp"
#include "quadflip/errors.hpp"
#include "quadflip/sim.hpp"
#include "quadflip/trials.hpp"
#include "quadflip/verify.hpp"

namespace fs = std::filesystem;
using namespace quadflip;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIncomplete = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitConfig = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

sim::SimConfig load(const Common& common) {
  sim::SimConfig cfg =
      common.config_path.empty() ? sim::default_config() : sim::load_config(common.config_path);
  if (common.seed) cfg.seed = *common.seed;
  return cfg;
}

fs::path out_path(const Common& common, const std::string& file) {
  fs::create_directories(common.out_dir);
  return fs::path(common.out_dir) / file;
}

int cmd_run(const Common& common) {
  const sim::SimConfig cfg = load(common);
  const sim::SimReport report = sim::run(cfg);
  const fs::path log = out_path(common, cfg.log_file);
  const fs::path rep = out_path(common, cfg.report_file);
  sim::write_logs(report.records, log.string());
  sim::write_report(report, rep.string());

  std::printf("outcome        %s (phase reached: %s)\n", std::string(sim::to_string(report.outcome)).c_str(),
              std::string(mission::to_string(report.phase_reached)).c_str());
  if (report.diverged_tick) std::printf("diverged       %s\n", report.diverged_detail.c_str());
  std::printf("sim time       %.3f s, %lld steps\n", report.sim_time,
              static_cast<long long>(report.steps));
  if (report.probe_landed) {
    std::printf("probe landing  (%.3f, %.3f, %.3f), %.3f m from release\n", report.landing_point.x(),
                report.landing_point.y(), report.landing_point.z(), report.landing_distance);
  }
  std::printf("peak pitch     %.3f rad/s\n", report.peak_pitch_rate);
  std::printf("mpc            %lld calls, %d fallbacks, median %.1f us\n",
              static_cast<long long>(report.mpc_calls), report.mpc_fallbacks,
              report.mpc_solve_us_median);
  std::printf("log            %s\nreport         %s\n", log.string().c_str(), rep.string().c_str());

  switch (report.outcome) {
    case sim::Outcome::Completed: return kExitOk;
    case sim::Outcome::Diverged: return kExitDiverged;
    case sim::Outcome::Incomplete: return kExitIncomplete;
  }
  return kExitIncomplete;
}

int cmd_trials(const Common& common, int count, double jitter) {
  const sim::SimConfig cfg = load(common);
  const std::vector<sim::TrialResult> trials = sim::run_trials(cfg, count, jitter);

  nlohmann::json rows = nlohmann::json::array();
  int diverged = 0;
  int completed = 0;
  std::printf("trial  seed  outcome     peak rad/s  turned rad  upright s  flip\n");
  for (const sim::TrialResult& t : trials) {
    const std::string outcome(sim::to_string(t.outcome));
    std::printf("%5d  %4llu  %-10s  %10.4f  %10.4f  %9.3f  %s\n", t.index,
                static_cast<unsigned long long>(t.seed), outcome.c_str(), t.peak_pitch_rate,
                t.flip_angle, t.upright_after, t.flip_completed ? "ok" : "FAILED");
    diverged += t.outcome == sim::Outcome::Diverged ? 1 : 0;
    completed += t.flip_completed ? 1 : 0;
    rows.push_back({{"index", t.index},
                    {"seed", t.seed},
                    {"outcome", outcome},
                    {"peak_pitch_rate", t.peak_pitch_rate},
                    {"flip_angle", t.flip_angle},
                    {"upright_after", t.upright_after},
                    {"flip_completed", t.flip_completed}});
  }
  const double spread = sim::peak_rate_spread(trials);
  std::printf("%d/%d flips completed, %d diverged, peak-rate spread %.4f%%\n", completed, count,
              diverged, 100.0 * spread);

  const fs::path path = out_path(common, "trials.json");
  std::ofstream out(path);
  out << nlohmann::json{{"count", count}, {"jitter", jitter}, {"spread", spread}, {"trials", rows}}
             .dump(2)
      << '\n';
  if (!out) throw IoError("cannot write " + path.string());

  if (diverged > 0) return kExitDiverged;
  return completed == count ? kExitOk : kExitIncomplete;
}

int cmd_verify(const Common& common, bool quiet) {
  const sim::SimConfig cfg = load(common);
  const std::vector<verify::Criterion> criteria = verify::run_all(cfg);
  std::fputs(verify::format_table(criteria, !quiet).c_str(), stdout);
  int failed = 0;
  for (const verify::Criterion& c : criteria) failed += c.pass() ? 0 : 1;
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? kExitOk : kExitIncomplete;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadrotor flip-and-throw mission simulator"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "JSON mission configuration")
      ->check(CLI::ExistingFile);
  app.add_option("--out-dir", common.out_dir, "Directory for logs and reports");
  app.add_option("--seed", common.seed, "Override the configured seed");
  app.fallthrough();

  CLI::App* run = app.add_subcommand("run", "Run the full mission and write log + report");
  int count = 8;
  double jitter = 0.05;
  CLI::App* trials = app.add_subcommand("flip-trials", "Repeated flip-only trials");
  trials->add_option("--count", count, "Number of trials")->check(CLI::PositiveNumber);
  trials->add_option("--jitter", jitter, "Initial position perturbation, m")
      ->check(CLI::NonNegativeNumber);
  bool quiet = false;
  CLI::App* ver = app.add_subcommand("verify", "Run the acceptance oracles");
  ver->add_flag("--quiet", quiet, "Only one line per criterion");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(common);
    if (trials->parsed()) return cmd_trials(common, count, jitter);
    if (ver->parsed()) return cmd_verify(common, quiet);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIncomplete;
  }
  return kExitIncomplete;
}

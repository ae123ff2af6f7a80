#include "quadflip/trials.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace quadflip::sim {

namespace {

TrialResult run_one(const SimConfig& base, int index, double jitter) {
  const SimConfig cfg = trial_config(base, index, jitter);
  const SimReport report = run(cfg);
  TrialResult r;
  r.index = index;
  r.seed = cfg.seed;
  r.outcome = report.outcome;
  r.peak_pitch_rate = report.peak_pitch_rate;
  r.flip_angle = report.flip_revolution;
  r.upright_after = report.upright_after;
  r.flip_completed = report.outcome != Outcome::Diverged && report.upright_after >= 0.0 &&
                     report.upright_after <= 5.0 &&
                     std::abs(report.flip_revolution - 2.0 * std::numbers::pi) < 0.2;
  return r;
}

}  // namespace

SimConfig trial_config(const SimConfig& base, int index, double jitter) {
  SimConfig cfg = base;
  cfg.params.probe_attached = false;
  cfg.mission.throw_enabled = false;
  cfg.initial_position_jitter = jitter;
  cfg.seed = base.seed + static_cast<std::uint64_t>(index);
  cfg.keep_records = false;
  cfg.mpc_fail_calls.clear();
  return cfg;
}

std::vector<TrialResult> run_trials(const SimConfig& base, int count, double jitter) {
  std::vector<TrialResult> results(static_cast<std::size_t>(std::max(count, 0)));
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < count; ++i) {
    results[static_cast<std::size_t>(i)] = run_one(base, i, jitter);
  }
  return results;
}

std::vector<TrialResult> run_trials_serial(const SimConfig& base, int count, double jitter) {
  std::vector<TrialResult> results;
  for (int i = 0; i < count; ++i) results.push_back(run_one(base, i, jitter));
  return results;
}

double peak_rate_spread(const std::vector<TrialResult>& trials) {
  if (trials.empty()) return 0.0;
  double lo = trials.front().peak_pitch_rate;
  double hi = lo;
  double sum = 0.0;
  for (const TrialResult& t : trials) {
    lo = std::min(lo, t.peak_pitch_rate);
    hi = std::max(hi, t.peak_pitch_rate);
    sum += t.peak_pitch_rate;
  }
  const double mean = sum / static_cast<double>(trials.size());
  return mean > 0.0 ? (hi - lo) / mean : 0.0;
}

}  // namespace quadflip::sim

#pragma once

#include <cstdint>
#include <vector>

#include "quadflip/config.hpp"
#include "quadflip/sim.hpp"

namespace quadflip::sim {

struct TrialResult {
  int index = 0;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Incomplete;
  double peak_pitch_rate = 0.0;
  double flip_angle = 0.0;
  double upright_after = -1.0;
  bool flip_completed = false;
};

/// Configuration of trial `index`: flip only (probe detached, no throw),
/// initial position jittered by +/- `jitter` metres, seed offset by index.
SimConfig trial_config(const SimConfig& base, int index, double jitter);

/// Independent trials, one per OpenMP iteration. Each trial owns its state,
/// so results match the serial reference exactly.
std::vector<TrialResult> run_trials(const SimConfig& base, int count, double jitter = 0.05);
std::vector<TrialResult> run_trials_serial(const SimConfig& base, int count, double jitter = 0.05);

/// (max - min) / mean of the per-trial peak pitch rates.
double peak_rate_spread(const std::vector<TrialResult>& trials);

}  // namespace quadflip::sim

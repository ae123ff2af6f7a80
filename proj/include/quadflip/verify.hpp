#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quadflip/config.hpp"
#include "quadflip/mpc.hpp"
#include "quadflip/sim.hpp"

// Acceptance checks shared by the `verify` subcommand and the acceptance
// test binary. Oracles here are written independently of the code they check.
namespace quadflip::verify {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id = 0;
  std::string title;
  std::vector<Check> checks;

  bool pass() const;
  std::string summary() const;
};

/// Wall-clocked mission run.
struct TimedRun {
  sim::SimReport report;
  double wall_seconds = 0.0;
};
TimedRun timed_run(sim::SimConfig config);

Criterion throw_accuracy(const TimedRun& mission, double desired_range);
Criterion flip_tracking(const sim::SimReport& mission, const sim::SimReport& capped,
                        double cap);
Criterion steady_tracking(const sim::SimReport& mission);
Criterion repeatability(const sim::SimConfig& base, int count = 8, double jitter = 0.05);
Criterion physics_oracles();
Criterion optimization_oracles(std::uint64_t seed);
Criterion planner_oracles(std::uint64_t seed);

/// All seven criteria on `base` (the default mission unless configured).
std::vector<Criterion> run_all(const sim::SimConfig& base);

/// One line per criterion, then indented sub-checks.
std::string format_table(const std::vector<Criterion>& criteria, bool verbose = true);

// --- oracles --------------------------------------------------------------

/// Minimum speed on a 0.01 m/s grid (up to v_max) reaching `range`, minimised
/// over `n_theta` elevations spanning the bounds. Negative when unreachable.
double grid_min_speed(double range, double height, double v_max, double theta_min,
                      double theta_max, double gravity, int n_theta = 2000,
                      double speed_step = 0.01);

/// Exhaustive active-set KKT solve of min 1/2 x'Hx + g'x, lo <= x <= hi.
/// Exponential in the dimension; for small instances only.
Eigen::VectorXd dense_kkt_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double lo,
                                double hi);

/// Hessian and gradient of the brute-force MPC cost by exact second
/// differences (the cost is quadratic), expanded about `center`.
struct QuadraticFit {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;  // at `center`
  Eigen::VectorXd center;
};
QuadraticFit fit_cost(const mpc::MpcProblem& problem, const Eigen::VectorXd& center,
                      double step = 1.0);

/// Random tracking problem around hover; `aggressive` pushes the reference
/// far enough that the input bounds become active.
mpc::MpcProblem random_problem(std::mt19937_64& rng, int horizon, bool aggressive = false);

}  // namespace quadflip::verify

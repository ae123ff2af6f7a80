#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "quadflip/so3.hpp"

// Receding-horizon translational controller.
//
// State is x = [position, velocity, acceleration] (9), input is the vertical
// thrust channel u (N). The prediction model is a per-axis triple integrator:
// the z acceleration is u/m - g, while the x/y accelerations follow the
// lateral attitude-loop command (reference feed-forward plus PD on the
// predicted state). The resulting model is affine in (x, u), so the tracking
// cost is a convex quadratic in the input sequence and every SQP subproblem
// is a box-constrained QP.
namespace quadflip::mpc {

inline constexpr int kStateDim = 9;
using MpcState = Eigen::Matrix<double, kStateDim, 1>;
using StateWeights = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;

struct MpcConfig {
  int horizon = 10;
  double dt = 0.04;
  StateWeights q_diag = (StateWeights() << 50, 10, 20, 10, 20, 10, 10, 10, 10).finished();
  StateWeights p_diag = (StateWeights() << 100, 100, 10, 10, 10, 10, 10, 10, 10).finished();
  double r_weight = 1.0;
  double u_min = 0.0;
  double u_max = 2.0 * 1.2 * 9.81;
  int max_sqp_iters = 30;
  double kkt_tol = 1e-6;

  void validate() const;
};

struct PredictionModel {
  double mass = 1.2;
  double gravity = 9.81;
  double dt = 0.04;
  double lateral_kp = 6.25;
  double lateral_kd = 5.0;

  /// One step with an explicit lateral acceleration command.
  MpcState predict(const MpcState& x, double u, const Vec2& lateral_cmd = Vec2::Zero()) const;
  /// Lateral attitude-loop command toward `ref`.
  Vec2 lateral_command(const MpcState& x, const MpcState& ref) const;
  /// One step with the lateral loop closed on `ref`.
  MpcState predict_tracking(const MpcState& x, double u, const MpcState& ref) const;
  double hover_input() const { return mass * gravity; }
};

enum class SolveStatus { Optimal, MaxIters, Infeasible };

std::string_view to_string(SolveStatus s);

struct MpcProblem {
  MpcState x0 = MpcState::Zero();
  std::vector<MpcState> reference;  // N + 1 entries
  double u_prev = 0.0;
  MpcConfig config;
  PredictionModel model;
};

struct MpcSolution {
  std::vector<double> inputs;
  std::vector<MpcState> predicted;
  double cost = 0.0;
  SolveStatus status = SolveStatus::Infeasible;
  bool degraded = false;  // produced by fallback()

  int iterations = 0;
  double kkt_residual = 0.0;
  double solve_time_us = 0.0;
  std::vector<double> merit_history;  // cost of each accepted iterate
};

/// States x_0..x_N produced by U.
std::vector<MpcState> rollout(const MpcProblem& problem, const std::vector<double>& inputs);

/// Tracking cost: sum_{k<N} e_k'Q e_k + R (u_k - u_{k-1})^2 + e_N'P e_N.
double cost(const MpcProblem& problem, const std::vector<double>& inputs);

/// Cost written as J(U) = 1/2 U'HU + g'U + c with x_k = free_k + S_k U.
struct CondensedProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  double constant = 0.0;
  Eigen::MatrixXd sensitivity;  // 9(N+1) x N, block k is S_k
  std::vector<MpcState> free_response;
};

CondensedProblem condense(const MpcProblem& problem);

struct BoxQpResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
};

/// min 1/2 x'Hx + g'x s.t. lo <= x <= hi, H symmetric positive definite.
/// Projected Newton with an epsilon-active set and Armijo search along the
/// projection arc.
BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, Eigen::VectorXd x0,
                         double tol, int max_iter = 200);

/// Infinity norm of U - clamp(U - grad J(U)).
double kkt_residual(const CondensedProblem& qp, const Eigen::VectorXd& inputs, double u_min,
                    double u_max);

/// SQP solve. A warm start seeds the first iterate with its inputs shifted
/// one step left. Never throws; failures are reported through `status`.
MpcSolution solve(const MpcProblem& problem,
                  const std::optional<MpcSolution>& warm_start = std::nullopt);

/// Previous plan shifted one step (last input repeated), tagged degraded.
/// Throws NoFeasibleHistory if `previous` is infeasible or empty.
MpcSolution fallback(const MpcSolution& previous);

/// Owns the warm-start cache and applies the fallback rule on any
/// non-optimal solve.
class MpcController {
 public:
  /// Throws NoFeasibleHistory when the solve fails with no prior plan; the
  /// caller is expected to command hover.
  MpcSolution update(const MpcProblem& problem, bool force_failure = false);

  const std::optional<MpcSolution>& last_plan() const { return last_; }
  int fallback_count() const { return fallbacks_; }
  void reset() {
    last_.reset();
    fallbacks_ = 0;
  }

 private:
  std::optional<MpcSolution> last_;
  int fallbacks_ = 0;
};

}  // namespace quadflip::mpc

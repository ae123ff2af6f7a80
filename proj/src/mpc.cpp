#include "quadflip/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "quadflip/errors.hpp"

namespace quadflip::mpc {

void MpcConfig::validate() const {
  if (horizon < 1) throw ConfigError("mpc horizon must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("mpc dt must be > 0");
  if (!(q_diag.minCoeff() >= 0.0) || !(p_diag.minCoeff() >= 0.0)) {
    throw ConfigError("mpc weights must be >= 0");
  }
  if (!(r_weight > 0.0)) throw ConfigError("mpc input-rate weight must be > 0");
  if (!(u_min < u_max)) throw ConfigError("mpc requires u_min < u_max");
  if (max_sqp_iters < 1) throw ConfigError("mpc max_sqp_iters must be >= 1");
  if (!(kkt_tol > 0.0)) throw ConfigError("mpc kkt_tol must be > 0");
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

MpcState PredictionModel::predict(const MpcState& x, double u, const Vec2& lateral_cmd) const {
  const Vec3 acc(lateral_cmd.x(), lateral_cmd.y(), u / mass - gravity);
  MpcState next;
  next.segment<3>(0) = x.segment<3>(0) + dt * x.segment<3>(3) + 0.5 * dt * dt * acc;
  next.segment<3>(3) = x.segment<3>(3) + dt * acc;
  next.segment<3>(6) = acc;
  return next;
}

Vec2 PredictionModel::lateral_command(const MpcState& x, const MpcState& ref) const {
  return ref.segment<2>(6) + lateral_kp * (ref.segment<2>(0) - x.segment<2>(0)) +
         lateral_kd * (ref.segment<2>(3) - x.segment<2>(3));
}

MpcState PredictionModel::predict_tracking(const MpcState& x, double u, const MpcState& ref) const {
  return predict(x, u, lateral_command(x, ref));
}

std::vector<MpcState> rollout(const MpcProblem& problem, const std::vector<double>& inputs) {
  std::vector<MpcState> xs;
  xs.reserve(inputs.size() + 1);
  xs.push_back(problem.x0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    xs.push_back(problem.model.predict_tracking(xs.back(), inputs[k], problem.reference[k]));
  }
  return xs;
}

double cost(const MpcProblem& problem, const std::vector<double>& inputs) {
  const int n = problem.config.horizon;
  const std::vector<MpcState> xs = rollout(problem, inputs);
  double j = 0.0;
  double prev = problem.u_prev;
  for (int k = 0; k < n; ++k) {
    const MpcState e = xs[k] - problem.reference[k];
    j += e.dot(problem.config.q_diag.cwiseProduct(e));
    const double du = inputs[k] - prev;
    j += problem.config.r_weight * du * du;
    prev = inputs[k];
  }
  const MpcState e = xs[n] - problem.reference[n];
  j += e.dot(problem.config.p_diag.cwiseProduct(e));
  return j;
}

CondensedProblem condense(const MpcProblem& problem) {
  const int n = problem.config.horizon;
  const PredictionModel& model = problem.model;
  CondensedProblem qp;

  // The step map is affine, so its linear part is exactly the response
  // difference to unit perturbations.
  const MpcState zero = MpcState::Zero();
  const MpcState base = model.predict_tracking(zero, 0.0, zero);
  StateMatrix A;
  for (int i = 0; i < kStateDim; ++i) {
    A.col(i) = model.predict_tracking(MpcState::Unit(i), 0.0, zero) - base;
  }
  const MpcState B = model.predict_tracking(zero, 1.0, zero) - base;

  qp.free_response = rollout(problem, std::vector<double>(n, 0.0));
  qp.sensitivity = Eigen::MatrixXd::Zero(kStateDim * (n + 1), n);
  for (int j = 0; j < n; ++j) {
    MpcState col = B;
    for (int k = j + 1; k <= n; ++k) {
      qp.sensitivity.block(kStateDim * k, j, kStateDim, 1) = col;
      col = A * col;
    }
  }

  qp.hessian = Eigen::MatrixXd::Zero(n, n);
  qp.gradient = Eigen::VectorXd::Zero(n);
  qp.constant = 0.0;
  for (int k = 0; k <= n; ++k) {
    const StateWeights& w = k < n ? problem.config.q_diag : problem.config.p_diag;
    const Eigen::MatrixXd Sk = qp.sensitivity.block(kStateDim * k, 0, kStateDim, n);
    const MpcState offset = qp.free_response[k] - problem.reference[k];
    qp.hessian += 2.0 * Sk.transpose() * w.asDiagonal() * Sk;
    qp.gradient += 2.0 * Sk.transpose() * w.cwiseProduct(offset);
    qp.constant += offset.dot(w.cwiseProduct(offset));
  }

  // R * |D U - d0|^2 with D the first-difference operator and d0 = u_prev e_0.
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(n, n);
  for (int i = 1; i < n; ++i) D(i, i - 1) = -1.0;
  Eigen::VectorXd d0 = Eigen::VectorXd::Zero(n);
  d0(0) = problem.u_prev;
  const double r = problem.config.r_weight;
  qp.hessian += 2.0 * r * D.transpose() * D;
  qp.gradient -= 2.0 * r * D.transpose() * d0;
  qp.constant += r * problem.u_prev * problem.u_prev;
  return qp;
}

namespace {

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

double quad_value(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(H * x) + g.dot(x);
}

double condensed_cost(const CondensedProblem& qp, const Eigen::VectorXd& u) {
  return quad_value(qp.hessian, qp.gradient, u) + qp.constant;
}

}  // namespace

BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, Eigen::VectorXd x0,
                         double tol, int max_iter) {
  const Eigen::Index n = g.size();
  BoxQpResult res;
  res.x = clamp(x0, lo, hi);
  const double lipschitz = std::max(H.diagonal().maxCoeff(), 1e-12) * static_cast<double>(n);

  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    const Eigen::VectorXd grad = H * res.x + g;
    if ((res.x - clamp(res.x - grad, lo, hi)).cwiseAbs().maxCoeff() < tol) {
      res.converged = true;
      return res;
    }

    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eps = 1e-12 * (1.0 + std::abs(lo(i)) + std::abs(hi(i)));
      const bool at_lo = res.x(i) <= lo(i) + eps && grad(i) > 0.0;
      const bool at_hi = res.x(i) >= hi(i) - eps && grad(i) < 0.0;
      if (!at_lo && !at_hi) free.push_back(i);
    }

    Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
    if (!free.empty()) {
      const auto m = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd Hf(m, m);
      Eigen::VectorXd gf(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        gf(a) = grad(free[a]);
        for (Eigen::Index b = 0; b < m; ++b) Hf(a, b) = H(free[a], free[b]);
      }
      const Eigen::VectorXd df = Hf.ldlt().solve(-gf);
      for (Eigen::Index a = 0; a < m; ++a) dir(free[a]) = df(a);
    }

    const double f0 = quad_value(H, g, res.x);
    double alpha = 1.0;
    Eigen::VectorXd trial = res.x;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      trial = clamp(res.x + alpha * dir, lo, hi);
      if (quad_value(H, g, trial) <= f0 + 1e-4 * grad.dot(trial - res.x)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || (trial - res.x).cwiseAbs().maxCoeff() == 0.0) {
      // Newton direction stalled on the active set; take a projected
      // gradient step instead.
      trial = clamp(res.x - grad / lipschitz, lo, hi);
      if ((trial - res.x).cwiseAbs().maxCoeff() == 0.0) break;
    }
    res.x = trial;
  }
  const Eigen::VectorXd grad = H * res.x + g;
  res.converged = (res.x - clamp(res.x - grad, lo, hi)).cwiseAbs().maxCoeff() < tol;
  return res;
}

double kkt_residual(const CondensedProblem& qp, const Eigen::VectorXd& inputs, double u_min,
                    double u_max) {
  const Eigen::VectorXd grad = qp.hessian * inputs + qp.gradient;
  const Eigen::VectorXd projected = (inputs - grad).cwiseMax(u_min).cwiseMin(u_max);
  return (inputs - projected).cwiseAbs().maxCoeff();
}

namespace {

bool problem_is_finite(const MpcProblem& p) {
  if (!p.x0.allFinite() || !std::isfinite(p.u_prev)) return false;
  if (static_cast<int>(p.reference.size()) != p.config.horizon + 1) return false;
  return std::all_of(p.reference.begin(), p.reference.end(),
                     [](const MpcState& r) { return r.allFinite(); });
}

MpcSolution infeasible(int horizon) {
  MpcSolution s;
  s.status = SolveStatus::Infeasible;
  s.inputs.assign(static_cast<std::size_t>(std::max(horizon, 0)), 0.0);
  s.cost = std::numeric_limits<double>::infinity();
  return s;
}

}  // namespace

MpcSolution solve(const MpcProblem& problem, const std::optional<MpcSolution>& warm_start) {
  const auto t0 = std::chrono::steady_clock::now();
  const MpcConfig& cfg = problem.config;
  const int n = cfg.horizon;
  auto finish = [&](MpcSolution s) {
    s.solve_time_us =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
    return s;
  };

  if (n < 1 || !(cfg.u_min <= cfg.u_max) || !(cfg.r_weight > 0.0) || !problem_is_finite(problem)) {
    return finish(infeasible(n));
  }

  const CondensedProblem qp = condense(problem);
  if (!qp.hessian.allFinite() || !qp.gradient.allFinite()) return finish(infeasible(n));

  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, cfg.u_min);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, cfg.u_max);

  Eigen::VectorXd u(n);
  if (warm_start && warm_start->status != SolveStatus::Infeasible &&
      static_cast<int>(warm_start->inputs.size()) == n) {
    for (int k = 0; k < n; ++k) u(k) = warm_start->inputs[std::min(k + 1, n - 1)];
  } else {
    u.setConstant(problem.u_prev);
  }
  u = clamp(u, lo, hi);

  MpcSolution sol;
  sol.status = SolveStatus::MaxIters;
  double merit = condensed_cost(qp, u);
  sol.merit_history.push_back(merit);

  for (int it = 0; it < cfg.max_sqp_iters; ++it) {
    sol.iterations = it + 1;
    const Eigen::VectorXd grad = qp.hessian * u + qp.gradient;
    sol.kkt_residual = kkt_residual(qp, u, cfg.u_min, cfg.u_max);
    if (sol.kkt_residual < cfg.kkt_tol) {
      sol.status = SolveStatus::Optimal;
      break;
    }

    // Quadratic subproblem in the step d with bounds shifted to the iterate.
    const BoxQpResult sub = solve_box_qp(qp.hessian, grad, lo - u, hi - u,
                                         Eigen::VectorXd::Zero(n), 0.1 * cfg.kkt_tol);
    const Eigen::VectorXd step = sub.x;

    // Backtracking on the l1 merit; iterates stay inside the box, so the
    // constraint-violation term is zero and the merit equals the cost.
    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial = u;
    double trial_merit = merit;
    for (int bt = 0; bt <= 20; ++bt) {
      trial = clamp(u + alpha * step, lo, hi);
      trial_merit = condensed_cost(qp, trial);
      if (trial_merit <= merit + 1e-4 * alpha * grad.dot(step)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    u = trial;
    merit = trial_merit;
    sol.merit_history.push_back(merit);
  }
  if (sol.status != SolveStatus::Optimal) {
    sol.kkt_residual = kkt_residual(qp, u, cfg.u_min, cfg.u_max);
    if (sol.kkt_residual < cfg.kkt_tol) sol.status = SolveStatus::Optimal;
  }
  if (!u.allFinite()) return finish(infeasible(n));

  sol.inputs.assign(u.data(), u.data() + n);
  sol.predicted = rollout(problem, sol.inputs);
  sol.cost = std::max(0.0, cost(problem, sol.inputs));
  return finish(std::move(sol));
}

MpcSolution fallback(const MpcSolution& previous) {
  if (previous.status == SolveStatus::Infeasible || previous.inputs.empty()) {
    throw NoFeasibleHistory("no feasible MPC plan to fall back on");
  }
  MpcSolution s = previous;
  std::rotate(s.inputs.begin(), s.inputs.begin() + 1, s.inputs.end());
  s.inputs.back() = previous.inputs.back();
  if (!s.predicted.empty()) {
    std::rotate(s.predicted.begin(), s.predicted.begin() + 1, s.predicted.end());
    s.predicted.back() = previous.predicted.back();
  }
  s.degraded = true;
  s.iterations = 0;
  s.solve_time_us = 0.0;
  s.merit_history.clear();
  return s;
}

MpcSolution MpcController::update(const MpcProblem& problem, bool force_failure) {
  MpcSolution sol = force_failure ? MpcSolution{} : solve(problem, last_);
  if (sol.status != SolveStatus::Optimal) {
    if (!last_) throw NoFeasibleHistory("MPC failed with no previous plan");
    const double solve_time = sol.solve_time_us;
    sol = fallback(*last_);
    sol.solve_time_us = solve_time;
    ++fallbacks_;
  }
  last_ = sol;
  return sol;
}

}  // namespace quadflip::mpc

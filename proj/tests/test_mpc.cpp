#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "quadflip/errors.hpp"
#include "quadflip/mpc.hpp"
#include "quadflip/verify.hpp"

using namespace quadflip;
using namespace quadflip::mpc;

namespace {

// Independent per-axis kinematics: z is driven by thrust, x/y by the lateral
// PD law on the reference, both integrated with constant acceleration.
std::vector<MpcState> oracle_rollout(const MpcProblem& p, const std::vector<double>& U) {
  std::vector<MpcState> xs{p.x0};
  const double dt = p.model.dt;
  for (std::size_t k = 0; k < U.size(); ++k) {
    const MpcState& x = xs.back();
    const MpcState& r = p.reference[k];
    double acc[3];
    for (int ax = 0; ax < 2; ++ax) {
      acc[ax] = r(6 + ax) + p.model.lateral_kp * (r(ax) - x(ax)) +
                p.model.lateral_kd * (r(3 + ax) - x(3 + ax));
    }
    acc[2] = U[k] / p.model.mass - p.model.gravity;
    MpcState n;
    for (int ax = 0; ax < 3; ++ax) {
      n(ax) = x(ax) + x(3 + ax) * dt + 0.5 * acc[ax] * dt * dt;
      n(3 + ax) = x(3 + ax) + acc[ax] * dt;
      n(6 + ax) = acc[ax];
    }
    xs.push_back(n);
  }
  return xs;
}

double oracle_cost(const MpcProblem& p, const std::vector<double>& U) {
  const auto xs = oracle_rollout(p, U);
  double j = 0.0;
  for (int k = 0; k <= p.config.horizon; ++k) {
    const StateWeights& w = k < p.config.horizon ? p.config.q_diag : p.config.p_diag;
    for (int i = 0; i < kStateDim; ++i) {
      const double e = xs[k](i) - p.reference[k](i);
      j += w(i) * e * e;
    }
  }
  for (int k = 0; k < p.config.horizon; ++k) {
    const double du = U[k] - (k == 0 ? p.u_prev : U[k - 1]);
    j += p.config.r_weight * du * du;
  }
  return j;
}

MpcProblem hover_problem(int horizon) {
  MpcProblem p;
  p.config.horizon = horizon;
  p.x0 << 4, 0, 2, 0, 0, 0, 0, 0, 0;
  p.reference.assign(horizon + 1, p.x0);
  p.u_prev = p.model.hover_input();
  return p;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST(Predict, HoverInputKeepsRestStateAtRest) {
  const PredictionModel m;
  const MpcState next = m.predict(MpcState::Zero(), m.hover_input());
  EXPECT_LT(next.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Predict, ClimbRateAdvancesAltitude) {
  const PredictionModel m;
  MpcState x = MpcState::Zero();
  x(5) = 1.0;
  const MpcState next = m.predict(x, m.hover_input());
  EXPECT_NEAR(next(2), 0.04, 1e-15);
  EXPECT_NEAR(next(5), 1.0, 1e-15);
}

TEST(Predict, MatchesOracleKinematics) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const MpcProblem p = verify::random_problem(rng, 10, k % 2 == 0);
    std::vector<double> U(10);
    std::uniform_real_distribution<double> in(0.0, 23.0);
    for (double& u : U) u = in(rng);
    const auto a = rollout(p, U);
    const auto b = oracle_rollout(p, U);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT((a[i] - b[i]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Condense, SensitivityReproducesRollout) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const MpcProblem p = verify::random_problem(rng, 10, k % 2 == 0);
    const CondensedProblem qp = condense(p);
    std::vector<double> U(10);
    std::uniform_real_distribution<double> in(0.0, 23.0);
    for (double& u : U) u = in(rng);
    const auto xs = rollout(p, U);
    const Eigen::VectorXd Uv = vec(U);
    for (int i = 0; i <= 10; ++i) {
      const MpcState pred = qp.free_response[i] + qp.sensitivity.block(kStateDim * i, 0, kStateDim, 10) * Uv;
      EXPECT_LT((pred - xs[i]).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + xs[i].cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Cost, ZeroWhenReferenceIsOwnTrajectory) {
  MpcProblem p = hover_problem(10);
  p.u_prev = 13.0;
  const std::vector<double> U(10, 13.0);
  // Lateral states sit on the reference, so the rollout does not depend on it.
  p.reference = rollout(p, U);
  EXPECT_EQ(cost(p, U), 0.0);
}

TEST(Cost, SingleStepHandExpansion) {
  MpcProblem p = hover_problem(1);
  const double d = 0.3;
  p.x0(1) += d;  // y offset
  const double q = p.config.q_diag(1);
  const std::vector<double> U{p.u_prev};
  // Stage term q d^2; the terminal state follows the lateral loop.
  const MpcState x1 = p.model.predict_tracking(p.x0, U[0], p.reference[0]);
  const MpcState e1 = x1 - p.reference[1];
  const double expected = q * d * d + e1.dot(p.config.p_diag.cwiseProduct(e1));
  EXPECT_NEAR(cost(p, U), expected, 1e-14);
}

TEST(Cost, MatchesBruteForceSummation) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> in(0.0, 23.0);
  for (int k = 0; k < 200; ++k) {
    const MpcProblem p = verify::random_problem(rng, 1 + k % 12, k % 3 == 0);
    std::vector<double> U(static_cast<std::size_t>(p.config.horizon));
    for (double& u : U) u = in(rng);
    const double brute = oracle_cost(p, U);
    EXPECT_NEAR(cost(p, U), brute, 1e-10 * std::max(1.0, brute));
    const CondensedProblem qp = condense(p);
    const Eigen::VectorXd Uv = vec(U);
    EXPECT_NEAR(0.5 * Uv.dot(qp.hessian * Uv) + qp.gradient.dot(Uv) + qp.constant, brute,
                1e-10 * std::max(1.0, brute));
  }
}

TEST(Condense, HessianIsSymmetricPositiveDefinite) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 50; ++k) {
    const CondensedProblem qp = condense(verify::random_problem(rng, 10, k % 2 == 0));
    EXPECT_LT((qp.hessian - qp.hessian.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qp.hessian);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Solve, StationaryHoverReturnsHover) {
  const MpcProblem p = hover_problem(10);
  const MpcSolution s = solve(p);
  EXPECT_EQ(s.status, SolveStatus::Optimal);
  for (double u : s.inputs) EXPECT_NEAR(u, p.model.hover_input(), 1e-9);
  EXPECT_LT(s.cost, 1e-8);
}

TEST(Solve, MatchesDenseKktOracleOnSmallInstances) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 60; ++k) {
    MpcProblem p = verify::random_problem(rng, 3, k % 2 == 1);
    if (k % 4 == 0) {
      p.config.u_min = -1e6;  // loose bounds: plain normal equations
      p.config.u_max = 1e6;
    }
    const MpcSolution s = solve(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal);

    // Exact quadratic model of the oracle cost by second differences.
    const int n = 3;
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd g(n);
    auto J = [&](const Eigen::VectorXd& U) {
      return oracle_cost(p, std::vector<double>(U.data(), U.data() + n));
    };
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(n, p.model.hover_input());
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd ei = Eigen::VectorXd::Unit(n, i);
      g(i) = (J(c + ei) - J(c - ei)) / 2.0;
      for (int j = 0; j < n; ++j) {
        const Eigen::VectorXd ej = Eigen::VectorXd::Unit(n, j);
        H(i, j) = (J(c + ei + ej) - J(c + ei - ej) - J(c - ei + ej) + J(c - ei - ej)) / 4.0;
      }
    }
    g -= H * c;
    Eigen::VectorXd ref;
    if (k % 4 == 0) {
      ref = H.ldlt().solve(-g);
    } else {
      ref = verify::dense_kkt_solve(H, g, p.config.u_min, p.config.u_max);
    }
    EXPECT_LT((vec(s.inputs) - ref).cwiseAbs().maxCoeff(), 1e-6) << "instance " << k;
  }
}

TEST(Solve, BeatsClampedUnconstrainedSolution) {
  std::mt19937_64 rng(13);
  int active = 0;
  for (int k = 0; k < 50; ++k) {
    MpcProblem p = verify::random_problem(rng, 10, true);
    p.config.u_max = p.model.hover_input() * 1.05;
    const CondensedProblem qp = condense(p);
    const Eigen::VectorXd unconstrained = qp.hessian.ldlt().solve(-qp.gradient);
    const Eigen::VectorXd clamped =
        unconstrained.cwiseMax(p.config.u_min).cwiseMin(p.config.u_max);
    if ((clamped - unconstrained).norm() > 0.0) ++active;
    const MpcSolution s = solve(p);
    for (double u : s.inputs) {
      EXPECT_GE(u, p.config.u_min);
      EXPECT_LE(u, p.config.u_max);
    }
    const std::vector<double> naive(clamped.data(), clamped.data() + 10);
    EXPECT_LE(s.cost, cost(p, naive) + 1e-9);
  }
  EXPECT_GT(active, 10);
}

TEST(Solve, NoWorseThanRandomFeasibleInputs) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 40; ++k) {
    const MpcProblem p = verify::random_problem(rng, 10, k % 2 == 0);
    const MpcSolution s = solve(p);
    std::uniform_real_distribution<double> in(p.config.u_min, p.config.u_max);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> U(10);
      for (double& u : U) u = in(rng);
      EXPECT_LE(s.cost, cost(p, U) + 1e-9);
    }
  }
}

TEST(Solve, DeterministicAndMonotoneMerit) {
  std::mt19937_64 rng(19);
  for (int k = 0; k < 40; ++k) {
    const MpcProblem p = verify::random_problem(rng, 10, k % 2 == 0);
    const MpcSolution a = solve(p);
    const MpcSolution b = solve(p);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.cost, b.cost);
    for (std::size_t i = 1; i < a.merit_history.size(); ++i) {
      EXPECT_LE(a.merit_history[i], a.merit_history[i - 1]);
    }
    EXPECT_LT(a.kkt_residual, p.config.kkt_tol);
  }
}

TEST(Solve, WarmStartReachesSameOptimum) {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 20; ++k) {
    const MpcProblem p = verify::random_problem(rng, 10, k % 2 == 0);
    const MpcSolution cold = solve(p);
    const MpcSolution warm = solve(p, cold);
    EXPECT_LT((vec(cold.inputs) - vec(warm.inputs)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Solve, ReportsInfeasibleOnBadData) {
  MpcProblem p = hover_problem(10);
  p.x0(0) = std::nan("");
  EXPECT_EQ(solve(p).status, SolveStatus::Infeasible);
  p = hover_problem(10);
  p.reference.pop_back();
  EXPECT_EQ(solve(p).status, SolveStatus::Infeasible);
  p = hover_problem(10);
  p.config.u_min = 5.0;
  p.config.u_max = 1.0;
  EXPECT_EQ(solve(p).status, SolveStatus::Infeasible);
}

TEST(BoxQp, SolvesSmallBoxProblemExactly) {
  Eigen::MatrixXd H(2, 2);
  H << 2, 0.5, 0.5, 1;
  const Eigen::VectorXd g = Eigen::Vector2d(-4, 1);
  const BoxQpResult r = solve_box_qp(H, g, Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1),
                                     Eigen::Vector2d::Zero(), 1e-12);
  EXPECT_TRUE(r.converged);
  const Eigen::VectorXd ref = verify::dense_kkt_solve(H, g, -1, 1);
  EXPECT_LT((r.x - ref).norm(), 1e-12);
}

TEST(Fallback, ShiftsLeftRepeatingLastInput) {
  MpcSolution prev;
  prev.status = SolveStatus::Optimal;
  prev.inputs = {1.0, 2.0, 3.0};
  const MpcSolution f = fallback(prev);
  EXPECT_EQ(f.inputs, (std::vector<double>{2.0, 3.0, 3.0}));
  EXPECT_TRUE(f.degraded);
}

TEST(Fallback, SingleInputHorizon) {
  MpcSolution prev;
  prev.status = SolveStatus::MaxIters;
  prev.inputs = {7.5};
  EXPECT_EQ(fallback(prev).inputs, (std::vector<double>{7.5}));
}

TEST(Fallback, NeedsFeasibleHistory) {
  MpcSolution prev;
  prev.status = SolveStatus::Infeasible;
  prev.inputs = {1.0};
  EXPECT_THROW(fallback(prev), NoFeasibleHistory);
  EXPECT_THROW(fallback(MpcSolution{}), NoFeasibleHistory);
}

TEST(Controller, AppliesFallbackOnForcedFailure) {
  MpcController c;
  const MpcProblem p = hover_problem(10);
  EXPECT_THROW(c.update(p, true), NoFeasibleHistory);
  const MpcSolution first = c.update(p);
  const MpcSolution second = c.update(p, true);
  EXPECT_TRUE(second.degraded);
  std::vector<double> expected(first.inputs.begin() + 1, first.inputs.end());
  expected.push_back(first.inputs.back());
  EXPECT_EQ(second.inputs, expected);
  EXPECT_EQ(c.fallback_count(), 1);
  c.reset();
  EXPECT_FALSE(c.last_plan().has_value());
}

TEST(MpcConfig, ValidationRejectsBadValues) {
  MpcConfig c;
  EXPECT_NO_THROW(c.validate());
  c.horizon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MpcConfig{};
  c.u_min = c.u_max;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MpcConfig{};
  c.r_weight = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

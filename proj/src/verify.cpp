#include "quadflip/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "quadflip/dynamics.hpp"
#include "quadflip/errors.hpp"
#include "quadflip/mission.hpp"
#include "quadflip/trials.hpp"

namespace quadflip::verify {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Check check(std::string name, bool pass, std::string detail) {
  return Check{std::move(name), pass, std::move(detail)};
}

double total_energy(const dynamics::SystemState& s, const dynamics::Params& p) {
  return dynamics::kinetic_energy(s, p) + dynamics::potential_energy(s, p);
}

dynamics::SystemState swinging_state() {
  dynamics::SystemState s;
  s.quad.position = Vec3(0.5, -1.0, 10.0);
  s.quad.velocity = Vec3(1.0, 0.5, 2.0);
  s.quad.attitude = rot_z(0.3) * rot_x(0.2) * rot_y(-0.4);
  s.quad.body_rate = Vec3(1.0, -2.0, 0.5);
  const Vec3 p = Vec3(0.3, 0.1, -1.0).normalized();
  Vec3 w(0.5, 1.0, 0.2);
  w -= w.dot(p) * p;
  s.payload = dynamics::PayloadState{p, w};
  return s;
}

Eigen::VectorXd central_jacobian_column(const Eigen::VectorXd& x, const Eigen::Vector4d& u,
                                        const dynamics::Params& params, int j, bool input,
                                        double h) {
  Eigen::VectorXd xp = x, xm = x;
  Eigen::Vector4d up = u, um = u;
  if (input) {
    up(j) += h;
    um(j) -= h;
  } else {
    xp(j) += h;
    xm(j) -= h;
  }
  return (dynamics::flat_derivative<double>(xp, up, params) -
          dynamics::flat_derivative<double>(xm, um, params)) /
         (2.0 * h);
}

double jacobian_error(const dynamics::SystemState& s, const dynamics::ControlInput& u,
                      const dynamics::Params& params) {
  const dynamics::Linearization lin = dynamics::linearize(s, u, params);
  Eigen::VectorXd x = dynamics::flatten(s);
  if (!params.probe_attached) x.conservativeResize(dynamics::kQuadDim);
  const Eigen::Vector4d uf = dynamics::flatten(u);
  double worst = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    const Eigen::VectorXd fd = central_jacobian_column(x, uf, params, j, false, 1e-6);
    const Eigen::VectorXd ad = lin.state.col(j);
    worst = std::max(worst, ((fd - ad).array().abs() / (1.0 + ad.array().abs())).maxCoeff());
  }
  for (int j = 0; j < 4; ++j) {
    const Eigen::VectorXd fd = central_jacobian_column(x, uf, params, j, true, 1e-6);
    const Eigen::VectorXd ad = lin.input.col(j);
    worst = std::max(worst, ((fd - ad).array().abs() / (1.0 + ad.array().abs())).maxCoeff());
  }
  return worst;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

bool Criterion::pass() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string Criterion::summary() const {
  std::string s;
  for (const Check& c : checks) {
    if (!s.empty()) s += "; ";
    s += c.detail;
  }
  return s;
}

TimedRun timed_run(sim::SimConfig config) {
  config.keep_records = false;
  const auto t0 = std::chrono::steady_clock::now();
  TimedRun out;
  out.report = sim::run(config);
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Criterion throw_accuracy(const TimedRun& mission, double desired_range) {
  Criterion c{1, "throw accuracy", {}};
  const sim::SimReport& r = mission.report;
  const double err = std::abs(r.landing_distance - desired_range);
  c.checks.push_back(check("probe released and landed", r.release_count == 1 && r.probe_landed,
                           fmt("releases %d, landed %d", r.release_count, int(r.probe_landed))));
  c.checks.push_back(check("landing distance within 10%",
                           r.probe_landed && err <= 0.10 * desired_range,
                           fmt("landing %.3f m from release (target %.1f +/- %.1f)",
                               r.landing_distance, desired_range, 0.10 * desired_range)));
  c.checks.push_back(check("wall time below 30 s", mission.wall_seconds < 30.0,
                           fmt("wall %.2f s", mission.wall_seconds)));
  return c;
}

Criterion flip_tracking(const sim::SimReport& mission, const sim::SimReport& capped, double cap) {
  Criterion c{2, "flip-rate tracking", {}};
  auto full_turn = [](const sim::SimReport& r) {
    return std::abs(r.flip_revolution - 2.0 * kPi) < 0.2;
  };
  auto recovered = [](const sim::SimReport& r) {
    return r.upright_after >= 0.0 && r.upright_after <= 5.0;
  };
  c.checks.push_back(check("peak pitch rate >= 12 rad/s", mission.peak_pitch_rate >= 12.0,
                           fmt("peak %.3f rad/s", mission.peak_pitch_rate)));
  c.checks.push_back(check("full revolution then upright within 5 s",
                           full_turn(mission) && recovered(mission),
                           fmt("turned %.3f rad, upright after %.3f s", mission.flip_revolution,
                               mission.upright_after)));
  c.checks.push_back(check("capped rate still recovers",
                           capped.outcome == sim::Outcome::Completed && full_turn(capped) &&
                               recovered(capped) && capped.peak_pitch_rate <= cap + 1e-6,
                           fmt("cap %.1f: peak %.3f, turned %.3f rad, upright after %.3f s", cap,
                               capped.peak_pitch_rate, capped.flip_revolution,
                               capped.upright_after)));
  return c;
}

Criterion steady_tracking(const sim::SimReport& mission) {
  Criterion c{3, "steady-phase tracking", {}};
  for (mission::Phase p : {mission::Phase::Takeoff, mission::Phase::TransitToRally,
                           mission::Phase::Hold}) {
    const sim::TrackingStats* t = mission.tracking_for(p);
    const std::string name(mission::to_string(p));
    if (!t) {
      c.checks.push_back(check(name, false, name + " never tracked"));
      continue;
    }
    c.checks.push_back(check(name, t->displacement > 0.0 && t->relative() < 0.10,
                             fmt("%s %.2f%% of %.2f m", name.c_str(), 100.0 * t->relative(),
                                 t->displacement)));
  }
  return c;
}

Criterion repeatability(const sim::SimConfig& base, int count, double jitter) {
  Criterion c{4, "repeatability", {}};
  const std::vector<sim::TrialResult> trials = sim::run_trials(base, count, jitter);
  int completed = 0;
  int diverged = 0;
  for (const sim::TrialResult& t : trials) {
    completed += t.flip_completed ? 1 : 0;
    diverged += t.outcome == sim::Outcome::Diverged ? 1 : 0;
  }
  c.checks.push_back(check("all flips complete", completed == count && diverged == 0,
                           fmt("%d/%d flips, %d diverged", completed, count, diverged)));
  const double spread = sim::peak_rate_spread(trials);
  c.checks.push_back(
      check("peak-rate spread below 5%", spread < 0.05, fmt("spread %.4f%%", 100.0 * spread)));
  return c;
}

Criterion physics_oracles() {
  Criterion c{5, "physics oracles", {}};
  const dynamics::Params params;

  {
    dynamics::SystemState s = swinging_state();
    const dynamics::ControlInput off{};
    const double e0 = total_energy(s, params);
    double drift = 0.0;
    for (int i = 0; i < 1000; ++i) {
      s = dynamics::step(s, off, params, 1e-3);
      drift = std::max(drift, std::abs(total_energy(s, params) - e0) / std::abs(e0));
    }
    c.checks.push_back(check("energy drift over 1 s unactuated", drift < 1e-6,
                             fmt("energy drift %.2e", drift)));
  }

  {
    double worst = 0.0;
    for (int k = 0; k < 8; ++k) {
      dynamics::SystemState s = swinging_state();
      s.quad.velocity *= 1.0 + k;
      s.payload->link_omega *= 3.0 * k;
      const Vec3 before = dynamics::linear_momentum(s, params);
      const mission::ReleaseResult rel = mission::release_probe(s, params, 0.0);
      const Vec3 after = rel.params.quad_mass * rel.state.quad.velocity +
                         params.probe_mass * rel.probe.velocity;
      worst = std::max(worst, (after - before).norm() / before.norm());
    }
    c.checks.push_back(check("momentum conserved at release", worst < 1e-12,
                             fmt("momentum error %.1e", worst)));
  }

  {
    double worst = 0.0;
    dynamics::Params detached = params;
    detached.probe_attached = false;
    const dynamics::ControlInput u{13.0, Vec3(0.02, -0.01, 0.005)};
    worst = std::max(worst, jacobian_error(swinging_state(), u, params));
    dynamics::SystemState bare = swinging_state();
    bare.payload.reset();
    worst = std::max(worst, jacobian_error(bare, u, detached));
    c.checks.push_back(check("Jacobians match central differences", worst < 1e-5,
                             fmt("Jacobian error %.1e", worst)));
  }

  {
    dynamics::SystemState s;
    s.quad.position = Vec3(4.0, 0.0, 2.0);
    s.payload = dynamics::PayloadState{};
    const dynamics::ControlInput hover{params.total_mass() * params.gravity, Vec3::Zero()};
    const Eigen::VectorXd x = dynamics::flatten(s);
    const Eigen::VectorXd dx =
        dynamics::flat_derivative<double>(x, dynamics::flatten(hover), params);
    const double residual = dx.cwiseAbs().maxCoeff();
    c.checks.push_back(check("hover equilibrium", residual < 1e-9,
                             fmt("hover residual %.1e", residual)));
  }
  return c;
}

Criterion optimization_oracles(std::uint64_t seed) {
  Criterion c{6, "optimization oracles", {}};
  std::mt19937_64 rng(seed);

  {
    double worst = 0.0;
    for (int k = 0; k < 40; ++k) {
      const mpc::MpcProblem prob = random_problem(rng, 3, k % 2 == 1);
      const mpc::MpcSolution sol = mpc::solve(prob);
      const Eigen::VectorXd center =
          Eigen::VectorXd::Constant(3, prob.model.hover_input());
      const QuadraticFit fit = fit_cost(prob, center);
      const Eigen::VectorXd g = fit.gradient - fit.hessian * center;
      const Eigen::VectorXd ref =
          dense_kkt_solve(fit.hessian, g, prob.config.u_min, prob.config.u_max);
      worst = std::max(worst, (to_vector(sol.inputs) - ref).cwiseAbs().maxCoeff());
    }
    c.checks.push_back(check("N=3 solutions match dense KKT", worst < 1e-6,
                             fmt("KKT mismatch %.1e", worst)));
  }

  {
    int violations = 0;
    for (int k = 0; k < 100; ++k) {
      const mpc::MpcProblem prob = random_problem(rng, 10, k % 3 != 0);
      const mpc::MpcSolution sol = mpc::solve(prob);
      for (double u : sol.inputs) {
        if (u < prob.config.u_min || u > prob.config.u_max) ++violations;
      }
    }
    c.checks.push_back(check("box feasibility exact", violations == 0,
                             fmt("%d bound violations", violations)));
  }

  {
    double worst = 0.0;
    std::uniform_real_distribution<double> in(0.0, 23.0);
    for (int k = 0; k < 50; ++k) {
      const mpc::MpcProblem prob = random_problem(rng, 10, k % 2 == 1);
      std::vector<double> U(10);
      for (double& u : U) u = in(rng);
      double brute = 0.0;
      const std::vector<mpc::MpcState> xs = mpc::rollout(prob, U);
      const auto& cfg = prob.config;
      for (int i = 0; i < cfg.horizon; ++i) {
        const mpc::MpcState e = xs[i] - prob.reference[i];
        const double du = U[i] - (i == 0 ? prob.u_prev : U[i - 1]);
        brute += e.dot(cfg.q_diag.cwiseProduct(e)) + cfg.r_weight * du * du;
      }
      const mpc::MpcState eN = xs[cfg.horizon] - prob.reference[cfg.horizon];
      brute += eN.dot(cfg.p_diag.cwiseProduct(eN));

      const mpc::CondensedProblem qp = mpc::condense(prob);
      const Eigen::VectorXd Uv = to_vector(U);
      const double condensed = 0.5 * Uv.dot(qp.hessian * Uv) + qp.gradient.dot(Uv) + qp.constant;
      const double scale = std::max(1.0, std::abs(brute));
      worst = std::max(worst, std::abs(mpc::cost(prob, U) - brute) / scale);
      worst = std::max(worst, std::abs(condensed - brute) / scale);
    }
    c.checks.push_back(check("cost matches brute-force sum", worst < 1e-10,
                             fmt("cost mismatch %.1e", worst)));
  }

  {
    bool exact = true;
    for (int k = 0; k < 20; ++k) {
      const mpc::MpcSolution prev = mpc::solve(random_problem(rng, 10, k % 2 == 1));
      const mpc::MpcSolution fb = mpc::fallback(prev);
      std::vector<double> expected(prev.inputs.begin() + 1, prev.inputs.end());
      expected.push_back(prev.inputs.back());
      exact = exact && fb.inputs == expected && fb.degraded;
    }
    c.checks.push_back(check("fallback shift rule exact", exact,
                             exact ? "fallback shift exact" : "fallback shift mismatch"));
  }

  {
    std::vector<double> times;
    std::optional<mpc::MpcSolution> warm;
    for (int k = 0; k < 200; ++k) {
      const mpc::MpcProblem prob = random_problem(rng, 10, k % 4 == 0);
      const mpc::MpcSolution sol = mpc::solve(prob, warm);
      times.push_back(sol.solve_time_us);
      warm = sol;
    }
    std::nth_element(times.begin(), times.begin() + 100, times.end());
    const double median_ms = times[100] / 1000.0;
    c.checks.push_back(check("median solve time below 40 ms", median_ms < 40.0,
                             fmt("median solve %.3f ms at N=10", median_ms)));
  }
  return c;
}

Criterion planner_oracles(std::uint64_t seed) {
  Criterion c{7, "throw-planner round trip", {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> range_d(1.0, 40.0);
  std::uniform_real_distribution<double> height_d(0.0, 15.0);
  const double g = 9.81;
  const double v_max = 20.0;
  const double lo = 20.0 * kPi / 180.0;
  const double hi = 70.0 * kPi / 180.0;

  double round_trip = 0.0;
  double grid = 0.0;
  int solved = 0;
  int grid_checked = 0;
  while (solved < 100) {
    const double R = range_d(rng);
    const double h = height_d(rng);
    mission::ThrowPlan plan;
    try {
      plan = mission::solve_throw_params(R, h, v_max, lo, hi, g);
    } catch (const Unreachable&) {
      continue;
    }
    ++solved;
    round_trip = std::max(
        round_trip, std::abs(mission::projectile_range(plan.release_speed, plan.release_angle, h, g) - R));
    const double v_grid = grid_min_speed(R, h, v_max, lo, hi, g);
    grid = std::max(grid, std::abs(v_grid - plan.release_speed));
    ++grid_checked;
  }
  c.checks.push_back(check("range(solve(R)) = R on 100 targets", round_trip < 1e-6,
                           fmt("round trip %.1e m", round_trip)));
  c.checks.push_back(check("grid-search oracle within 0.01 m/s", grid <= 0.01,
                           fmt("grid gap %.4f m/s over %d targets", grid, grid_checked)));
  return c;
}

std::vector<Criterion> run_all(const sim::SimConfig& base) {
  const TimedRun mission = timed_run(base);
  sim::SimConfig capped_cfg = base;
  constexpr double kCap = 11.0;
  capped_cfg.mission.flip_rate_cap = kCap;
  const TimedRun capped = timed_run(capped_cfg);

  std::vector<Criterion> out;
  out.push_back(throw_accuracy(mission, base.mission.throw_range));
  out.push_back(flip_tracking(mission.report, capped.report, kCap));
  out.push_back(steady_tracking(mission.report));
  out.push_back(repeatability(base));
  out.push_back(physics_oracles());
  out.push_back(optimization_oracles(base.seed + 1));
  out.push_back(planner_oracles(base.seed + 2));
  return out;
}

std::string format_table(const std::vector<Criterion>& criteria, bool verbose) {
  std::ostringstream os;
  for (const Criterion& c : criteria) {
    os << (c.pass() ? "PASS" : "FAIL") << "  " << c.id << ". " << c.title << ": " << c.summary()
       << '\n';
    if (!verbose) continue;
    for (const Check& k : c.checks) {
      os << "        [" << (k.pass ? "ok" : "!!") << "] " << k.name << '\n';
    }
  }
  return os.str();
}

double grid_min_speed(double range, double height, double v_max, double theta_min,
                      double theta_max, double gravity, int n_theta, double speed_step) {
  const int n_speed = static_cast<int>(std::floor(v_max / speed_step + 1e-9));
  double best = -1.0;
  for (int i = 0; i < n_theta; ++i) {
    const double theta =
        n_theta == 1 ? theta_min : theta_min + (theta_max - theta_min) * i / (n_theta - 1);
    auto reaches = [&](int j) {
      const double v = j * speed_step;
      const double vs = v * std::sin(theta);
      const double t_land = (vs + std::sqrt(vs * vs + 2.0 * gravity * height)) / gravity;
      return v * std::cos(theta) * t_land >= range;
    };
    if (!reaches(n_speed)) continue;
    // Range grows with speed at fixed elevation: bisect for the first grid hit.
    int a = 0, b = n_speed;
    if (reaches(0)) b = 0;
    while (b - a > 1) {
      const int m = (a + b) / 2;
      (reaches(m) ? b : a) = m;
    }
    const double v = b * speed_step;
    if (best < 0.0 || v < best) best = v;
  }
  return best;
}

Eigen::VectorXd dense_kkt_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double lo,
                                double hi) {
  const int n = static_cast<int>(g.size());
  int combos = 1;
  for (int i = 0; i < n; ++i) combos *= 3;
  Eigen::VectorXd best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int code = 0; code < combos; ++code) {
    // 0 free, 1 at lower bound, 2 at upper bound.
    std::vector<int> mode(static_cast<std::size_t>(n));
    for (int i = 0, r = code; i < n; ++i, r /= 3) mode[static_cast<std::size_t>(i)] = r % 3;
    std::vector<int> free_idx;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      const int m = mode[static_cast<std::size_t>(i)];
      if (m == 0) free_idx.push_back(i);
      if (m == 1) x(i) = lo;
      if (m == 2) x(i) = hi;
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Eigen::MatrixXd Hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -g(free_idx[a]);
        for (int j = 0; j < n; ++j) {
          if (mode[static_cast<std::size_t>(j)] != 0) rhs(a) -= H(free_idx[a], j) * x(j);
        }
        for (int b = 0; b < nf; ++b) Hff(a, b) = H(free_idx[a], free_idx[b]);
      }
      const Eigen::VectorXd xf = Hff.fullPivLu().solve(rhs);
      for (int a = 0; a < nf; ++a) x(free_idx[a]) = xf(a);
    }
    const Eigen::VectorXd grad = H * x + g;
    const double tol = 1e-9 * (1.0 + g.cwiseAbs().maxCoeff());
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      const int m = mode[static_cast<std::size_t>(i)];
      if (m == 0) ok = x(i) >= lo - 1e-12 && x(i) <= hi + 1e-12;
      if (m == 1) ok = grad(i) >= -tol;
      if (m == 2) ok = grad(i) <= tol;
    }
    if (!ok) continue;
    const double obj = 0.5 * x.dot(H * x) + g.dot(x);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

QuadraticFit fit_cost(const mpc::MpcProblem& problem, const Eigen::VectorXd& center, double step) {
  const int n = static_cast<int>(center.size());
  auto J = [&](const Eigen::VectorXd& U) { return mpc::cost(problem, to_std(U)); };
  QuadraticFit fit;
  fit.center = center;
  fit.hessian.resize(n, n);
  fit.gradient.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd ei = Eigen::VectorXd::Unit(n, i) * step;
    fit.gradient(i) = (J(center + ei) - J(center - ei)) / (2.0 * step);
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd ej = Eigen::VectorXd::Unit(n, j) * step;
      fit.hessian(i, j) = (J(center + ei + ej) - J(center + ei - ej) - J(center - ei + ej) +
                           J(center - ei - ej)) /
                          (4.0 * step * step);
    }
  }
  fit.hessian = 0.5 * (fit.hessian + fit.hessian.transpose()).eval();
  return fit;
}

mpc::MpcProblem random_problem(std::mt19937_64& rng, int horizon, bool aggressive) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  mpc::MpcProblem prob;
  prob.config.horizon = horizon;
  prob.model.mass = 1.2;
  prob.config.u_max = 2.0 * prob.model.mass * prob.model.gravity;
  prob.u_prev = prob.model.hover_input() * (1.0 + 0.3 * unit(rng));

  for (int i = 0; i < mpc::kStateDim; ++i) prob.x0(i) = 0.5 * unit(rng);
  prob.x0(2) += 2.0;
  const double climb = aggressive ? 8.0 * unit(rng) : 0.5 * unit(rng);
  const Vec3 target = prob.x0.head<3>() + Vec3(unit(rng), unit(rng), climb);
  for (int k = 0; k <= horizon; ++k) {
    const double s = static_cast<double>(k) / horizon;
    mpc::MpcState r = mpc::MpcState::Zero();
    r.head<3>() = prob.x0.head<3>() + s * (target - prob.x0.head<3>());
    r.segment<3>(3) = (target - prob.x0.head<3>()) / (horizon * prob.config.dt);
    prob.reference.push_back(r);
  }
  return prob;
}

}  // namespace quadflip::verify

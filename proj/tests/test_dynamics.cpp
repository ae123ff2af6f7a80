#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "quadflip/dynamics.hpp"
#include "quadflip/errors.hpp"

using namespace quadflip;
using namespace quadflip::dynamics;

namespace {

struct RandomStates {
  explicit RandomStates(std::uint64_t seed) : rng(seed) {}

  double u(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  Vec3 vec(double scale) { return Vec3(u(-scale, scale), u(-scale, scale), u(-scale, scale)); }

  // Link angles stay away from the spherical-coordinate singularity.
  SystemState state(double rate_scale = 2.0) {
    SystemState s;
    s.quad.position = vec(5.0);
    s.quad.velocity = vec(3.0);
    s.quad.attitude = rot_z(u(-3, 3)) * rot_y(u(-1.5, 1.5)) * rot_x(u(-1.5, 1.5));
    s.quad.body_rate = vec(rate_scale);
    const double a = u(-2.5, 2.5);
    const double b = u(-1.0, 1.0);
    const Vec3 p(std::sin(a) * std::cos(b), std::sin(b), -std::cos(a) * std::cos(b));
    Vec3 w = vec(rate_scale);
    w -= w.dot(p) * p;
    s.payload = PayloadState{p, w};
    return s;
  }

  ControlInput input() { return ControlInput{u(0.0, 25.0), vec(0.05)}; }

  std::mt19937_64 rng;
};

Params asymmetric_params() {
  Params p;
  p.inertia << 0.011, 0.001, 0.0, 0.001, 0.014, 0.0005, 0.0, 0.0005, 0.023;
  return p;
}

// Link direction in spherical coordinates: alpha swings in x-z, beta out of plane.
Vec3 link_of(double a, double b) {
  return Vec3(std::sin(a) * std::cos(b), std::sin(b), -std::cos(a) * std::cos(b));
}

// Generalized coordinates q = [x y z alpha beta] for the translational and
// link degrees of freedom.
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

Eigen::Matrix<double, 3, 5> probe_jacobian(const Vec5& q, double l) {
  const double a = q(3), b = q(4);
  Eigen::Matrix<double, 3, 5> J = Eigen::Matrix<double, 3, 5>::Zero();
  J.leftCols<3>().setIdentity();
  J.col(3) = l * Vec3(std::cos(a) * std::cos(b), 0.0, std::sin(a) * std::cos(b));
  J.col(4) = l * Vec3(-std::sin(a) * std::sin(b), std::cos(b), std::cos(a) * std::sin(b));
  return J;
}

Mat5 mass_matrix(const Vec5& q, const Params& prm) {
  Eigen::Matrix<double, 3, 5> Jq = Eigen::Matrix<double, 3, 5>::Zero();
  Jq.leftCols<3>().setIdentity();
  const auto Jp = probe_jacobian(q, prm.link_length);
  return prm.quad_mass * Jq.transpose() * Jq + prm.probe_mass * Jp.transpose() * Jp;
}

double potential(const Vec5& q, const Params& prm) {
  const double zp = q(2) + prm.link_length * link_of(q(3), q(4)).z();
  return prm.gravity * (prm.quad_mass * q(2) + prm.probe_mass * zp);
}

Vec5 generalized(const SystemState& s) {
  Vec5 q;
  q.head<3>() = s.quad.position;
  q(3) = s.payload->swing_alpha();
  q(4) = s.payload->swing_beta();
  return q;
}

Vec5 generalized_rate(const SystemState& s) {
  const Vec5 q = generalized(s);
  Vec5 qd;
  qd.head<3>() = s.quad.velocity;
  const Eigen::Matrix<double, 3, 2> P = probe_jacobian(q, 1.0).rightCols<2>();
  const Vec3 pdot = s.payload->link_omega.cross(s.payload->link_dir);
  qd.tail<2>() = P.colPivHouseholderQr().solve(pdot);
  return qd;
}

// Euler-Lagrange: M qdd = Q - Mdot qd + dT/dq - dV/dq, with partials by
// central differences.
Vec5 lagrange_acceleration(const Vec5& q, const Vec5& qd, const Vec3& force, const Params& prm) {
  const double h = 1e-6;
  Mat5 Mdot = Mat5::Zero();
  Vec5 dT = Vec5::Zero();
  Vec5 dV = Vec5::Zero();
  for (int k = 0; k < 5; ++k) {
    Vec5 qp = q, qm = q;
    qp(k) += h;
    qm(k) -= h;
    const Mat5 dM = (mass_matrix(qp, prm) - mass_matrix(qm, prm)) / (2.0 * h);
    Mdot += dM * qd(k);
    dT(k) = 0.5 * qd.dot(dM * qd);
    dV(k) = (potential(qp, prm) - potential(qm, prm)) / (2.0 * h);
  }
  Vec5 Q = Vec5::Zero();
  Q.head<3>() = force;
  return mass_matrix(q, prm).ldlt().solve(Q - Mdot * qd + dT - dV);
}

double energy(const SystemState& s, const Params& p) {
  return kinetic_energy(s, p) + potential_energy(s, p);
}

}  // namespace

TEST(Derivative, HoverIsAnEquilibrium) {
  const Params prm;
  SystemState s;
  s.quad.position = Vec3(4, 0, 2);
  s.payload = PayloadState{};
  const ControlInput hover{prm.total_mass() * prm.gravity, Vec3::Zero()};
  const Eigen::VectorXd dx = flat_derivative<double>(flatten(s), flatten(hover), prm);
  EXPECT_LT(dx.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Derivative, FreeFallWithoutLinkMotion) {
  const Params prm;
  RandomStates gen(5);
  for (int k = 0; k < 20; ++k) {
    SystemState s = gen.state();
    s.payload->link_omega.setZero();
    const StateRate r = derivative(s, ControlInput{}, prm);
    EXPECT_LT((r.velocity - Vec3(0, 0, -prm.gravity)).norm(), 1e-14);
    EXPECT_LT(r.link_omega->norm(), 1e-14);
  }
}

TEST(Derivative, MatchesLagrangianOracle) {
  const Params prm;
  RandomStates gen(17);
  for (int k = 0; k < 200; ++k) {
    const SystemState s = gen.state();
    const ControlInput u = gen.input();
    const StateRate r = derivative(s, u, prm);

    const Vec5 q = generalized(s);
    const Vec5 qd = generalized_rate(s);
    const Vec3 force = u.thrust * s.quad.attitude.col(2);
    const Vec5 qdd = lagrange_acceleration(q, qd, force, prm);

    // Quadrotor acceleration.
    const Vec3 aq = qdd.head<3>();
    EXPECT_LT((r.velocity - aq).norm(), 1e-5 * (1.0 + aq.norm())) << "sample " << k;

    // Probe acceleration by second differences along the oracle path.
    const double h = 1e-4;
    auto link_at = [&](double t) {
      const Vec5 qt = q + qd * t + 0.5 * qdd * t * t;
      return link_of(qt(3), qt(4));
    };
    const Vec3 ap_oracle =
        aq + prm.link_length * (link_at(h) - 2.0 * link_at(0.0) + link_at(-h)) / (h * h);
    const Vec3& p = s.payload->link_dir;
    const Vec3& w = s.payload->link_omega;
    const Vec3 ap_model =
        r.velocity + prm.link_length * (r.link_omega->cross(p) + w.cross(w.cross(p)));
    EXPECT_LT((ap_model - ap_oracle).norm(), 1e-5 * (1.0 + ap_oracle.norm())) << "sample " << k;
  }
}

TEST(Derivative, RotationalDynamicsBalanceAngularMomentum) {
  const Params prm = asymmetric_params();
  RandomStates gen(23);
  for (int k = 0; k < 100; ++k) {
    const SystemState s = gen.state(10.0);
    const ControlInput u = gen.input();
    const StateRate r = derivative(s, u, prm);
    const Mat3& R = s.quad.attitude;
    // d/dt (R J Omega) = R M in the inertial frame.
    const Vec3 dH = r.attitude * prm.inertia * s.quad.body_rate + R * prm.inertia * r.body_rate;
    EXPECT_LT((dH - R * u.moment).norm(), 1e-12);
    EXPECT_LT((r.attitude - R * hat<double>(s.quad.body_rate)).norm(), 1e-15);
  }
}

TEST(Derivative, PowerBalanceMatchesEnergyGradient) {
  const Params prm = asymmetric_params();
  RandomStates gen(29);
  for (int k = 0; k < 100; ++k) {
    const SystemState s = gen.state();
    const ControlInput u = gen.input();
    const Eigen::VectorXd x = flatten(s);
    const Eigen::VectorXd f = flat_derivative<double>(x, flatten(u), prm);
    const double h = 1e-6;
    const double dE = (energy(unflatten(x + h * f), prm) - energy(unflatten(x - h * f), prm)) /
                      (2.0 * h);
    const double power = u.thrust * s.quad.attitude.col(2).dot(s.quad.velocity) +
                         u.moment.dot(s.quad.body_rate);
    EXPECT_NEAR(dE, power, 1e-5 * (1.0 + std::abs(power))) << "sample " << k;
  }
}

TEST(Derivative, MasslessProbeReducesToBareQuadrotor) {
  Params attached;
  attached.probe_mass = 0.0;
  Params bare = attached;
  bare.probe_attached = false;
  RandomStates gen(31);
  for (int k = 0; k < 50; ++k) {
    const SystemState s = gen.state();
    const ControlInput u = gen.input();
    const StateRate a = derivative(s, u, attached);
    const StateRate b = derivative(s, u, bare);
    EXPECT_EQ(a.velocity, b.velocity);
    EXPECT_EQ(a.attitude, b.attitude);
    EXPECT_EQ(a.body_rate, b.body_rate);
    EXPECT_FALSE(b.link_dir.has_value());
  }
}

TEST(Derivative, EquivariantUnderYaw) {
  const Params prm;
  RandomStates gen(37);
  for (int k = 0; k < 50; ++k) {
    const SystemState s = gen.state();
    const ControlInput u = gen.input();
    const Mat3 Y = rot_z(gen.u(-3, 3));
    SystemState t = s;
    t.quad.position = Y * s.quad.position;
    t.quad.velocity = Y * s.quad.velocity;
    t.quad.attitude = Y * s.quad.attitude;
    t.payload->link_dir = Y * s.payload->link_dir;
    t.payload->link_omega = Y * s.payload->link_omega;
    const StateRate a = derivative(s, u, prm);
    const StateRate b = derivative(t, u, prm);
    EXPECT_LT((Y * a.velocity - b.velocity).norm(), 1e-12);
    EXPECT_LT((Y * a.attitude - b.attitude).norm(), 1e-12);
    EXPECT_LT((a.body_rate - b.body_rate).norm(), 1e-12);
    EXPECT_LT((Y * *a.link_omega - *b.link_omega).norm(), 1e-12);
  }
}

TEST(Linearize, MatchesCentralDifferences) {
  for (bool attached : {true, false}) {
    Params prm = asymmetric_params();
    prm.probe_attached = attached;
    RandomStates gen(attached ? 41 : 43);
    for (int k = 0; k < 20; ++k) {
      SystemState s = gen.state();
      if (!attached) s.payload.reset();
      const ControlInput u = gen.input();
      const Linearization lin = linearize(s, u, prm);
      const Eigen::VectorXd x = flatten(s);
      const Eigen::Vector4d uv = flatten(u);
      ASSERT_EQ(lin.state.rows(), x.size());
      const double h = 1e-6;
      for (int j = 0; j < x.size() + 4; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        Eigen::Vector4d up = uv, um = uv;
        if (j < x.size()) {
          xp(j) += h;
          xm(j) -= h;
        } else {
          up(j - x.size()) += h;
          um(j - x.size()) -= h;
        }
        const Eigen::VectorXd fd =
            (flat_derivative<double>(xp, up, prm) - flat_derivative<double>(xm, um, prm)) /
            (2.0 * h);
        const Eigen::VectorXd ad =
            j < x.size() ? Eigen::VectorXd(lin.state.col(j)) : Eigen::VectorXd(lin.input.col(j - x.size()));
        EXPECT_LT((fd - ad).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + ad.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST(KineticEnergy, Examples) {
  Params prm;
  SystemState s;
  s.payload = PayloadState{};
  EXPECT_EQ(kinetic_energy(s, prm), 0.0);
  prm.quad_mass = 2.0;
  prm.probe_mass = 0.0;
  s.quad.velocity = Vec3(1, 0, 0);
  EXPECT_DOUBLE_EQ(kinetic_energy(s, prm), 1.0);
}

TEST(KineticEnergy, MatchesMassMatrixOracle) {
  const Params prm = asymmetric_params();
  RandomStates gen(47);
  for (int k = 0; k < 200; ++k) {
    const SystemState s = gen.state();
    const Vec5 q = generalized(s);
    const Vec5 qd = generalized_rate(s);
    // Translational part from a finite-difference probe Jacobian.
    const double h = 1e-6;
    Eigen::Matrix<double, 3, 5> Jp;
    for (int j = 0; j < 5; ++j) {
      Vec5 qp = q, qm = q;
      qp(j) += h;
      qm(j) -= h;
      auto rp = [&](const Vec5& g) {
        return Vec3(g.head<3>() + prm.link_length * link_of(g(3), g(4)));
      };
      Jp.col(j) = (rp(qp) - rp(qm)) / (2.0 * h);
    }
    Mat5 M = Mat5::Zero();
    M.topLeftCorner<3, 3>() = prm.quad_mass * Mat3::Identity();
    M += prm.probe_mass * Jp.transpose() * Jp;
    const double oracle = 0.5 * qd.dot(M * qd) +
                          0.5 * s.quad.body_rate.dot(prm.inertia * s.quad.body_rate);
    EXPECT_NEAR(kinetic_energy(s, prm), oracle, 1e-8 * oracle) << "sample " << k;
  }
}

TEST(PotentialEnergy, Examples) {
  Params prm;
  SystemState s;
  s.payload = PayloadState{};
  EXPECT_NEAR(potential_energy(s, prm), -0.2 * 9.81 * 0.5, 1e-15);
  prm.probe_mass = 0.0;
  s.quad.position.z() = 1.0;
  EXPECT_NEAR(potential_energy(s, prm), 9.81, 1e-15);
}

TEST(Step, HoverStaysPut) {
  const Params prm;
  SystemState s;
  s.quad.position = Vec3(4, 0, 2);
  s.payload = PayloadState{};
  const ControlInput hover{prm.total_mass() * prm.gravity, Vec3::Zero()};
  const SystemState n = step(s, hover, prm, 0.01);
  EXPECT_LT((flatten(n) - flatten(s)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Step, BallisticDropFromRest) {
  for (bool attached : {true, false}) {
    Params prm;
    prm.probe_attached = attached;
    SystemState s;
    s.quad.position = Vec3(0, 0, 10);
    if (attached) s.payload = PayloadState{};
    for (double dt : {0.001, 0.01, 0.04}) {
      const SystemState n = step(s, ControlInput{}, prm, dt);
      EXPECT_NEAR(n.quad.position.z(), 10.0 - 0.5 * prm.gravity * dt * dt, 1e-12);
      EXPECT_NEAR(n.quad.velocity.z(), -prm.gravity * dt, 1e-12);
    }
  }
}

// One 0.04 s step against four 0.01 s steps. RK4's local error grows like
// (rate * dt)^5, so the 1e-6 agreement holds for gentle states: body rates up
// to 1 rad/s without the probe, and near-hanging link states with it.
TEST(Step, CoarseAndFineStepsAgree) {
  RandomStates gen(53);
  for (bool attached : {false, true}) {
    Params prm;
    prm.probe_attached = attached;
    const double spread = attached ? 0.02 : 1.0;
    for (int k = 0; k < 200; ++k) {
      SystemState s;
      s.quad.position = gen.vec(5.0);
      s.quad.velocity = gen.vec(3.0);
      s.quad.attitude = rot_z(gen.u(-3, 3)) * rot_y(gen.u(-1, 1) * spread) *
                        rot_x(gen.u(-1, 1) * spread);
      s.quad.body_rate = gen.vec(spread);
      ControlInput u{prm.total_mass() * prm.gravity * (1.0 + gen.u(-0.5, 0.5) * spread),
                     gen.vec(0.005)};
      if (attached) {
        const Vec3 p = link_of(gen.u(-spread, spread), gen.u(-spread, spread));
        Vec3 w = gen.vec(spread);
        w -= w.dot(p) * p;
        s.payload = PayloadState{p, w};
      }
      const SystemState coarse = step(s, u, prm, 0.04);
      SystemState fine = s;
      for (int i = 0; i < 4; ++i) fine = step(fine, u, prm, 0.01);
      EXPECT_LT((flatten(coarse) - flatten(fine)).cwiseAbs().maxCoeff(), 1e-6)
          << (attached ? "attached " : "bare ") << k;
    }
  }
}

TEST(Step, ConvergesAtFourthOrder) {
  const Params prm = asymmetric_params();
  RandomStates gen(59);
  const SystemState s0 = gen.state(3.0);
  const ControlInput u = gen.input();
  auto integrate = [&](double dt) {
    SystemState s = s0;
    const int n = static_cast<int>(std::lround(0.32 / dt));
    for (int i = 0; i < n; ++i) s = step(s, u, prm, dt);
    return flatten(s);
  };
  const Eigen::VectorXd ref = integrate(0.0025);
  const double e1 = (integrate(0.04) - ref).norm();
  const double e2 = (integrate(0.02) - ref).norm();
  EXPECT_GT(e1 / e2, 12.0);
}

TEST(Step, StaysOnManifoldOverLongRuns) {
  const Params prm = asymmetric_params();
  RandomStates gen(61);
  SystemState s = gen.state(5.0);
  const ControlInput u{prm.total_mass() * prm.gravity, Vec3(0.001, -0.002, 0.0005)};
  for (int i = 0; i < 100000; ++i) s = step(s, u, prm, 1e-3);
  EXPECT_LT(orthonormality_error(s.quad.attitude), 1e-12);
  EXPECT_NEAR(s.quad.attitude.determinant(), 1.0, 1e-12);
  EXPECT_NEAR(s.payload->link_dir.norm(), 1.0, 1e-12);
  EXPECT_LT(std::abs(s.payload->link_dir.dot(s.payload->link_omega)), 1e-12);
  EXPECT_TRUE(flatten(s).allFinite());
}

TEST(Step, UnactuatedEnergyDriftIsTiny) {
  const Params prm = asymmetric_params();
  RandomStates gen(67);
  for (int k = 0; k < 10; ++k) {
    SystemState s = gen.state(3.0);
    s.quad.position.z() += 20.0;
    const double e0 = energy(s, prm);
    double drift = 0.0;
    for (int i = 0; i < 1000; ++i) {
      s = step(s, ControlInput{}, prm, 1e-3);
      drift = std::max(drift, std::abs(energy(s, prm) - e0) / std::abs(e0));
    }
    EXPECT_LT(drift, 1e-6) << "sample " << k;
  }
}

TEST(Params, ValidationRejectsBadValues) {
  Params p;
  EXPECT_NO_THROW(p.validate());
  p.quad_mass = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = Params{};
  p.link_length = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = Params{};
  p.inertia(0, 1) = 0.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = Params{};
  p.inertia(2, 2) = -0.1;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Payload, SwingAngles) {
  PayloadState hanging;
  EXPECT_EQ(hanging.swing_alpha(), 0.0);
  EXPECT_EQ(hanging.swing_beta(), 0.0);
  const PayloadState forward{link_of(0.4, -0.2), Vec3::Zero()};
  EXPECT_NEAR(forward.swing_alpha(), 0.4, 1e-15);
  EXPECT_NEAR(forward.swing_beta(), -0.2, 1e-15);
}

#pragma once

#include <optional>

#include <Eigen/Dense>

#include "quadflip/so3.hpp"

// Coupled quadrotor + slung probe. The probe is a point mass on a massless
// rigid link attached at the quadrotor centre of gravity; the link is
// described by its inertial unit direction p (quadrotor -> probe) and its
// angular velocity omega (kept orthogonal to p). Inertial frame is ENU.
namespace quadflip::dynamics {

struct Params {
  double quad_mass = 1.0;
  double probe_mass = 0.2;
  double link_length = 0.5;
  Mat3 inertia = Eigen::Vector3d(0.01, 0.01, 0.02).asDiagonal();
  double gravity = 9.81;
  bool probe_attached = true;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  /// Mass carried by the thrust: quadrotor plus probe while attached.
  double total_mass() const { return probe_attached ? quad_mass + probe_mass : quad_mass; }
};

struct QuadState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 attitude = Mat3::Identity();
  Vec3 body_rate = Vec3::Zero();
};

struct PayloadState {
  Vec3 link_dir = -Vec3::UnitZ();
  Vec3 link_omega = Vec3::Zero();

  /// Swing in the x-z plane, zero when hanging straight down.
  double swing_alpha() const;
  /// Swing out of the x-z plane.
  double swing_beta() const;
};

struct SystemState {
  QuadState quad;
  std::optional<PayloadState> payload;  // present iff the probe is attached
};

struct ControlInput {
  double thrust = 0.0;
  Vec3 moment = Vec3::Zero();
};

/// Time derivative of a SystemState; same layout, payload present iff the
/// state carried one.
struct StateRate {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 attitude = Mat3::Zero();
  Vec3 body_rate = Vec3::Zero();
  std::optional<Vec3> link_dir;
  std::optional<Vec3> link_omega;
};

// Flat layout: [position(3) velocity(3) attitude(9, column-major) body_rate(3)
//               link_dir(3) link_omega(3)]; the last six only with a payload.
inline constexpr int kQuadDim = 18;
inline constexpr int kFullDim = 24;
inline constexpr int kInputDim = 4;  // thrust, moment xyz

Eigen::VectorXd flatten(const SystemState& s);
SystemState unflatten(const Eigen::VectorXd& x);
Eigen::Vector4d flatten(const ControlInput& u);

/// Equations of motion on the flat layout, generic over the scalar so it can
/// be differentiated automatically.
template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, 1> flat_derivative(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x,
                                                    const Eigen::Matrix<T, 4, 1>& u,
                                                    const Params& params) {
  using V3 = Vec3T<T>;
  using M3 = Mat3T<T>;
  const bool with_payload = x.size() == kFullDim;
  Eigen::Matrix<T, Eigen::Dynamic, 1> dx(x.size());

  const V3 vel = x.template segment<3>(3);
  M3 R;
  for (int c = 0; c < 3; ++c) R.col(c) = x.template segment<3>(6 + 3 * c);
  const V3 omega = x.template segment<3>(15);

  const T mq = T(params.quad_mass);
  const T g = T(params.gravity);
  const V3 e3(T(0), T(0), T(1));
  const V3 force = R.col(2) * u(0);

  dx.template segment<3>(0) = vel;

  if (with_payload) {
    const V3 p = x.template segment<3>(18);
    const V3 w = x.template segment<3>(21);
    const T mp = T(params.probe_mass);
    const T l = T(params.link_length);
    const V3 pdot = w.cross(p);
    // Link tension acting on the quadrotor along +p.
    const T tension = mp * (mq * l * pdot.squaredNorm() - p.dot(force)) / (mq + mp);
    dx.template segment<3>(3) = (force + tension * p) / mq - g * e3;
    dx.template segment<3>(18) = pdot;
    dx.template segment<3>(21) = -p.cross(force) / (mq * l);
  } else {
    dx.template segment<3>(3) = force / mq - g * e3;
  }

  const M3 Rdot = R * hat<T>(omega);
  for (int c = 0; c < 3; ++c) dx.template segment<3>(6 + 3 * c) = Rdot.col(c);

  const M3 J = params.inertia.template cast<T>();
  const M3 Jinv = params.inertia.inverse().template cast<T>();
  const V3 moment = u.template segment<3>(1);
  dx.template segment<3>(15) = Jinv * (moment - omega.cross(J * omega));
  return dx;
}

StateRate derivative(const SystemState& s, const ControlInput& u, const Params& params);

/// Fixed-step RK4 followed by projection back onto SO(3) x S^2.
SystemState step(const SystemState& s, const ControlInput& u, const Params& params, double dt);

double kinetic_energy(const SystemState& s, const Params& params);
double potential_energy(const SystemState& s, const Params& params);

/// Probe position and velocity implied by the link (requires a payload).
Vec3 probe_position(const SystemState& s, const Params& params);
Vec3 probe_velocity(const SystemState& s, const Params& params);

/// Total linear momentum of quadrotor plus attached probe.
Vec3 linear_momentum(const SystemState& s, const Params& params);

struct Linearization {
  Eigen::MatrixXd state;  // d(flat_derivative)/dx
  Eigen::MatrixXd input;  // d(flat_derivative)/du
};

/// Exact Jacobians of the flat equations of motion (forward-mode AD).
Linearization linearize(const SystemState& s, const ControlInput& u, const Params& params);

}  // namespace quadflip::dynamics

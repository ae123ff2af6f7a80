#include "quadflip/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/AutoDiff>

#include "quadflip/errors.hpp"

namespace quadflip::dynamics {

void Params::validate() const {
  if (!(quad_mass > 0.0)) throw ConfigError("quad_mass must be > 0");
  if (!(probe_mass >= 0.0)) throw ConfigError("probe_mass must be >= 0");
  if (!(link_length > 0.0)) throw ConfigError("link_length must be > 0");
  if (!(gravity > 0.0)) throw ConfigError("gravity must be > 0");
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError("inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw ConfigError("inertia must be positive definite");
  }
}

double PayloadState::swing_alpha() const { return std::atan2(link_dir.x(), -link_dir.z()); }

double PayloadState::swing_beta() const { return std::asin(std::clamp(link_dir.y(), -1.0, 1.0)); }

Eigen::VectorXd flatten(const SystemState& s) {
  Eigen::VectorXd x(s.payload ? kFullDim : kQuadDim);
  x.segment<3>(0) = s.quad.position;
  x.segment<3>(3) = s.quad.velocity;
  for (int c = 0; c < 3; ++c) x.segment<3>(6 + 3 * c) = s.quad.attitude.col(c);
  x.segment<3>(15) = s.quad.body_rate;
  if (s.payload) {
    x.segment<3>(18) = s.payload->link_dir;
    x.segment<3>(21) = s.payload->link_omega;
  }
  return x;
}

SystemState unflatten(const Eigen::VectorXd& x) {
  SystemState s;
  s.quad.position = x.segment<3>(0);
  s.quad.velocity = x.segment<3>(3);
  for (int c = 0; c < 3; ++c) s.quad.attitude.col(c) = x.segment<3>(6 + 3 * c);
  s.quad.body_rate = x.segment<3>(15);
  if (x.size() == kFullDim) {
    s.payload = PayloadState{x.segment<3>(18), x.segment<3>(21)};
  }
  return s;
}

Eigen::Vector4d flatten(const ControlInput& u) {
  return Eigen::Vector4d(u.thrust, u.moment.x(), u.moment.y(), u.moment.z());
}

namespace {

Eigen::VectorXd flat_for(const SystemState& s, const Params& params) {
  SystemState copy = s;
  if (!params.probe_attached) copy.payload.reset();
  return flatten(copy);
}

}  // namespace

StateRate derivative(const SystemState& s, const ControlInput& u, const Params& params) {
  const Eigen::VectorXd x = flat_for(s, params);
  const Eigen::VectorXd dx = flat_derivative<double>(x, flatten(u), params);
  StateRate r;
  r.position = dx.segment<3>(0);
  r.velocity = dx.segment<3>(3);
  for (int c = 0; c < 3; ++c) r.attitude.col(c) = dx.segment<3>(6 + 3 * c);
  r.body_rate = dx.segment<3>(15);
  if (dx.size() == kFullDim) {
    r.link_dir = dx.segment<3>(18);
    r.link_omega = dx.segment<3>(21);
  }
  return r;
}

SystemState step(const SystemState& s, const ControlInput& u, const Params& params, double dt) {
  const Eigen::VectorXd x = flat_for(s, params);
  const Eigen::Vector4d uv = flatten(u);
  const Eigen::VectorXd k1 = flat_derivative<double>(x, uv, params);
  const Eigen::VectorXd k2 = flat_derivative<double>(Eigen::VectorXd(x + 0.5 * dt * k1), uv, params);
  const Eigen::VectorXd k3 = flat_derivative<double>(Eigen::VectorXd(x + 0.5 * dt * k2), uv, params);
  const Eigen::VectorXd k4 = flat_derivative<double>(Eigen::VectorXd(x + dt * k3), uv, params);
  SystemState next = unflatten(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));

  next.quad.attitude = project_to_so3(next.quad.attitude);
  if (next.payload) {
    PayloadState& pl = *next.payload;
    pl.link_dir.normalize();
    pl.link_omega -= pl.link_omega.dot(pl.link_dir) * pl.link_dir;
  }
  return next;
}

Vec3 probe_position(const SystemState& s, const Params& params) {
  return s.quad.position + params.link_length * s.payload.value().link_dir;
}

Vec3 probe_velocity(const SystemState& s, const Params& params) {
  const PayloadState& pl = s.payload.value();
  return s.quad.velocity + params.link_length * pl.link_omega.cross(pl.link_dir);
}

double kinetic_energy(const SystemState& s, const Params& params) {
  const QuadState& q = s.quad;
  double k = 0.5 * params.quad_mass * q.velocity.squaredNorm() +
             0.5 * q.body_rate.dot(params.inertia * q.body_rate);
  if (params.probe_attached && s.payload) {
    k += 0.5 * params.probe_mass * probe_velocity(s, params).squaredNorm();
  }
  return k;
}

double potential_energy(const SystemState& s, const Params& params) {
  const double z = s.quad.position.z();
  double v = params.quad_mass * params.gravity * z;
  if (params.probe_attached && s.payload) {
    v += params.probe_mass * params.gravity * (z + params.link_length * s.payload->link_dir.z());
  }
  return v;
}

Vec3 linear_momentum(const SystemState& s, const Params& params) {
  Vec3 m = params.quad_mass * s.quad.velocity;
  if (params.probe_attached && s.payload) m += params.probe_mass * probe_velocity(s, params);
  return m;
}

Linearization linearize(const SystemState& s, const ControlInput& u, const Params& params) {
  using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
  const Eigen::VectorXd x = flat_for(s, params);
  const Eigen::Vector4d uv = flatten(u);
  const int n = static_cast<int>(x.size());
  const int total = n + kInputDim;

  Eigen::Matrix<AD, Eigen::Dynamic, 1> xa(n);
  Eigen::Matrix<AD, 4, 1> ua;
  for (int i = 0; i < n; ++i) xa(i) = AD(x(i), total, i);
  for (int i = 0; i < kInputDim; ++i) ua(i) = AD(uv(i), total, n + i);

  const Eigen::Matrix<AD, Eigen::Dynamic, 1> dx = flat_derivative<AD>(xa, ua, params);
  Linearization lin{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, kInputDim)};
  for (int r = 0; r < n; ++r) {
    const Eigen::VectorXd& d = dx(r).derivatives();
    if (d.size() == 0) {
      lin.state.row(r).setZero();
      lin.input.row(r).setZero();
      continue;
    }
    lin.state.row(r) = d.head(n).transpose();
    lin.input.row(r) = d.tail(kInputDim).transpose();
  }
  return lin;
}

}  // namespace quadflip::dynamics

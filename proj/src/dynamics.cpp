#include "mdac/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mdac/errors.hpp"
#include "mdac/rng.hpp"

namespace mdac {

Eigen::VectorXd accel(const ManipulatorModel& model, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& qd, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& f_ext) {
  const Eigen::MatrixXd m = model.mass_matrix(q);
  const Eigen::VectorXd rhs =
      model.tau(q, qd, u) + f_ext - model.coriolis(q, qd) * qd - model.gravity(q);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw NumericalError("singular mass matrix");
  return lu.solve(rhs);
}

double skew_symmetry_residual(const ManipulatorModel& model, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qd, double h) {
  const Eigen::MatrixXd mdot =
      (model.mass_matrix(q + h * qd) - model.mass_matrix(q - h * qd)) / (2.0 * h);
  const Eigen::MatrixXd s = mdot - 2.0 * model.coriolis(q, qd);
  return (s + s.transpose()).norm();
}

Eigen::Matrix3d PlanarQuadrotor::rotation(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Eigen::MatrixXd PlanarQuadrotor::mass_matrix(const Eigen::VectorXd&) const {
  return Eigen::Matrix3d::Identity();
}

Eigen::MatrixXd PlanarQuadrotor::coriolis(const Eigen::VectorXd&,
                                          const Eigen::VectorXd&) const {
  return Eigen::Matrix3d::Zero();
}

Eigen::VectorXd PlanarQuadrotor::gravity(const Eigen::VectorXd&) const {
  return Eigen::Vector3d(0.0, -kGravityConst, 0.0);
}

Eigen::VectorXd PlanarQuadrotor::tau(const Eigen::VectorXd& q, const Eigen::VectorXd&,
                                     const Eigen::VectorXd& u) const {
  return rotation(q[2]) * u;
}

Eigen::VectorXd PlanarQuadrotor::tau_inverse(const Eigen::VectorXd& q,
                                             const Eigen::VectorXd&,
                                             const Eigen::VectorXd& f) const {
  return rotation(q[2]).transpose() * f;
}

Eigen::VectorXd wind_drag(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                          const WindDrag& wd) {
  const double c = std::cos(q[2]);
  const double s = std::sin(q[2]);
  const double rel = qd[0] - wd.w;
  const double v1 = rel * c + qd[1] * s;
  const double v2 = -rel * s + qd[1] * c;
  const double d1 = wd.beta1 * v1 * std::abs(v1);
  const double d2 = wd.beta2 * v2 * std::abs(v2);
  return Eigen::Vector3d(-(c * d1 - s * d2), -(s * d1 + c * d2), 0.0);
}

OracleFeatures::OracleFeatures(std::uint64_t seed, int d, int n) : n_(n), d_(d) {
  if (d < 1 || n < 1) throw std::invalid_argument("oracle features need n, d >= 1");
  Rng rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  omega_.resize(n * d, 2 * n);
  phase_.resize(n * d);
  for (int r = 0; r < n * d; ++r) {
    for (int c = 0; c < 2 * n; ++c) omega_(r, c) = normal(rng);
    phase_[r] = uniform(rng);
  }
}

Eigen::MatrixXd OracleFeatures::operator()(const Eigen::VectorXd& q,
                                           const Eigen::VectorXd& qd) const {
  Eigen::VectorXd z(2 * n_);
  z << q, qd;
  const Eigen::VectorXd arg = omega_ * z + phase_;
  Eigen::MatrixXd y(n_, d_);
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < d_; ++k) {
      const int r = i * d_ + k;
      y(i, k) = (k % 2 == 0) ? std::sin(arg[r]) : std::cos(arg[r]);
    }
  }
  return y;
}

}  // namespace mdac

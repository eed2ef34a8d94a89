#pragma once

// Manipulator-equation models M(q) qdd + C(q, qd) qd + g(q) = tau(q, qd, u) + f,
// the fully actuated planar quadrotor, wind drag and the oracle disturbance.

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "mdac/numeric.hpp"

namespace mdac {

class ManipulatorModel {
 public:
  virtual ~ManipulatorModel() = default;

  virtual int n() const = 0;
  virtual int m() const = 0;
  virtual Eigen::MatrixXd mass_matrix(const Eigen::VectorXd& q) const = 0;
  virtual Eigen::MatrixXd coriolis(const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& qd) const = 0;
  virtual Eigen::VectorXd gravity(const Eigen::VectorXd& q) const = 0;
  virtual Eigen::VectorXd tau(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                              const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd tau_inverse(const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& qd,
                                      const Eigen::VectorXd& f) const = 0;
};

/// Solves M qdd = tau(u) + f_ext - C qd - g. Throws NumericalError if M is
/// singular.
Eigen::VectorXd accel(const ManipulatorModel& model, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& qd, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& f_ext);

/// ||S + S^T||_F with S = Mdot - 2C and Mdot by central differences along qd.
double skew_symmetry_residual(const ManipulatorModel& model, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qd, double h = 1e-6);

/// Gravitational constant in the quadrotor's sign convention.
inline constexpr double kGravityConst = -9.81;

class PlanarQuadrotor final : public ManipulatorModel {
 public:
  int n() const override { return 3; }
  int m() const override { return 3; }
  Eigen::MatrixXd mass_matrix(const Eigen::VectorXd& q) const override;
  Eigen::MatrixXd coriolis(const Eigen::VectorXd& q,
                           const Eigen::VectorXd& qd) const override;
  Eigen::VectorXd gravity(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd tau(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                      const Eigen::VectorXd& u) const override;
  Eigen::VectorXd tau_inverse(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                              const Eigen::VectorXd& f) const override;

  static Eigen::Matrix3d rotation(double phi);
};

struct WindDrag {
  double w = 0.0;
  double beta1 = 0.1;
  double beta2 = 1.0;
};

Eigen::VectorXd wind_drag(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                          const WindDrag& wd);

/// State -> generalized disturbance force.
using DisturbanceFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& q, const Eigen::VectorXd& qd)>;
/// State -> n x d feature matrix.
using FeatureFn =
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& q, const Eigen::VectorXd& qd)>;

/// Random-Fourier features Y_ik = sin or cos(omega_ik . z + b_ik), z = [q; qd].
class OracleFeatures {
 public:
  static constexpr int kDefaultFeatures = 50;

  OracleFeatures(std::uint64_t seed, int d = kDefaultFeatures, int n = 3);

  Eigen::MatrixXd operator()(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const;
  int n() const { return n_; }
  int d() const { return d_; }

 private:
  int n_;
  int d_;
  Eigen::MatrixXd omega_;  // (n*d) x 2n
  Eigen::VectorXd phase_;  // n*d
};

/// f(q, qd) = Y(q, qd) a.
struct OracleDisturbance {
  FeatureFn features;
  Eigen::VectorXd a;

  Eigen::VectorXd operator()(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const {
    return features(q, qd) * a;
  }
};

// ---- batched quadrotor kernels ------------------------------------------
// Quantities are 3 x B blocks (rows x, y, phi). Shared by the double path and
// the tape.

/// R(phi) u per column.
template <class V>
V quad_rotate(const V& phi, const V& u, int batch) {
  const V c = vcos(phi);
  const V s = vsin(phi);
  const V u1 = slice(u, 0, batch);
  const V u2 = slice(u, batch, batch);
  const V u3 = slice(u, 2 * batch, batch);
  const V r1 = emul(c, u1) - emul(s, u2);
  const V r2 = emul(s, u1) + emul(c, u2);
  return cat(r1, r2, u3);
}

/// R(phi)^T f per column.
template <class V>
V quad_rotate_t(const V& phi, const V& f, int batch) {
  const V c = vcos(phi);
  const V s = vsin(phi);
  const V f1 = slice(f, 0, batch);
  const V f2 = slice(f, batch, batch);
  const V f3 = slice(f, 2 * batch, batch);
  const V r1 = emul(c, f1) + emul(s, f2);
  const V r2 = emul(c, f2) - emul(s, f1);
  return cat(r1, r2, f3);
}

/// [0, 9.81, 0] per column.
inline Eigen::VectorXd quad_gravity_batch(int batch) {
  return broadcast_rows(Eigen::Vector3d(0.0, -kGravityConst, 0.0), batch);
}

template <class V>
V wind_drag_batch(const V& q, const V& qd, const WindDrag& wd, int batch) {
  const V phi = slice(q, 2 * batch, batch);
  const V c = vcos(phi);
  const V s = vsin(phi);
  const V rel = shift(slice(qd, 0, batch), -wd.w);
  const V yd = slice(qd, batch, batch);
  const V v1 = emul(c, rel) + emul(s, yd);
  const V v2 = emul(c, yd) - emul(s, rel);
  const V d1 = wd.beta1 * emul(v1, vabs(v1));
  const V d2 = wd.beta2 * emul(v2, vabs(v2));
  const V f1 = emul(s, d2) - emul(c, d1);
  const V f2 = -(emul(s, d1) + emul(c, d2));
  const V f3 = 0.0 * slice(qd, 2 * batch, batch);
  return cat(f1, f2, f3);
}

}  // namespace mdac

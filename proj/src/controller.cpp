#include "mdac/controller.hpp"

#include <stdexcept>

namespace mdac {

Gains Gains::from_diagonals(const Eigen::VectorXd& lambda, const Eigen::VectorXd& k,
                            const Eigen::VectorXd& p) {
  if ((lambda.array() <= 0).any() || (k.array() <= 0).any() || (p.array() <= 0).any())
    throw std::invalid_argument("gains must be strictly positive");
  return {lambda.array().log().matrix(), k.array().log().matrix(), p.array().log().matrix()};
}

Sliding sliding(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const RefSample& ref,
                const Eigen::VectorXd& lambda) {
  Sliding r;
  r.q_tilde = q - ref.q;
  r.q_tilde_dot = qd - ref.qd;
  r.s = r.q_tilde_dot + lambda.cwiseProduct(r.q_tilde);
  r.qd_v = ref.qd - lambda.cwiseProduct(r.q_tilde);
  r.qdd_v = ref.qdd - lambda.cwiseProduct(r.q_tilde_dot);
  return r;
}

Eigen::VectorXd md_control(const ManipulatorModel& model, const Eigen::VectorXd& q,
                           const Eigen::VectorXd& qd, const RefSample& ref,
                           const Eigen::VectorXd& ahat, const Gains& gains,
                           const Eigen::MatrixXd& y_hat) {
  const Sliding sl = sliding(q, qd, ref, gains.lambda());
  const Eigen::VectorXd tau_bar = model.mass_matrix(q) * sl.qdd_v +
                                  model.coriolis(q, qd) * sl.qd_v + model.gravity(q) -
                                  gains.k().cwiseProduct(sl.s);
  return model.tau_inverse(q, qd, tau_bar + y_hat * ahat);
}

Eigen::VectorXd adaptation_rhs(const Eigen::VectorXd& ahat, const Eigen::VectorXd& s,
                               const Eigen::MatrixXd& y_hat, const Eigen::VectorXd& p_diag,
                               const PotentialParams& pp) {
  if (y_hat.cols() != ahat.size() || y_hat.rows() != s.size() || p_diag.size() != ahat.size())
    throw std::invalid_argument("adaptation_rhs: shape mismatch");
  const Eigen::VectorXd inv_h = psi_hess_inv_diag(p_diag.cwiseProduct(ahat), pp);
  const Eigen::VectorXd ys = y_hat.transpose() * s;
  return -(ys.array() * inv_h.array() / p_diag.array().square()).matrix();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> pid_control(const Eigen::VectorXd& q,
                                                        const Eigen::VectorXd& qd,
                                                        const RefSample& ref,
                                                        const PidGains& gains,
                                                        const Eigen::VectorXd& integral,
                                                        double dt) {
  const Eigen::VectorXd e = q - ref.q;
  const Eigen::VectorXd ed = qd - ref.qd;
  const Eigen::VectorXd force = Eigen::Vector3d(0.0, -kGravityConst, 0.0) + ref.qdd -
                                gains.kp * e - gains.kd * ed - gains.ki * integral;
  const Eigen::VectorXd u = PlanarQuadrotor::rotation(q[2]).transpose() * force;
  return {u, integral + e * dt};
}

}  // namespace mdac

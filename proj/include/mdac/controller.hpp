#pragma once

// Mirror-descent adaptive controller, its adaptation law and the PID
// controller used for data collection.
//
// Sign convention: the adaptation law is
//   ahat' = -P^-1 (hess psi(P ahat))^-1 P^-1 Yhat^T s
// and the feature term enters the commanded force as +Yhat ahat. Under exact
// features (f_ext = Y a) the estimate therefore converges towards -a, and
// the Lyapunov-like function is evaluated against that target.

#include <utility>

#include <Eigen/Dense>

#include "mdac/dynamics.hpp"
#include "mdac/numeric.hpp"
#include "mdac/potential.hpp"
#include "mdac/reference.hpp"

namespace mdac {

/// Diagonal positive gains stored as logs of their entries.
struct Gains {
  Eigen::VectorXd raw_lambda;  // n
  Eigen::VectorXd raw_k;       // n
  Eigen::VectorXd raw_p;       // d

  Eigen::VectorXd lambda() const { return raw_lambda.array().exp().matrix(); }
  Eigen::VectorXd k() const { return raw_k.array().exp().matrix(); }
  Eigen::VectorXd p() const { return raw_p.array().exp().matrix(); }

  /// Throws std::invalid_argument unless every entry is positive.
  static Gains from_diagonals(const Eigen::VectorXd& lambda, const Eigen::VectorXd& k,
                              const Eigen::VectorXd& p);
};

struct Sliding {
  Eigen::VectorXd q_tilde;
  Eigen::VectorXd q_tilde_dot;
  Eigen::VectorXd s;
  Eigen::VectorXd qd_v;
  Eigen::VectorXd qdd_v;
};

Sliding sliding(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const RefSample& ref,
                const Eigen::VectorXd& lambda);

/// u = tau^-1(M qdd_v + C qd_v + g - K s + Yhat ahat).
Eigen::VectorXd md_control(const ManipulatorModel& model, const Eigen::VectorXd& q,
                           const Eigen::VectorXd& qd, const RefSample& ref,
                           const Eigen::VectorXd& ahat, const Gains& gains,
                           const Eigen::MatrixXd& y_hat);

/// -P^-1 diag(hess psi(P ahat))^-1 P^-1 Yhat^T s for diagonal P.
Eigen::VectorXd adaptation_rhs(const Eigen::VectorXd& ahat, const Eigen::VectorXd& s,
                               const Eigen::MatrixXd& y_hat, const Eigen::VectorXd& p_diag,
                               const PotentialParams& pp);

struct PidGains {
  double kp = 10.0;
  double kd = 5.0;
  double ki = 1.0;
};

/// Returns (u, integral + q_tilde dt). The control uses the integral passed in.
std::pair<Eigen::VectorXd, Eigen::VectorXd> pid_control(const Eigen::VectorXd& q,
                                                        const Eigen::VectorXd& qd,
                                                        const RefSample& ref,
                                                        const PidGains& gains,
                                                        const Eigen::VectorXd& integral,
                                                        double dt);

// ---- batched quadrotor closed loop ----------------------------------------

/// Reference values for B columns, each 3 x B.
struct RefBlock {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd qdd;
};

/// Gains already broadcast to the batch: lambda, k are 3 x B, p_sq and p_gain
/// are d x B, exponent has length 1.
template <class V>
struct BatchGains {
  V lambda;
  V k;
  V p_gain;
  V p_sq;
  V exponent;
  double epsilon = kDefaultEpsilon;
  int d = 0;
  int batch = 1;
};

template <class V>
struct BatchControl {
  V q_tilde;
  V s;
  V u;
  V ahat_dot;
};

/// Controller and adaptation law for a batch of quadrotors with feature
/// matrices y_hat stored as (3 d) x B.
template <class V>
BatchControl<V> md_control_batch(const V& q, const V& qd, const V& ahat, const V& y_hat,
                                 const RefBlock& ref, const BatchGains<V>& g) {
  const int b = g.batch;
  const V q_tilde = q - ref.q;
  const V q_tilde_dot = qd - ref.qd;
  const V s = q_tilde_dot + emul(g.lambda, q_tilde);
  const V qdd_v = ref.qdd - emul(g.lambda, q_tilde_dot);
  const V tau_bar = qdd_v + quad_gravity_batch(b) - emul(g.k, s);
  const V force = tau_bar + bmatvec(y_hat, ahat, 3, g.d, b);
  const V u = quad_rotate_t(slice(q, 2 * b, b), force, b);
  const V ys = bmattvec(y_hat, s, 3, g.d, b);
  const V inv_h = hess_inv(emul(g.p_gain, ahat), g.exponent, g.epsilon);
  const V ahat_dot = -ediv(emul(ys, inv_h), g.p_sq);
  return {q_tilde, s, u, ahat_dot};
}

}  // namespace mdac

#pragma once

// Fixed-step RK4 closed-loop rollouts on the augmented state
// [q, qd, ahat, loss_track, loss_ctrl], loss functionals and RMS.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdac/controller.hpp"
#include "mdac/dynamics.hpp"
#include "mdac/errors.hpp"
#include "mdac/io.hpp"
#include "mdac/numeric.hpp"
#include "mdac/potential.hpp"
#include "mdac/reference.hpp"

namespace mdac {

/// Rollouts abort once any augmented-state entry exceeds this magnitude.
inline constexpr double kDivergenceLimit = 1e6;

struct ControllerConfig {
  Gains gains;
  PotentialParams pp;
  FeatureFn features;
  int d = 0;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> q, qd, ahat, u, q_r, qd_r;
  Eigen::VectorXd final_state;  // augmented state at the last sample
  double horizon = 0.0;
  double dt = 0.0;

  int samples() const { return static_cast<int>(t.size()); }
  double loss_track() const { return final_state[final_state.size() - 2]; }
  double loss_ctrl() const { return final_state[final_state.size() - 1]; }
};

/// Closed loop of `model` under the mirror-descent controller. The state
/// starts on the reference and ahat0 defaults to zero. Throws RolloutDiverged.
Trajectory rollout(const ManipulatorModel& model, const DisturbanceFn& disturbance,
                   const ControllerConfig& controller, const RefTrajectory& ref,
                   double horizon, double dt,
                   const Eigen::VectorXd& ahat0 = Eigen::VectorXd());

/// Mean over trajectories of (1/T)(int |q~|^2 + mu_ctrl int |u|^2).
double task_loss(const std::vector<Trajectory>& trajectories, double mu_ctrl);

/// (1/N) sum_{k=1..N} |q(k dt) - q_r(k dt)|^2.
double rms(const Trajectory& traj);

/// Throws RolloutDiverged(t) when x is non-finite or beyond kDivergenceLimit.
void guard_divergence(const double* x, std::size_t n, double t);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
/// Reads q, qd, ahat, u and the reference back from CSV.
Trajectory read_trajectory_csv(const std::string& path);

// ---- batched quadrotor rollouts (double path and tape) ------------------

inline std::span<const double> values_of(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<const double> values_of(const ad::Var& v) { return v.value(); }

/// B reference columns evaluated at t.
RefBlock ref_block(const std::vector<const RefTrajectory*>& refs, double t);

template <class V>
struct BatchProblem {
  BatchGains<V> gains;
  /// (q, qd) -> (3 d) x B feature block.
  std::function<V(const V&, const V&)> features;
  /// (q, qd) -> 3 x B disturbance block.
  std::function<V(const V&, const V&)> disturbance;
  std::vector<const RefTrajectory*> refs;
  double horizon = 0.0;
  double dt = 0.0;
};

template <class V>
V batch_rhs(double t, const V& x, const BatchProblem<V>& prob, V* u_out = nullptr) {
  const int b = prob.gains.batch;
  const int d = prob.gains.d;
  const V q = slice(x, 0, 3 * b);
  const V qd = slice(x, 3 * b, 3 * b);
  const V ahat = slice(x, 6 * b, d * b);
  const RefBlock ref = ref_block(prob.refs, t);
  const V y_hat = prob.features(q, qd);
  const BatchControl<V> c = md_control_batch(q, qd, ahat, y_hat, ref, prob.gains);
  const V f = prob.disturbance(q, qd);
  const V qdd = quad_rotate(slice(q, 2 * b, b), c.u, b) + f - quad_gravity_batch(b);
  const V lt = sum_rows(emul(c.q_tilde, c.q_tilde), 3, b);
  const V lc = sum_rows(emul(c.u, c.u), 3, b);
  if (u_out != nullptr) *u_out = c.u;
  return cat(qd, qdd, c.ahat_dot, lt, lc);
}

/// Initial augmented state: on the references, ahat = 0, zero losses.
Eigen::VectorXd batch_initial_state(const std::vector<const RefTrajectory*>& refs, int d);

/// RK4 to the horizon; returns the final augmented state.
template <class V>
V batch_rollout(const V& x0, const BatchProblem<V>& prob) {
  const int steps = steps_for(prob.horizon, prob.dt);
  const double h = prob.dt;
  V x = x0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const V k1 = batch_rhs(t, x, prob);
    const V k2 = batch_rhs(t + 0.5 * h, V(x + (0.5 * h) * k1), prob);
    const V k3 = batch_rhs(t + 0.5 * h, V(x + (0.5 * h) * k2), prob);
    const V k4 = batch_rhs(t + h, V(x + h * k3), prob);
    x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const auto v = values_of(x);
    guard_divergence(v.data(), v.size(), t + h);
  }
  return x;
}

/// (1/B) sum_b (loss_track_b + mu_ctrl loss_ctrl_b) / T from a final state.
template <class V>
V batch_task_loss(const V& final_state, int batch, double horizon, double mu_ctrl) {
  const int n = static_cast<int>(final_state.size());
  const V lt = slice(final_state, n - 2 * batch, batch);
  const V lc = slice(final_state, n - batch, batch);
  return (1.0 / (batch * horizon)) * sum(lt + mu_ctrl * lc);
}

}  // namespace mdac

#pragma once

// Surrogate disturbance models fitted to PID-collected trajectories by
// one-step prediction.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdac/controller.hpp"
#include "mdac/features.hpp"
#include "mdac/optim.hpp"

namespace mdac {

struct TrajectoryDataset {
  std::vector<Eigen::VectorXd> q, qd, u, q_r, qd_r;
  double dt = 0.02;
  double w = 0.0;  // metadata only
  std::uint64_t seed = 0;

  int samples() const { return static_cast<int>(q.size()); }
};

inline constexpr double kEnsembleHorizon = 10.0;
inline constexpr double kEnsembleDt = 0.02;

/// PID closed loop of the true wind-drag quadrotor along a random-walk spline
/// reference. The control is held over each step; samples every dt.
TrajectoryDataset collect_trajectory(double w, std::uint64_t seed,
                                     double horizon = kEnsembleHorizon,
                                     double dt = kEnsembleDt, const PidGains& pid = {});

/// Same, with an arbitrary disturbance and reference.
TrajectoryDataset collect_trajectory(const DisturbanceFn& disturbance,
                                     const RefTrajectory& ref, double horizon, double dt,
                                     const PidGains& pid = {});

/// Mean over consecutive sample pairs of the squared one-step RK4 prediction
/// error in (q, qd), with fhat substituted for the disturbance.
double one_step_loss(const MlpParams& xi, const TrajectoryDataset& data);

struct SurrogateFit {
  MlpParams params;
  double best_loss = 0.0;
  double initial_loss = 0.0;
  double zero_network_loss = 0.0;
  std::vector<double> history;
};

struct EnsembleConfig {
  AdamConfig adam{};
  int steps = 2000;
  std::vector<int> hidden{32, 32};
};

/// Adam on one_step_loss from a Glorot initialization; returns the best
/// iterate. Throws NumericalError on a non-finite loss.
SurrogateFit fit_surrogate(const TrajectoryDataset& data, std::uint64_t seed,
                           const EnsembleConfig& config = {});

/// One RK4 step of the quadrotor with u held constant, for B columns.
/// Returns [q; qd] at the end of the step.
template <class V, class Dist>
V quad_step_zoh(const V& q, const V& qd, const V& u, const Dist& disturbance, double dt,
                int batch) {
  auto f = [&](const V& qq, const V& vv) {
    const V acc = quad_rotate(slice(qq, 2 * batch, batch), u, batch) + disturbance(qq, vv) -
                  quad_gravity_batch(batch);
    return acc;
  };
  const V a1 = f(q, qd);
  const V q2 = q + (0.5 * dt) * qd;
  const V v2 = qd + (0.5 * dt) * a1;
  const V a2 = f(q2, v2);
  const V q3 = q + (0.5 * dt) * v2;
  const V v3 = qd + (0.5 * dt) * a2;
  const V a3 = f(q3, v3);
  const V q4 = q + dt * v3;
  const V v4 = qd + dt * a3;
  const V a4 = f(q4, v4);
  const V qn = q + (dt / 6.0) * (qd + 2.0 * v2 + 2.0 * v3 + v4);
  const V vn = qd + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  return cat(qn, vn);
}

/// Differentiable one-step loss of the flat parameters (for tests and fitting).
ad::Var one_step_loss_tape(const ad::Var& flat, const Architecture& arch,
                           const TrajectoryDataset& data);

void write_dataset_csv(const std::string& path, const TrajectoryDataset& data);
TrajectoryDataset read_dataset_csv(const std::string& path);

}  // namespace mdac

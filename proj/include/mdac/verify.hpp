#pragma once

// Numerical checks of the closed-loop stability guarantees: Lyapunov values
// along sampled trajectories, the V-dot bound, the gamma integral and the
// ultimate bound on the tracking error.
//
// With the controller's sign convention the estimate converges to -a, so the
// Bregman term is measured against P(-a).

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mdac/dynamics.hpp"
#include "mdac/simulate.hpp"

namespace mdac {

/// Convergence tolerance on |q~(T)| that stands in for radius zero.
inline constexpr double kConvergenceTolerance = 1e-3;
inline constexpr double kGammaCutoff = 1e-12;

/// 1/2 s^T M s + bregman(P a, P ahat).
double lyapunov(const Eigen::VectorXd& s, const Eigen::MatrixXd& mass, const Eigen::VectorXd& a,
                const Eigen::VectorXd& ahat, const Eigen::VectorXd& p_diag,
                const PotentialParams& pp);

/// Integral of |exp(-tau Lambda)|_2 over [0, inf) for diagonal Lambda,
/// truncated once the integrand drops below kGammaCutoff. Throws
/// std::invalid_argument unless every entry is positive.
double gamma(const Eigen::VectorXd& lambda_diag);

/// gamma(Lambda) delta |a| / lambda_min(K).
double ultimate_radius(const Eigen::VectorXd& lambda_diag, const Eigen::VectorXd& k_diag,
                       double delta, double a_norm);

/// Central differences on a uniform grid with one-sided third-order stencils
/// at the two ends.
std::vector<double> central_derivative(const std::vector<double>& v, double dt);

struct StabilityReport {
  std::vector<double> t;
  std::vector<double> v;
  std::vector<double> vdot;
  std::vector<double> bound;
  std::vector<double> tracking_error;
  int violations = 0;
  double delta = 0.0;
  double a_norm = 0.0;
  double gamma = 0.0;
  double lambda_min_k = 0.0;
  double radius = 0.0;
  bool contained = false;
  double entry_time = std::numeric_limits<double>::infinity();
};

/// Fills t, v, vdot, bound, tracking_error and violations. A sample violates
/// when vdot > bound + 1e-4 max(1, |V|). `a` is the true parameter vector.
StabilityReport vdot_bound_check(const Trajectory& traj, const ManipulatorModel& model,
                                 const Eigen::VectorXd& a, double delta, const Gains& gains,
                                 const PotentialParams& pp);

struct UltimateBound {
  double radius = 0.0;
  bool contained = false;
  double entry_time = std::numeric_limits<double>::infinity();
};

/// The error counts as contained when some suffix of the trajectory stays in
/// the ball; entry_time is where the longest such suffix starts. A zero radius
/// is replaced by kConvergenceTolerance.
UltimateBound ultimate_bound_check(const Trajectory& traj, const Eigen::VectorXd& a,
                                   double delta, const Gains& gains);

/// Both checks on one trajectory.
StabilityReport stability_report(const Trajectory& traj, const ManipulatorModel& model,
                                 const Eigen::VectorXd& a, double delta, const Gains& gains,
                                 const PotentialParams& pp);

nlohmann::json to_json(const StabilityReport& r);

/// Synthetic closed loop with oracle random-Fourier features. The controller
/// sees Y + delta u(q) v^T with |u| = |v| = 1, so its feature error has
/// operator norm exactly delta everywhere.
struct OracleSetup {
  std::uint64_t seed = 0;
  int d = OracleFeatures::kDefaultFeatures;
  double a_norm = 1.0;
  double delta = 0.0;
  Eigen::VectorXd lambda = Eigen::Vector3d::Constant(5.0);
  Eigen::VectorXd k = Eigen::Vector3d::Constant(5.0);
  double p_gain = 0.05;
  PotentialParams pp;
  double horizon = 10.0;
  double dt = 0.02;
  double loop_period = 10.0;

  Gains gains() const;
  Eigen::VectorXd a() const;
  FeatureFn true_features() const;
  FeatureFn controller_features() const;
};

OracleSetup oracle_setup_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OracleSetup& s);

Trajectory run_oracle(const OracleSetup& setup);

}  // namespace mdac

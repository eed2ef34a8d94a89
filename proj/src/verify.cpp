#include "mdac/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "mdac/errors.hpp"
#include "mdac/rng.hpp"

namespace mdac {

double lyapunov(const Eigen::VectorXd& s, const Eigen::MatrixXd& mass, const Eigen::VectorXd& a,
                const Eigen::VectorXd& ahat, const Eigen::VectorXd& p_diag,
                const PotentialParams& pp) {
  if (mass.rows() != s.size() || mass.cols() != s.size() || a.size() != ahat.size() ||
      p_diag.size() != a.size())
    throw std::invalid_argument("lyapunov: inconsistent shapes");
  return 0.5 * s.dot(mass * s) + bregman(p_diag.cwiseProduct(a), p_diag.cwiseProduct(ahat), pp);
}

double gamma(const Eigen::VectorXd& lambda_diag) {
  if (lambda_diag.size() == 0 || !(lambda_diag.array() > 0).all() || !lambda_diag.allFinite())
    throw std::invalid_argument("gamma: Lambda must be positive definite");
  const Eigen::ArrayXd lam = lambda_diag.array();
  auto integrand = [&](double tau) { return (-tau * lam).exp().maxCoeff(); };
  // Five-point Gauss-Legendre on panels of width 1/(2 lambda_min).
  static constexpr std::array<double, 5> kNodes = {
      0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640, 0.9061798459386640};
  static constexpr std::array<double, 5> kWeights = {
      0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
      0.2369268850561891};
  const double width = 0.5 / lam.minCoeff();
  double total = 0.0;
  for (double lo = 0.0; integrand(lo) >= kGammaCutoff; lo += width) {
    const double mid = lo + 0.5 * width;
    double panel = 0.0;
    for (std::size_t i = 0; i < kNodes.size(); ++i)
      panel += kWeights[i] * integrand(mid + 0.5 * width * kNodes[i]);
    total += 0.5 * width * panel;
  }
  return total;
}

double ultimate_radius(const Eigen::VectorXd& lambda_diag, const Eigen::VectorXd& k_diag,
                       double delta, double a_norm) {
  if (!(k_diag.array() > 0).all()) throw std::invalid_argument("K must be positive definite");
  return gamma(lambda_diag) * delta * a_norm / k_diag.minCoeff();
}

std::vector<double> central_derivative(const std::vector<double>& v, double dt) {
  const std::size_t n = v.size();
  std::vector<double> out(n, 0.0);
  if (n < 4) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i == 0 ? 0 : i - 1;
      const std::size_t hi = std::min(i + 1, n - 1);
      if (hi > lo) out[i] = (v[hi] - v[lo]) / (static_cast<double>(hi - lo) * dt);
    }
    return out;
  }
  // Third-order one-sided stencils at the ends, where the closed loop is
  // often least smooth.
  out[0] = (-11.0 * v[0] + 18.0 * v[1] - 9.0 * v[2] + 2.0 * v[3]) / (6.0 * dt);
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
  out[n - 1] =
      (11.0 * v[n - 1] - 18.0 * v[n - 2] + 9.0 * v[n - 3] - 2.0 * v[n - 4]) / (6.0 * dt);
  return out;
}

StabilityReport vdot_bound_check(const Trajectory& traj, const ManipulatorModel& model,
                                 const Eigen::VectorXd& a, double delta, const Gains& gains,
                                 const PotentialParams& pp) {
  if (traj.samples() == 0 || traj.ahat.empty() || traj.ahat[0].size() != a.size())
    throw std::invalid_argument("trajectory does not carry estimates of the right size");
  StabilityReport r;
  r.delta = delta;
  r.a_norm = a.norm();
  r.lambda_min_k = gains.k().minCoeff();
  const Eigen::VectorXd lambda = gains.lambda();
  const Eigen::VectorXd p_diag = gains.p();
  const Eigen::VectorXd target = -a;
  std::vector<double> s_norm;
  for (int i = 0; i < traj.samples(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    const Eigen::VectorXd q_tilde = traj.q[si] - traj.q_r[si];
    const Eigen::VectorXd s = (traj.qd[si] - traj.qd_r[si]) + lambda.cwiseProduct(q_tilde);
    r.t.push_back(traj.t[si]);
    r.v.push_back(lyapunov(s, model.mass_matrix(traj.q[si]), target, traj.ahat[si], p_diag, pp));
    r.tracking_error.push_back(q_tilde.norm());
    s_norm.push_back(s.norm());
  }
  r.vdot = central_derivative(r.v, traj.dt);
  for (std::size_t i = 0; i < r.v.size(); ++i) {
    const double b = -r.lambda_min_k * s_norm[i] * s_norm[i] + s_norm[i] * delta * r.a_norm;
    r.bound.push_back(b);
    if (r.vdot[i] > b + 1e-4 * std::max(1.0, std::abs(r.v[i]))) ++r.violations;
  }
  return r;
}

UltimateBound ultimate_bound_check(const Trajectory& traj, const Eigen::VectorXd& a,
                                   double delta, const Gains& gains) {
  UltimateBound u;
  u.radius = ultimate_radius(gains.lambda(), gains.k(), delta, a.norm());
  const double ball = u.radius > 0.0 ? u.radius : kConvergenceTolerance;
  int start = traj.samples();
  for (int i = traj.samples() - 1; i >= 0; --i) {
    const auto si = static_cast<std::size_t>(i);
    if ((traj.q[si] - traj.q_r[si]).norm() > ball) break;
    start = i;
  }
  if (start < traj.samples()) {
    u.contained = true;
    u.entry_time = traj.t[static_cast<std::size_t>(start)];
  }
  return u;
}

StabilityReport stability_report(const Trajectory& traj, const ManipulatorModel& model,
                                 const Eigen::VectorXd& a, double delta, const Gains& gains,
                                 const PotentialParams& pp) {
  StabilityReport r = vdot_bound_check(traj, model, a, delta, gains, pp);
  const UltimateBound u = ultimate_bound_check(traj, a, delta, gains);
  r.gamma = gamma(gains.lambda());
  r.radius = u.radius;
  r.contained = u.contained;
  r.entry_time = u.entry_time;
  return r;
}

nlohmann::json to_json(const StabilityReport& r) {
  nlohmann::json j;
  j["t"] = r.t;
  j["V"] = r.v;
  j["Vdot"] = r.vdot;
  j["bound"] = r.bound;
  j["tracking_error"] = r.tracking_error;
  j["violations"] = r.violations;
  j["delta"] = r.delta;
  j["a_norm"] = r.a_norm;
  j["gamma"] = r.gamma;
  j["lambda_min_K"] = r.lambda_min_k;
  j["radius"] = r.radius;
  j["contained"] = r.contained;
  if (std::isfinite(r.entry_time)) {
    j["entry_time"] = r.entry_time;
  } else {
    j["entry_time"] = "inf";
  }
  return j;
}

Gains OracleSetup::gains() const {
  return Gains::from_diagonals(lambda, k, Eigen::VectorXd::Constant(d, p_gain));
}

Eigen::VectorXd OracleSetup::a() const {
  Rng rng = make_rng(seed, "oracle-a");
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d);
  for (auto& x : v) x = normal(rng);
  return a_norm * v / v.norm();
}

FeatureFn OracleSetup::true_features() const { return OracleFeatures(seed, d); }

FeatureFn OracleSetup::controller_features() const {
  const OracleFeatures base(seed, d);
  if (delta == 0.0) return base;
  Rng rng = make_rng(seed, "oracle-perturbation");
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d);
  for (auto& x : v) x = normal(rng);
  v /= v.norm();
  const double dl = delta;
  return [base, v, dl](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
    const Eigen::Vector3d u(std::cos(q[0] + q[1]), std::sin(q[0] + q[1]), 0.0);
    return Eigen::MatrixXd(base(q, qd) + dl * u * v.transpose());
  };
}

OracleSetup oracle_setup_from_json(const nlohmann::json& j) {
  OracleSetup s;
  try {
    s.seed = j.value("seed", s.seed);
    s.d = j.value("d", s.d);
    s.a_norm = j.value("a_norm", s.a_norm);
    s.delta = j.value("delta", s.delta);
    if (j.contains("lambda")) s.lambda = to_eigen(j.at("lambda").get<std::vector<double>>());
    if (j.contains("k")) s.k = to_eigen(j.at("k").get<std::vector<double>>());
    s.p_gain = j.value("P", s.p_gain);
    s.pp.p = j.value("p", s.pp.p);
    s.pp.epsilon = j.value("epsilon", s.pp.epsilon);
    s.horizon = j.value("T", s.horizon);
    s.dt = j.value("dt", s.dt);
    s.loop_period = j.value("loop_period", s.loop_period);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad oracle config: ") + e.what());
  }
  if (s.d < 1 || s.lambda.size() != 3 || s.k.size() != 3 || !(s.p_gain > 0) ||
      !(s.delta >= 0) || !(s.a_norm >= 0) || !(s.loop_period > 0))
    throw ConfigError("oracle config: need d >= 1, 3 gains each, P > 0, delta >= 0");
  try {
    validate(s.pp);
    s.gains();
    steps_for(s.horizon, s.dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("oracle config: ") + e.what());
  }
  return s;
}

nlohmann::json to_json(const OracleSetup& s) {
  return {{"seed", s.seed},   {"d", s.d},
          {"a_norm", s.a_norm}, {"delta", s.delta},
          {"lambda", to_std(s.lambda)}, {"k", to_std(s.k)},
          {"P", s.p_gain},     {"p", s.pp.p},
          {"epsilon", s.pp.epsilon}, {"T", s.horizon},
          {"dt", s.dt},        {"loop_period", s.loop_period}};
}

Trajectory run_oracle(const OracleSetup& setup) {
  const PlanarQuadrotor quad;
  const OracleDisturbance disturbance{setup.true_features(), setup.a()};
  const ControllerConfig controller{setup.gains(), setup.pp, setup.controller_features(),
                                    setup.d};
  const DoubleLoop ref(setup.loop_period);
  return rollout(quad, disturbance, controller, ref, setup.horizon, setup.dt);
}

}  // namespace mdac

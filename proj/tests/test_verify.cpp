#include "mdac/verify.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mdac/potential.hpp"

namespace mdac {
namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

StabilityReport report_for(const OracleSetup& s) {
  PlanarQuadrotor model;
  return stability_report(run_oracle(s), model, s.a(), s.delta, s.gains(), s.pp);
}

// Exact features leave V' = -s^T K s, so V' differences are integration and
// finite-difference error only; the fine grid keeps both far below the tolerance.
OracleSetup fine_oracle(std::uint64_t seed) {
  OracleSetup s;
  s.seed = seed;
  s.dt = 0.0025;
  return s;
}

TEST(Lyapunov, Examples) {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd a = random_vector(rng, 4, -1, 1), p = random_vector(rng, 4, 0.5, 2);
  const Eigen::VectorXd s = random_vector(rng, 3, -1, 1);
  const Eigen::MatrixXd eye = Eigen::Matrix3d::Identity();
  const PotentialParams pp{2.5, 1e-3};
  EXPECT_EQ(lyapunov(Eigen::Vector3d::Zero(), eye, a, a, p, pp), 0.0);
  EXPECT_NEAR(lyapunov(s, eye, a, a, p, pp), 0.5 * s.squaredNorm(), 1e-15);
  const Eigen::VectorXd ahat = random_vector(rng, 4, -1, 1);
  const double quad = 0.5 * s.squaredNorm() + (p.cwiseProduct(a - ahat)).squaredNorm();
  EXPECT_NEAR(lyapunov(s, eye, a, ahat, p, {2.0, 0.0}), quad, 1e-12);
  const Eigen::Matrix3d m = Eigen::Vector3d(1, 2, 3).asDiagonal();
  EXPECT_NEAR(lyapunov(s, m, a, a, p, pp), 0.5 * s.dot(m * s), 1e-15);
}

TEST(Gamma, Examples) {
  EXPECT_NEAR(gamma(Eigen::Vector3d::Ones()), 1.0, 1e-8);
  EXPECT_NEAR(gamma(Eigen::Vector3d(2, 5, 5)), 0.5, 1e-8);
  EXPECT_THROW(gamma(Eigen::Vector3d(1, 0, 2)), std::invalid_argument);
  EXPECT_THROW(gamma(Eigen::Vector3d(1, -1, 2)), std::invalid_argument);
}

TEST(Gamma, MatchesInverseSmallestEigenvalue) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd l = random_vector(rng, 3, 0.05, 20);
    EXPECT_NEAR(gamma(l), 1.0 / l.minCoeff(), 1e-8);
    EXPECT_NEAR(gamma(l) * l.minCoeff(), 1.0, 1e-8);
  }
}

TEST(Radius, FormulaScalingAndMonotonicity) {
  const Eigen::Vector3d l(5, 5, 5), k(5, 6, 7);
  const double r = ultimate_radius(l, k, 0.1, 1.0);
  EXPECT_NEAR(r, 0.2 * 0.1 * 1.0 / 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(ultimate_radius(l, 2.0 * k, 0.1, 1.0), 0.5 * r);
  EXPECT_EQ(ultimate_radius(l, k, 0.0, 1.0), 0.0);
  double prev = 0.0;
  for (double delta : {0.0, 0.01, 0.1, 1.0}) {
    const double v = ultimate_radius(l, k, delta, 2.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
  prev = 0.0;
  for (double a : {0.0, 0.5, 1.0, 3.0}) {
    const double v = ultimate_radius(l, k, 0.1, a);
    EXPECT_GE(v, prev);
    prev = v;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double kk : {0.5, 1.0, 4.0, 9.0}) {
    const double v = ultimate_radius(l, Eigen::Vector3d::Constant(kk), 0.1, 1.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(Derivative, ExactOnCubics) {
  const double dt = 0.1;
  std::vector<double> v, dv;
  for (int i = 0; i < 20; ++i) {
    const double t = i * dt;
    v.push_back(t * t * t - 2 * t);
    dv.push_back(3 * t * t - 2);
  }
  const std::vector<double> d = central_derivative(v, dt);
  EXPECT_NEAR(d.front(), dv.front(), 1e-10);
  EXPECT_NEAR(d.back(), dv.back(), 1e-10);
  for (std::size_t i = 1; i + 1 < v.size(); ++i) EXPECT_NEAR(d[i], dv[i], dt * dt + 1e-10);
}

TEST(VdotBound, ExactFeaturesHaveNoViolations) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const StabilityReport r = report_for(fine_oracle(seed));
    EXPECT_EQ(r.violations, 0) << "seed " << seed;
    for (std::size_t i = 0; i < r.t.size(); ++i)
      ASSERT_LE(r.vdot[i], r.bound[i] + 1e-4 * std::max(1.0, std::abs(r.v[i]))) << i;
  }
}

TEST(VdotBound, DoubledFeedbackGainStillHolds) {
  OracleSetup s = fine_oracle(4);
  const StabilityReport base = report_for(s);
  s.k *= 2.0;
  const StabilityReport r = report_for(s);
  EXPECT_EQ(r.violations, 0);
  EXPECT_DOUBLE_EQ(r.lambda_min_k, 2.0 * base.lambda_min_k);
}

TEST(VdotBound, MatchesSlidingIdentityToSecondOrder) {
  // At delta = 0, |V'_fd + s^T K s| <= C dt^2: halving dt cuts the worst
  // residual by at least the second-order factor, so one constant C bounds
  // every grid.
  auto worst = [](double dt) {
    OracleSetup s = fine_oracle(5);
    s.dt = dt;
    const Trajectory tr = run_oracle(s);
    PlanarQuadrotor model;
    const StabilityReport r = stability_report(tr, model, s.a(), 0.0, s.gains(), s.pp);
    double w = 0.0;
    for (int i = 0; i < tr.samples(); ++i) {
      const Eigen::VectorXd sv = tr.qd[i] - tr.qd_r[i] + s.lambda.cwiseProduct(tr.q[i] - tr.q_r[i]);
      w = std::max(w, std::abs(r.vdot[i] + sv.dot(s.k.cwiseProduct(sv))));
    }
    return w;
  };
  // dt = 0.02 under-resolves the adaptation transient (P = 0.05), so the
  // asymptotic range starts at 0.01.
  const double e0 = worst(0.01), e1 = worst(0.005), e2 = worst(0.0025);
  std::printf("worst |V'_fd + s^T K s|: %.3e, %.3e, %.3e at dt 0.01, 0.005, 0.0025\n", e0, e1, e2);
  const double c = e0 / (0.01 * 0.01);
  EXPECT_LE(e1, c * 0.005 * 0.005);
  EXPECT_LE(e2, c * 0.0025 * 0.0025);
  EXPECT_GT(e0 / e1, 3.0);
  EXPECT_GT(e1 / e2, 3.0);
}

TEST(VdotBound, KnownFeatureErrorViolatesRarely) {
  for (double delta : {0.01, 0.1}) {
    OracleSetup s = fine_oracle(6);
    s.delta = delta;
    const StabilityReport r = report_for(s);
    EXPECT_LE(r.violations, static_cast<int>(0.01 * r.t.size())) << "delta " << delta;
  }
}

TEST(UltimateBound, ZeroErrorConverges) {
  OracleSetup s;
  s.seed = 7;
  const StabilityReport r = report_for(s);
  EXPECT_EQ(r.radius, 0.0);
  EXPECT_TRUE(r.contained);
  EXPECT_LT(r.tracking_error.back(), kConvergenceTolerance);
  EXPECT_LT(r.entry_time, s.horizon);
}

TEST(UltimateBound, PerturbedRunEntersAndStays) {
  for (double delta : {0.01, 0.1}) {
    OracleSetup s;
    s.seed = 8;
    s.delta = delta;
    const StabilityReport r = report_for(s);
    EXPECT_NEAR(r.radius, gamma(s.lambda) * delta * s.a_norm / s.k.minCoeff(), 1e-15);
    EXPECT_TRUE(r.contained) << "delta " << delta;
    for (std::size_t i = 0; i < r.t.size(); ++i)
      if (r.t[i] >= r.entry_time) ASSERT_LE(r.tracking_error[i], r.radius);
  }
}

TEST(UltimateBound, NeverEnteringIsNotContained) {
  Trajectory tr;
  for (int i = 0; i < 10; ++i) {
    tr.t.push_back(0.1 * i);
    tr.q.push_back(Eigen::Vector3d(1, 0, 0));
    tr.q_r.push_back(Eigen::Vector3d::Zero());
  }
  const UltimateBound b = ultimate_bound_check(tr, Eigen::VectorXd::Ones(3), 0.1,
                                               Gains::from_diagonals(Eigen::Vector3d::Ones(),
                                                                     Eigen::Vector3d::Ones(),
                                                                     Eigen::VectorXd::Ones(3)));
  EXPECT_FALSE(b.contained);
  EXPECT_TRUE(std::isinf(b.entry_time));
}

TEST(Oracle, PerturbationHasOperatorNormDelta) {
  OracleSetup s;
  s.seed = 9;
  s.d = 8;
  s.delta = 0.3;
  std::mt19937_64 rng(9);
  const FeatureFn y = s.true_features(), yc = s.controller_features();
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd q = random_vector(rng, 3, -2, 2), qd = random_vector(rng, 3, -2, 2);
    const Eigen::MatrixXd diff = yc(q, qd) - y(q, qd);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
    EXPECT_NEAR(svd.singularValues()[0], 0.3, 1e-12);
  }
  EXPECT_NEAR(s.a().norm(), s.a_norm, 1e-12);
}

TEST(Oracle, ConfigRoundTrip) {
  OracleSetup s;
  s.seed = 11;
  s.delta = 0.05;
  s.k = Eigen::Vector3d(1, 2, 3);
  s.pp = {2.5, 1e-3};
  const OracleSetup back = oracle_setup_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(to_json(back), to_json(s));
}

TEST(Report, JsonHasAlignedArrays) {
  OracleSetup s;
  s.horizon = 1.0;
  const nlohmann::json j = to_json(report_for(s));
  EXPECT_EQ(j.at("t").size(), j.at("V").size());
  EXPECT_EQ(j.at("t").size(), j.at("Vdot").size());
  EXPECT_EQ(j.at("t").size(), j.at("bound").size());
  EXPECT_EQ(j.at("t").size(), 51u);
}

}  // namespace
}  // namespace mdac

#include "mdac/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

namespace mdac {
namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

TEST(WindDrag, ZeroRelativeAirspeed) {
  const Eigen::VectorXd f = wind_drag(Eigen::Vector3d(0.3, -1, 0.2), Eigen::Vector3d::Zero(), {0.0});
  EXPECT_EQ(f, Eigen::VectorXd::Zero(3));
}

TEST(WindDrag, HandEvaluatedHover) {
  const Eigen::VectorXd f = wind_drag(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), {2.0});
  EXPECT_NEAR(f[0], 0.4, 1e-15);
  EXPECT_NEAR(f[1], 0.0, 1e-15);
  EXPECT_EQ(f[2], 0.0);
}

TEST(WindDrag, ThirdComponentIsZero) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const WindDrag wd{std::uniform_real_distribution<double>(0, 10)(rng)};
    EXPECT_EQ(wind_drag(random_vector(rng, 3, -3, 3), random_vector(rng, 3, -3, 3), wd)[2], 0.0);
  }
}

TEST(WindDrag, DependsOnRelativeVelocity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd q = random_vector(rng, 3, -3, 3);
    const Eigen::VectorXd qd = random_vector(rng, 3, -3, 3);
    const double w = std::uniform_real_distribution<double>(0, 10)(rng);
    const double c = std::uniform_real_distribution<double>(-2, 2)(rng);
    const Eigen::VectorXd a = wind_drag(q, qd, {w});
    const Eigen::VectorXd b = wind_drag(q, qd + Eigen::Vector3d(c, 0, 0), {w + c});
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(WindDrag, BatchedKernelMatchesSingle) {
  std::mt19937_64 rng(3);
  const int b = 4;
  Eigen::VectorXd q(3 * b), qd(3 * b);
  std::vector<Eigen::VectorXd> qs, qds;
  for (int k = 0; k < b; ++k) {
    qs.push_back(random_vector(rng, 3, -2, 2));
    qds.push_back(random_vector(rng, 3, -2, 2));
    for (int r = 0; r < 3; ++r) {
      q[r * b + k] = qs.back()[r];
      qd[r * b + k] = qds.back()[r];
    }
  }
  const Eigen::VectorXd batched = wind_drag_batch(q, qd, WindDrag{3.0}, b);
  for (int k = 0; k < b; ++k) {
    const Eigen::VectorXd single = wind_drag(qs[k], qds[k], {3.0});
    for (int r = 0; r < 3; ++r) EXPECT_NEAR(batched[r * b + k], single[r], 1e-14);
  }
}

TEST(Quadrotor, HoverAndFreeFall) {
  const PlanarQuadrotor quad;
  const Eigen::VectorXd z = Eigen::Vector3d::Zero();
  EXPECT_LT(accel(quad, z, z, Eigen::Vector3d(0, 9.81, 0), z).norm(), 1e-15);
  const Eigen::VectorXd fall = accel(quad, z, z, z, z);
  EXPECT_EQ(fall, Eigen::VectorXd(Eigen::Vector3d(0, -9.81, 0)));
}

TEST(Quadrotor, StructuralInvariants) {
  const PlanarQuadrotor quad;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd q = random_vector(rng, 3, -3, 3);
    const Eigen::VectorXd qd = random_vector(rng, 3, -3, 3);
    EXPECT_EQ(quad.mass_matrix(q), Eigen::MatrixXd::Identity(3, 3));
    EXPECT_EQ(quad.coriolis(q, qd), Eigen::MatrixXd::Zero(3, 3));
    EXPECT_EQ(quad.gravity(q), Eigen::VectorXd(Eigen::Vector3d(0, 9.81, 0)));
    const Eigen::Matrix3d r = PlanarQuadrotor::rotation(q[2]);
    EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).norm(), 1e-14);
    EXPECT_LT(skew_symmetry_residual(quad, q, qd), 1e-6);
  }
}

TEST(Quadrotor, AccelMatchesExplicitSolve) {
  const PlanarQuadrotor quad;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd q = random_vector(rng, 3, -3, 3);
    const Eigen::VectorXd qd = random_vector(rng, 3, -3, 3);
    const Eigen::VectorXd u = random_vector(rng, 3, -10, 10);
    const Eigen::VectorXd f = random_vector(rng, 3, -2, 2);
    const Eigen::VectorXd rhs = quad.tau(q, qd, u) + f - quad.coriolis(q, qd) * qd - quad.gravity(q);
    const Eigen::VectorXd brute = quad.mass_matrix(q).colPivHouseholderQr().solve(rhs);
    EXPECT_LT((accel(quad, q, qd, u, f) - brute).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::VectorXd direct = PlanarQuadrotor::rotation(q[2]) * u + f - Eigen::Vector3d(0, 9.81, 0);
    EXPECT_LT((accel(quad, q, qd, u, f) - direct).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Quadrotor, AccelIsAffineInInputs) {
  const PlanarQuadrotor quad;
  std::mt19937_64 rng(6);
  const Eigen::VectorXd q = random_vector(rng, 3, -3, 3);
  const Eigen::VectorXd qd = random_vector(rng, 3, -3, 3);
  const Eigen::VectorXd u1 = random_vector(rng, 3, -5, 5), u2 = random_vector(rng, 3, -5, 5);
  const Eigen::VectorXd f1 = random_vector(rng, 3, -5, 5), f2 = random_vector(rng, 3, -5, 5);
  const Eigen::VectorXd z = Eigen::Vector3d::Zero();
  const Eigen::VectorXd base = accel(quad, q, qd, z, z);
  const Eigen::VectorXd sum = accel(quad, q, qd, u1 + u2, f1 + f2) - base;
  const Eigen::VectorXd parts =
      (accel(quad, q, qd, u1, f1) - base) + (accel(quad, q, qd, u2, f2) - base);
  EXPECT_LT((sum - parts).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Quadrotor, TauInverse) {
  const PlanarQuadrotor quad;
  const Eigen::VectorXd z = Eigen::Vector3d::Zero();
  const Eigen::Vector3d f(0.5, -1.5, 2.0);
  EXPECT_EQ(quad.tau_inverse(z, z, f), Eigen::VectorXd(f));
  const Eigen::VectorXd u =
      quad.tau_inverse(Eigen::Vector3d(0, 0, std::numbers::pi / 2), z, Eigen::Vector3d(1, 0, 0));
  EXPECT_NEAR(u[0], 0.0, 1e-15);
  EXPECT_NEAR(u[1], -1.0, 1e-15);
  EXPECT_NEAR(u[2], 0.0, 1e-15);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd q = random_vector(rng, 3, -10, 10);
    const Eigen::VectorXd ff = random_vector(rng, 3, -10, 10);
    ASSERT_LT((quad.tau(q, z, quad.tau_inverse(q, z, ff)) - ff).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Oracle, FeaturesAreBoundedAndDeterministic) {
  const OracleFeatures a(9), b(9);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd q = random_vector(rng, 3, -5, 5);
    const Eigen::VectorXd qd = random_vector(rng, 3, -5, 5);
    const Eigen::MatrixXd y = a(q, qd);
    EXPECT_EQ(y.rows(), 3);
    EXPECT_EQ(y.cols(), OracleFeatures::kDefaultFeatures);
    EXPECT_LE(y.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_EQ(y, b(q, qd));
  }
}

TEST(Oracle, DisturbanceIsLinearInParameter) {
  const OracleFeatures feats(10);
  std::mt19937_64 rng(9);
  const Eigen::VectorXd a = random_vector(rng, feats.d(), -1, 1);
  const OracleDisturbance one{feats, a}, two{feats, 2.0 * a};
  const OracleDisturbance zero{feats, Eigen::VectorXd::Zero(feats.d())};
  const Eigen::VectorXd q = random_vector(rng, 3, -1, 1), qd = random_vector(rng, 3, -1, 1);
  EXPECT_LT((two(q, qd) - 2.0 * one(q, qd)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(zero(q, qd), Eigen::VectorXd::Zero(3));
  EXPECT_LT((one(q, qd) - feats(q, qd) * a).norm(), 1e-15);
}

TEST(Oracle, ConstantFeatureColumn) {
  const FeatureFn ones = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Ones(3, 1));
  };
  const OracleDisturbance f{ones, Eigen::VectorXd::Constant(1, 0.7)};
  EXPECT_EQ(f(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()),
            Eigen::VectorXd(Eigen::Vector3d::Constant(0.7)));
}

}  // namespace
}  // namespace mdac

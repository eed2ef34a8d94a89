#include "mdac/features.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mdac/diffengine.hpp"
#include "mdac/errors.hpp"

namespace mdac {
namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

MlpParams zeroed(const Architecture& arch) {
  return MlpParams::unflatten(arch, Eigen::VectorXd::Zero(arch.num_params()));
}

TEST(Mlp, ArchitectureSizes) {
  const Architecture a = feature_architecture(10);
  EXPECT_EQ(a.widths(), (std::vector<int>{6, 32, 32, 30}));
  EXPECT_EQ(a.num_params(), 6 * 32 + 32 + 32 * 32 + 32 + 32 * 30 + 30);
  EXPECT_EQ(surrogate_architecture().output, 3);
}

TEST(Mlp, FlattenRoundTrip) {
  const MlpParams p = init_mlp(3, feature_architecture(4, {8, 5}));
  const Eigen::VectorXd flat = p.flatten();
  const MlpParams q = MlpParams::unflatten(p.arch, flat, p.seed);
  EXPECT_EQ(q.flatten(), flat);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    EXPECT_EQ(q.weights[l], p.weights[l]);
    EXPECT_EQ(q.biases[l], p.biases[l]);
  }
  EXPECT_THROW(MlpParams::unflatten(p.arch, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Mlp, ZeroNetworkGivesZeroOutputs) {
  const Eigen::Vector3d q(0.3, -0.1, 0.2), qd(1, 2, 3);
  EXPECT_EQ(feature_net(zeroed(feature_architecture(5)), q, qd, 5), Eigen::MatrixXd::Zero(3, 5));
  EXPECT_EQ(surrogate_net(zeroed(surrogate_architecture()), q, qd), Eigen::VectorXd::Zero(3));
}

TEST(Mlp, BiasOnlyNetworkIsConstant) {
  const int d = 4;
  MlpParams p = zeroed(feature_architecture(d));
  std::mt19937_64 rng(1);
  p.biases.back() = random_vector(rng, 3 * d, -1, 1);
  Eigen::MatrixXd expected(3, d);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < d; ++k) expected(i, k) = p.biases.back()[i * d + k];
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd q = random_vector(rng, 3, -2, 2), qd = random_vector(rng, 3, -2, 2);
    EXPECT_EQ(feature_net(p, q, qd, d), expected);
  }
  MlpParams s = zeroed(surrogate_architecture());
  s.biases.back() = Eigen::Vector3d(0.5, -0.25, 2.0);
  EXPECT_EQ(surrogate_net(s, Eigen::Vector3d::Ones(), Eigen::Vector3d::Zero()),
            Eigen::VectorXd(s.biases.back()));
}

TEST(Mlp, DimensionMismatchThrows) {
  const MlpParams p = init_mlp(1, feature_architecture(3));
  EXPECT_THROW(feature_net(p, Eigen::Vector2d::Zero(), Eigen::Vector3d::Zero(), 3),
               std::invalid_argument);
  EXPECT_THROW(feature_net(p, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), 4),
               std::invalid_argument);
}

TEST(Mlp, InitIsDeterministicWithZeroBiases) {
  const Architecture a = feature_architecture(10);
  const MlpParams p = init_mlp(42, a), q = init_mlp(42, a), r = init_mlp(43, a);
  EXPECT_EQ(p.flatten(), q.flatten());
  EXPECT_NE(p.flatten(), r.flatten());
  for (const auto& b : p.biases) EXPECT_EQ(b, Eigen::VectorXd::Zero(b.size()));
}

TEST(Mlp, InitWeightSpreadMatchesScaledUniform) {
  const Architecture a{100, {100}, 100};
  const MlpParams p = init_mlp(7, a);
  const Eigen::MatrixXd& w = p.weights[0];
  const double limit = std::sqrt(6.0 / 200.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), limit);
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().mean());
  const double expected = limit / std::sqrt(3.0);
  EXPECT_NEAR(sd, expected, 0.15 * expected);
}

TEST(Mlp, OutputBoundedByLastLayer) {
  std::mt19937_64 rng(9);
  const MlpParams p = init_mlp(5, feature_architecture(6));
  const Eigen::MatrixXd& w = p.weights.back();
  const double bound = w.cwiseAbs().rowwise().sum().maxCoeff() + p.biases.back().cwiseAbs().maxCoeff();
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd y =
        feature_net(p, random_vector(rng, 3, -50, 50), random_vector(rng, 3, -50, 50), 6);
    EXPECT_LE(y.cwiseAbs().maxCoeff(), bound);
  }
}

TEST(Mlp, BatchedForwardMatchesSingle) {
  const MlpParams p = init_mlp(2, feature_architecture(3, {8, 8}));
  std::mt19937_64 rng(3);
  const int b = 5;
  Eigen::VectorXd x(6 * b);
  std::vector<Eigen::VectorXd> cols;
  for (int k = 0; k < b; ++k) {
    cols.push_back(random_vector(rng, 6, -1, 1));
    for (int r = 0; r < 6; ++r) x[r * b + k] = cols.back()[r];
  }
  const Eigen::VectorXd out = mlp_forward(p.flatten(), 0, p.arch, x, b);
  for (int k = 0; k < b; ++k) {
    const Eigen::MatrixXd y = feature_net(p, cols[k].head(3), cols[k].tail(3), 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(out[(i * 3 + j) * b + k], y(i, j), 1e-14);
  }
}

TEST(Mlp, TapeMlpMatchesPlainForward) {
  const MlpParams s = init_mlp(4, surrogate_architecture({16, 16}));
  std::mt19937_64 rng(4);
  const Eigen::VectorXd x = random_vector(rng, 6 * 3, -1, 1);
  ad::Tape t;
  const TapeMlp net(t, s);
  const Eigen::VectorXd tape = net(t.leaf(x), 3).eval();
  const Eigen::VectorXd plain = mlp_forward(s.flatten(), 0, s.arch, x, 3);
  EXPECT_LT((tape - plain).cwiseAbs().maxCoeff(), 1e-14);
}

double fd_rel_error(const Architecture& arch, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& probe) {
  ad::Program f = [&](const ad::Var& th) {
    return dot(mlp_forward(th, 0, arch, lift(th, x), 1), lift(th, probe));
  };
  return ad::grad_check(f, theta, 1e-6);
}

TEST(Mlp, FeatureJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const MlpParams p = init_mlp(6, feature_architecture(4, {8, 8}));
  const Eigen::VectorXd probe = random_vector(rng, 12, -1, 1);
  EXPECT_LT(fd_rel_error(p.arch, p.flatten(), random_vector(rng, 6, -1, 1), probe), 1e-5);
}

TEST(Mlp, SurrogateGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const MlpParams p = init_mlp(7, surrogate_architecture({8, 8}));
  const Eigen::VectorXd probe = random_vector(rng, 3, -1, 1);
  EXPECT_LT(fd_rel_error(p.arch, p.flatten(), random_vector(rng, 6, -1, 1), probe), 1e-5);
}

TEST(Mlp, JsonRoundTripIsExact) {
  const MlpParams p = init_mlp(8, feature_architecture(10));
  const nlohmann::json j = nlohmann::json::parse(to_json(p, 10).dump());
  const MlpParams q = mlp_from_json(j);
  EXPECT_EQ(q.arch, p.arch);
  EXPECT_EQ(q.flatten(), p.flatten());
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_EQ(j.at("d").get<int>(), 10);
}

TEST(Mlp, BadModelFileThrows) {
  nlohmann::json j = to_json(init_mlp(8, surrogate_architecture()), 0);
  j["layers"][0]["bias"] = std::vector<double>{1.0};
  EXPECT_THROW(mlp_from_json(j), ConfigError);
  EXPECT_THROW(mlp_from_json(nlohmann::json::object()), ConfigError);
}

}  // namespace
}  // namespace mdac

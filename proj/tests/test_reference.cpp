#include "mdac/reference.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace mdac {
namespace {

// Max error of central differences of q against qd and of qd against qdd
// over an n-point grid on [h, T - h].
std::pair<double, double> c2_errors(const RefTrajectory& ref, int points, double h) {
  double e1 = 0.0, e2 = 0.0;
  const double span = ref.horizon() - 2 * h;
  for (int i = 0; i < points; ++i) {
    const double t = h + span * i / (points - 1);
    const RefSample a = ref.at(t - h), b = ref.at(t + h), c = ref.at(t);
    e1 = std::max(e1, ((b.q - a.q) / (2 * h) - c.qd).cwiseAbs().maxCoeff());
    e2 = std::max(e2, ((b.qd - a.qd) / (2 * h) - c.qdd).cwiseAbs().maxCoeff());
  }
  return {e1, e2};
}

TEST(RandomWalk, ZeroStepStaysAtOrigin) {
  for (const auto& w : random_walk_waypoints(3, 12, 0.0)) EXPECT_EQ(w, Eigen::VectorXd::Zero(3));
}

TEST(RandomWalk, Deterministic) {
  EXPECT_EQ(random_walk_waypoints(5, 20, 0.5), random_walk_waypoints(5, 20, 0.5));
  EXPECT_NE(random_walk_waypoints(5, 20, 0.5), random_walk_waypoints(6, 20, 0.5));
}

TEST(RandomWalk, IncrementStatistics) {
  const double scale = 0.5;
  const auto w = random_walk_waypoints(17, 10001, scale);
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (std::size_t k = 1; k < w.size(); ++k) {
    EXPECT_EQ(w[k][2], 0.0);
    for (int c = 0; c < 2; ++c) {
      const double inc = w[k][c] - w[k - 1][c];
      sum += inc;
      sq += inc * inc;
      ++n;
    }
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_LT(std::abs(mean), 0.1 * scale);
  EXPECT_NEAR(sd, scale, 0.1 * scale);
}

TEST(RandomWalk, RejectsBadArguments) {
  EXPECT_THROW(random_walk_waypoints(1, 1, 0.5), std::invalid_argument);
  EXPECT_THROW(random_walk_waypoints(1, 5, -0.5), std::invalid_argument);
}

TEST(Spline, InterpolatesWaypoints) {
  const auto w = random_walk_waypoints(8, 11, 0.5);
  const auto s = spline_fit(w, 1.0);
  for (std::size_t k = 0; k < w.size(); ++k)
    EXPECT_LT((s->at(static_cast<double>(k)).q - w[k]).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Spline, TwoCollinearWaypointsGiveLine) {
  const auto s = spline_fit({Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(2, -1, 0)}, 1.0);
  for (double t : {0.1, 0.5, 0.9}) {
    const RefSample r = s->at(t);
    EXPECT_LT((r.q - Eigen::Vector3d(2 * t, -t, 0)).norm(), 1e-12);
    EXPECT_LT(r.qdd.norm(), 1e-12);
  }
}

TEST(Spline, NaturalSplineReproducesLinearData) {
  std::vector<double> t{0, 0.7, 1.5, 2.0, 3.1};
  std::vector<double> y;
  for (double x : t) y.push_back(1.5 - 2.0 * x);
  const CubicSpline s(t, y);
  for (double x : {0.2, 1.1, 2.9}) {
    const Eigen::Vector3d v = s.eval(x);
    EXPECT_NEAR(v[0], 1.5 - 2.0 * x, 1e-12);
    EXPECT_NEAR(v[1], -2.0, 1e-12);
    EXPECT_NEAR(v[2], 0.0, 1e-12);
  }
}

TEST(Spline, NotAKnotReproducesAnyCubic) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const double c0 = u(rng), c1 = u(rng), c2 = u(rng), c3 = u(rng);
    auto f = [&](double x) { return c0 + x * (c1 + x * (c2 + x * c3)); };
    std::vector<double> t{0, 0.5, 1.25, 2.0, 2.5, 4.0};
    std::vector<double> y;
    for (double x : t) y.push_back(f(x));
    const CubicSpline s(t, y, CubicSpline::Boundary::kNotAKnot);
    for (double x = 0.0; x <= 4.0; x += 0.05) {
      const Eigen::Vector3d v = s.eval(x);
      EXPECT_NEAR(v[0], f(x), 1e-10);
      EXPECT_NEAR(v[1], c1 + x * (2 * c2 + 3 * c3 * x), 1e-9);
      EXPECT_NEAR(v[2], 2 * c2 + 6 * c3 * x, 1e-8);
    }
  }
}

TEST(Spline, DuplicateKnotTimesThrow) {
  EXPECT_THROW(CubicSpline({0.0, 1.0, 1.0}, {0.0, 1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(spline_fit({Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones()}, 0.0),
               std::invalid_argument);
}

TEST(Spline, SecondDerivativeIsContinuous) {
  const auto s = random_reference(21, 10.0);
  for (int k = 1; k < 10; ++k) {
    const double t = k;
    EXPECT_LT((s->at(t - 1e-9).qdd - s->at(t + 1e-9).qdd).norm(), 1e-6);
  }
}

TEST(Spline, FiniteDifferenceConsistency) {
  const auto s = random_reference(22, 10.0);
  const auto [e1, e2] = c2_errors(*s, 1000, 1e-4);
  EXPECT_LT(e1, 1e-4);
  EXPECT_LT(e2, 1e-4);
}

TEST(Spline, CoversHorizon) {
  const auto s = random_reference(23, 5.0);
  EXPECT_DOUBLE_EQ(s->horizon(), 5.0);
  EXPECT_EQ(s->at(0.0).q, Eigen::VectorXd::Zero(3));
}

TEST(DoubleLoop, InitialConditions) {
  const DoubleLoop d(10.0, 1.5, 0.5);
  const double omega = 4 * std::numbers::pi / 10.0;
  const RefSample r = d.at(0.0);
  EXPECT_EQ(r.q, Eigen::VectorXd::Zero(3));
  EXPECT_NEAR(r.qd[0], 1.5 * omega, 1e-15);
  EXPECT_EQ(r.qd[1], 0.0);
  EXPECT_EQ(r.qd[2], 0.0);
}

TEST(DoubleLoop, Periodic) {
  const DoubleLoop d(10.0);
  EXPECT_LT((d.at(10.0).q - d.at(0.0).q).norm(), 1e-12);
  EXPECT_LT((d.at(10.0).qd - d.at(0.0).qd).norm(), 1e-12);
  EXPECT_LT((d.at(5.0).q - d.at(0.0).q).norm(), 1e-12);
}

TEST(DoubleLoop, FiniteDifferenceConsistency) {
  const DoubleLoop d(10.0);
  const auto [e1, e2] = c2_errors(d, 1000, 1e-4);
  EXPECT_LT(e1, 1e-6);
  EXPECT_LT(e2, 1e-6);
}

TEST(Reference, CsvHasOneRowPerSample) {
  const DoubleLoop d(1.0);
  std::ostringstream os;
  write_reference_csv(os, d, 0.1);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,xr,yr,phir,xdr,ydr,phidr,xddr,yddr,phiddr");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
}

}  // namespace
}  // namespace mdac

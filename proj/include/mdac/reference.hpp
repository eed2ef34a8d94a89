#pragma once

// Twice-differentiable reference trajectories q_r(t).

#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

namespace mdac {

struct RefSample {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd qdd;
};

class RefTrajectory {
 public:
  virtual ~RefTrajectory() = default;
  virtual RefSample at(double t) const = 0;
  virtual int n() const = 0;
  virtual double horizon() const = 0;
};

/// One coordinate of an interpolating cubic spline.
class CubicSpline {
 public:
  enum class Boundary { kNatural, kNotAKnot };

  CubicSpline(std::vector<double> knots, std::vector<double> values,
              Boundary boundary = Boundary::kNatural);

  /// Value, first and second derivative. Outside the knot range the end
  /// segments are extended.
  Eigen::Vector3d eval(double t) const;

 private:
  std::vector<double> t_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
};

class SplineTrajectory final : public RefTrajectory {
 public:
  SplineTrajectory(const std::vector<double>& knots,
                   const std::vector<Eigen::VectorXd>& waypoints,
                   CubicSpline::Boundary boundary = CubicSpline::Boundary::kNatural);

  RefSample at(double t) const override;
  int n() const override { return static_cast<int>(coords_.size()); }
  double horizon() const override { return horizon_; }

 private:
  std::vector<CubicSpline> coords_;
  double horizon_;
};

/// x = A sin(wt), y = B(1 - cos(wt)), phi = 0 with w = 4 pi / T.
class DoubleLoop final : public RefTrajectory {
 public:
  DoubleLoop(double horizon, double a = 1.0, double b = 1.0);

  RefSample at(double t) const override;
  int n() const override { return 3; }
  double horizon() const override { return horizon_; }

 private:
  double horizon_;
  double a_;
  double b_;
  double omega_;
};

/// Constant reference at q0.
class HoverReference final : public RefTrajectory {
 public:
  HoverReference(Eigen::VectorXd q0, double horizon) : q0_(std::move(q0)), horizon_(horizon) {}
  RefSample at(double) const override {
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(q0_.size());
    return {q0_, z, z};
  }
  int n() const override { return static_cast<int>(q0_.size()); }
  double horizon() const override { return horizon_; }

 private:
  Eigen::VectorXd q0_;
  double horizon_;
};

inline constexpr double kWaypointSpacing = 1.0;
inline constexpr double kWaypointStep = 0.5;

/// w_0 = 0, w_{k+1} = w_k + step_scale * N(0, I) in (x, y); phi stays 0.
std::vector<Eigen::VectorXd> random_walk_waypoints(std::uint64_t seed, int count,
                                                   double step_scale);

/// Natural cubic spline through waypoints spaced `spacing` seconds apart.
std::unique_ptr<SplineTrajectory> spline_fit(const std::vector<Eigen::VectorXd>& waypoints,
                                             double spacing);

/// Random-walk spline covering [0, horizon].
std::unique_ptr<SplineTrajectory> random_reference(std::uint64_t seed, double horizon,
                                                   double spacing = kWaypointSpacing,
                                                   double step_scale = kWaypointStep);

/// Columns t, q_r, qd_r, qdd_r sampled every dt over [0, horizon].
void write_reference_csv(std::ostream& os, const RefTrajectory& ref, double dt);

}  // namespace mdac

#include "mdac/reference.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mdac/io.hpp"
#include "mdac/rng.hpp"

namespace mdac {

CubicSpline::CubicSpline(std::vector<double> knots, std::vector<double> values,
                         Boundary boundary)
    : t_(std::move(knots)), y_(std::move(values)) {
  const int n = static_cast<int>(t_.size());
  if (n < 2) throw std::invalid_argument("spline needs at least 2 knots");
  if (static_cast<int>(y_.size()) != n)
    throw std::invalid_argument("spline knot/value count mismatch");
  for (int k = 0; k + 1 < n; ++k) {
    if (!(t_[k + 1] > t_[k]))
      throw std::invalid_argument("spline knot times must be strictly increasing");
  }

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int k = 1; k + 1 < n; ++k) {
    const double h0 = t_[k] - t_[k - 1];
    const double h1 = t_[k + 1] - t_[k];
    a(k, k - 1) = h0 / 6.0;
    a(k, k) = (h0 + h1) / 3.0;
    a(k, k + 1) = h1 / 6.0;
    rhs[k] = (y_[k + 1] - y_[k]) / h1 - (y_[k] - y_[k - 1]) / h0;
  }
  if (boundary == Boundary::kNatural || n == 2) {
    a(0, 0) = 1.0;
    a(n - 1, n - 1) = 1.0;
  } else if (n == 3) {
    // A single parabola: constant second derivative.
    a(0, 0) = 1.0;
    a(0, 1) = -1.0;
    a(2, 1) = 1.0;
    a(2, 2) = -1.0;
  } else {
    // Continuous third derivative across the first and last interior knots.
    const double h0 = t_[1] - t_[0];
    const double h1 = t_[2] - t_[1];
    a(0, 0) = -1.0 / h0;
    a(0, 1) = 1.0 / h0 + 1.0 / h1;
    a(0, 2) = -1.0 / h1;
    const double g0 = t_[n - 2] - t_[n - 3];
    const double g1 = t_[n - 1] - t_[n - 2];
    a(n - 1, n - 3) = -1.0 / g0;
    a(n - 1, n - 2) = 1.0 / g0 + 1.0 / g1;
    a(n - 1, n - 1) = -1.0 / g1;
  }
  const Eigen::VectorXd m = a.partialPivLu().solve(rhs);
  m_.assign(m.data(), m.data() + n);
}

Eigen::Vector3d CubicSpline::eval(double t) const {
  const int n = static_cast<int>(t_.size());
  int k = 0;
  while (k + 2 < n && t >= t_[k + 1]) ++k;
  const double h = t_[k + 1] - t_[k];
  const double a = (t_[k + 1] - t) / h;
  const double b = (t - t_[k]) / h;
  const double value = a * y_[k] + b * y_[k + 1] +
                       ((a * a * a - a) * m_[k] + (b * b * b - b) * m_[k + 1]) * h * h / 6.0;
  const double slope = (y_[k + 1] - y_[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m_[k] +
                       (3.0 * b * b - 1.0) / 6.0 * h * m_[k + 1];
  const double curvature = a * m_[k] + b * m_[k + 1];
  return {value, slope, curvature};
}

SplineTrajectory::SplineTrajectory(const std::vector<double>& knots,
                                   const std::vector<Eigen::VectorXd>& waypoints,
                                   CubicSpline::Boundary boundary) {
  if (waypoints.size() < 2 || knots.size() != waypoints.size())
    throw std::invalid_argument("spline trajectory needs >= 2 timed waypoints");
  const Eigen::Index dim = waypoints.front().size();
  for (Eigen::Index c = 0; c < dim; ++c) {
    std::vector<double> values;
    values.reserve(waypoints.size());
    for (const auto& w : waypoints) {
      if (w.size() != dim) throw std::invalid_argument("waypoint dimension mismatch");
      values.push_back(w[c]);
    }
    coords_.emplace_back(knots, std::move(values), boundary);
  }
  horizon_ = knots.back() - knots.front();
}

RefSample SplineTrajectory::at(double t) const {
  const int dim = n();
  RefSample r{Eigen::VectorXd(dim), Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  for (int c = 0; c < dim; ++c) {
    const Eigen::Vector3d v = coords_[c].eval(t);
    r.q[c] = v[0];
    r.qd[c] = v[1];
    r.qdd[c] = v[2];
  }
  return r;
}

DoubleLoop::DoubleLoop(double horizon, double a, double b)
    : horizon_(horizon), a_(a), b_(b), omega_(4.0 * std::numbers::pi / horizon) {
  if (!(horizon > 0.0 && a > 0.0 && b > 0.0))
    throw std::invalid_argument("double loop needs T, A, B > 0");
}

RefSample DoubleLoop::at(double t) const {
  const double s = std::sin(omega_ * t);
  const double c = std::cos(omega_ * t);
  const double w2 = omega_ * omega_;
  return {Eigen::Vector3d(a_ * s, b_ * (1.0 - c), 0.0),
          Eigen::Vector3d(a_ * omega_ * c, b_ * omega_ * s, 0.0),
          Eigen::Vector3d(-a_ * w2 * s, b_ * w2 * c, 0.0)};
}

std::vector<Eigen::VectorXd> random_walk_waypoints(std::uint64_t seed, int count,
                                                   double step_scale) {
  if (count < 2) throw std::invalid_argument("random walk needs count >= 2");
  if (!(step_scale >= 0.0)) throw std::invalid_argument("step_scale must be >= 0");
  Rng rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> w;
  w.reserve(static_cast<std::size_t>(count));
  w.push_back(Eigen::Vector3d::Zero());
  for (int k = 1; k < count; ++k) {
    Eigen::VectorXd next = w.back();
    next[0] += step_scale * normal(rng);
    next[1] += step_scale * normal(rng);
    w.push_back(next);
  }
  return w;
}

std::unique_ptr<SplineTrajectory> spline_fit(const std::vector<Eigen::VectorXd>& waypoints,
                                             double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("waypoint spacing must be > 0");
  std::vector<double> knots(waypoints.size());
  for (std::size_t k = 0; k < knots.size(); ++k) knots[k] = static_cast<double>(k) * spacing;
  return std::make_unique<SplineTrajectory>(knots, waypoints);
}

std::unique_ptr<SplineTrajectory> random_reference(std::uint64_t seed, double horizon,
                                                   double spacing, double step_scale) {
  const int count = static_cast<int>(std::ceil(horizon / spacing - 1e-9)) + 1;
  return spline_fit(random_walk_waypoints(seed, std::max(count, 2), step_scale), spacing);
}

void write_reference_csv(std::ostream& os, const RefTrajectory& ref, double dt) {
  const int steps = steps_for(ref.horizon(), dt);
  os << "t";
  for (const char* block : {"", "d", "dd"}) {
    for (const char* name : {"x", "y", "phi"}) os << ',' << name << block << 'r';
  }
  os << '\n';
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const RefSample r = ref.at(t);
    os << fmt17(t);
    for (const auto* v : {&r.q, &r.qd, &r.qdd}) {
      for (double x : *v) os << ',' << fmt17(x);
    }
    os << '\n';
  }
}

}  // namespace mdac

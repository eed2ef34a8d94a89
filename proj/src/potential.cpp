#include "mdac/potential.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mdac/errors.hpp"

namespace mdac {

void validate(const PotentialParams& pp) {
  if (!(pp.p >= 1.0 + kDeltaP))
    throw std::invalid_argument("potential exponent p = " + std::to_string(pp.p) +
                                " is below 1 + delta_p");
  if (!(pp.epsilon >= 0.0))
    throw std::invalid_argument("potential smoothing epsilon must be >= 0");
}

double psi(const Eigen::VectorXd& a, const PotentialParams& pp) {
  double s = 0.0;
  for (double x : a) s += std::pow(std::abs(x), pp.p);
  return s + 0.5 * pp.epsilon * a.squaredNorm();
}

Eigen::VectorXd psi_grad(const Eigen::VectorXd& a, const PotentialParams& pp) {
  Eigen::VectorXd g(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double sgn = (x > 0) - (x < 0);
    g[i] = pp.p * sgn * std::pow(std::abs(x), pp.p - 1.0) + pp.epsilon * x;
  }
  return g;
}

Eigen::VectorXd psi_hess_diag(const Eigen::VectorXd& a, const PotentialParams& pp) {
  Eigen::VectorXd h(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    h[i] = pp.p * (pp.p - 1.0) * std::pow(std::abs(a[i]), pp.p - 2.0) + pp.epsilon;
    if (!std::isfinite(h[i]) || !(h[i] > 0.0))
      throw SingularHessianError("singular potential Hessian at coordinate " +
                                 std::to_string(i));
  }
  return h;
}

Eigen::VectorXd psi_hess_inv_diag(const Eigen::VectorXd& a, const PotentialParams& pp) {
  Eigen::VectorXd r(a.size());
  const double c = pp.p * (pp.p - 1.0);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = std::abs(a[i]);
    if (x == 0.0 && pp.p != 2.0) {
      if (pp.epsilon == 0.0)
        throw SingularHessianError("singular potential Hessian at coordinate " +
                                   std::to_string(i));
      r[i] = pp.p < 2.0 ? 0.0 : 1.0 / pp.epsilon;
      continue;
    }
    if (pp.p < 2.0) {
      // |x|^(2-p) / (c + eps |x|^(2-p)) avoids overflow for tiny |x|.
      const double t = std::pow(x, 2.0 - pp.p);
      r[i] = t / (c + pp.epsilon * t);
    } else {
      r[i] = 1.0 / (c * std::pow(x, pp.p - 2.0) + pp.epsilon);
    }
  }
  return r;
}

double bregman(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
               const PotentialParams& pp) {
  if (y.size() != x.size()) throw std::invalid_argument("bregman: size mismatch");
  return psi(y, pp) - psi(x, pp) - (y - x).dot(psi_grad(x, pp));
}

Eigen::VectorXd hess_inv(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                         double epsilon) {
  return psi_hess_inv_diag(x, PotentialParams{p[0], epsilon});
}

namespace ad {

Var hess_inv(const Var& x, const Var& p, double epsilon) {
  Var log_r = vlog(emul(x, x) + kSmoothKappa * kSmoothKappa);
  Var power = vexp(emul(0.5 * (p - 2.0), log_r));
  Var c = emul(p, p - 1.0);
  return ediv(1.0, emul(c, power) + epsilon);
}

Var psi(const Var& a, const Var& p, double epsilon) {
  Var abs_a = vabs(a);
  return sum(vpow(abs_a, p)) + (0.5 * epsilon) * dot(a, a);
}

}  // namespace ad

}  // namespace mdac

#pragma once

// Separable l_p potential psi(a) = sum |a_i|^p + (eps/2)|a|^2 and its
// Bregman divergence.

#include <Eigen/Dense>

#include "mdac/diffengine.hpp"

namespace mdac {

/// Lower convexity margin: p >= 1 + kDeltaP.
inline constexpr double kDeltaP = 0.05;
inline constexpr double kDefaultEpsilon = 1e-3;

struct PotentialParams {
  double p = 2.0;
  double epsilon = kDefaultEpsilon;
};

/// Throws std::invalid_argument when p < 1 + kDeltaP or epsilon < 0.
void validate(const PotentialParams& pp);

double psi(const Eigen::VectorXd& a, const PotentialParams& pp);
Eigen::VectorXd psi_grad(const Eigen::VectorXd& a, const PotentialParams& pp);

/// Diagonal of the Hessian. Throws SingularHessianError when an entry is
/// infinite or not strictly positive.
Eigen::VectorXd psi_hess_diag(const Eigen::VectorXd& a, const PotentialParams& pp);

/// Elementwise inverse of psi_hess_diag. Zero coordinates with p < 2 and
/// eps > 0 take the limiting value 0; with eps = 0 they throw
/// SingularHessianError, as do zero coordinates with p > 2.
Eigen::VectorXd psi_hess_inv_diag(const Eigen::VectorXd& a, const PotentialParams& pp);

double bregman(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
               const PotentialParams& pp);

// Overloads used by the templated closed loop. `p` is a length-1 vector.
Eigen::VectorXd hess_inv(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                         double epsilon);

namespace ad {

/// 1 / (p(p-1) (x^2 + kappa^2)^((p-2)/2) + eps): smooth in (x, p) everywhere.
Var hess_inv(const Var& x, const Var& p, double epsilon);

/// psi recorded on the tape with the smoothed |x|.
Var psi(const Var& a, const Var& p, double epsilon);

}  // namespace ad

}  // namespace mdac

#pragma once

#include <Eigen/Dense>

namespace helen {

// Moments of the abundance posterior q(s) = Dir(alpha).
// All functions require alpha > 0 elementwise with length >= 2.

// E[s] = alpha / (1^T alpha)
Eigen::VectorXd dirichlet_mean(const Eigen::Ref<const Eigen::VectorXd>& alpha);

// E[s s^T] = (Diag(alpha) + alpha alpha^T) / ((1 + 1^T alpha) 1^T alpha)
Eigen::MatrixXd dirichlet_correlation(const Eigen::Ref<const Eigen::VectorXd>& alpha);

// Differential entropy of Dir(alpha):
//   ln B(alpha) - (alpha - 1)^T (psi(alpha) - psi(1^T alpha))
double dirichlet_entropy(const Eigen::Ref<const Eigen::VectorXd>& alpha);

// Gradient of dirichlet_entropy with respect to alpha.
Eigen::VectorXd dirichlet_entropy_gradient(const Eigen::Ref<const Eigen::VectorXd>& alpha);

void validate_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& alpha);

}  // namespace helen

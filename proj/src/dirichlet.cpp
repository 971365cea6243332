#include "helen/dirichlet.hpp"

#include "helen/errors.hpp"
#include "helen/special_functions.hpp"

namespace helen {

void validate_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  if (alpha.size() < 2) {
    throw InvalidArgument("dirichlet: need at least two components");
  }
  if (!alpha.allFinite() || !(alpha.array() > 0.0).all()) {
    throw InvalidArgument("dirichlet: alpha must be positive and finite");
  }
}

Eigen::VectorXd dirichlet_mean(const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  validate_dirichlet(alpha);
  return alpha / alpha.sum();
}

Eigen::MatrixXd dirichlet_correlation(const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  validate_dirichlet(alpha);
  const double total = alpha.sum();
  Eigen::MatrixXd corr = alpha * alpha.transpose();
  corr.diagonal() += alpha;
  return corr / ((1.0 + total) * total);
}

double dirichlet_entropy(const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  validate_dirichlet(alpha);
  const double psi_total = digamma(alpha.sum());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    acc += (alpha[i] - 1.0) * (digamma(alpha[i]) - psi_total);
  }
  return log_multivariate_beta(alpha) - acc;
}

Eigen::VectorXd dirichlet_entropy_gradient(const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  validate_dirichlet(alpha);
  const double total = alpha.sum();
  const double common = (total - static_cast<double>(alpha.size())) * trigamma(total);
  Eigen::VectorXd grad(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    grad[i] = common - (alpha[i] - 1.0) * trigamma(alpha[i]);
  }
  return grad;
}

}  // namespace helen

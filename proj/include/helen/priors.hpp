#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace helen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Elementwise-independent matrix distribution families for the endmember
// matrix of a patch. Parameter semantics of (first, second):
//   beta      (C, D) / (U, V)      shape pairs
//   gaussian  (mean, variance)
//   lognormal (log-mean, log-variance)
//   gamma     (shape, rate)
//   uniform   prior on [0,1] has no parameters; its posterior is beta
enum class PriorFamily { beta, gaussian, lognormal, gamma, uniform };

std::string_view to_string(PriorFamily family);
PriorFamily parse_prior_family(std::string_view name);

// Family of the variational posterior paired with a prior family.
PriorFamily posterior_family_for(PriorFamily prior);

// True when the (first, second) parameters are a (mean, variance) pair.
bool is_location_scale(PriorFamily family);

struct PriorParams {
  PriorFamily family = PriorFamily::beta;
  Matrix first;
  Matrix second;

  Eigen::Index rows() const { return first.rows(); }
  Eigen::Index cols() const { return first.cols(); }
};

struct PosteriorParams {
  PriorFamily family = PriorFamily::beta;
  Matrix first;
  Matrix second;

  Eigen::Index rows() const { return first.rows(); }
  Eigen::Index cols() const { return first.cols(); }
};

// Box limits applied to each parameter matrix during optimization.
struct ParamBox {
  double first_lower;
  double first_upper;
  double second_lower;
  double second_upper;
};

ParamBox posterior_box(PriorFamily posterior_family);
ParamBox prior_box(PriorFamily prior_family);

// Throws InvalidArgument on shape mismatch, non-finite entries or violated
// positivity.
void validate(const PriorParams& p);
void validate(const PosteriorParams& q);

Matrix posterior_mean(const PosteriorParams& q);

// Elementwise variance of the posterior entries.
Matrix posterior_variance(const PosteriorParams& q);

// E[A^T A] = mean^T mean + Diag(column sums of the elementwise variance).
Matrix posterior_correlation(const PosteriorParams& q);

// Derivatives of the elementwise mean and variance with respect to the two
// posterior parameter matrices.
struct MomentJacobian {
  Matrix mean_d_first;
  Matrix mean_d_second;
  Matrix var_d_first;
  Matrix var_d_second;
};

MomentJacobian moment_jacobian(const PosteriorParams& q);

// KL(q || p) summed over all entries. Throws InvalidArgument when the
// families do not pair up or the shapes differ.
double kl_to_prior(const PosteriorParams& q, const PriorParams& p);

struct KlGradients {
  Matrix q_first;
  Matrix q_second;
  Matrix p_first;   // zero-sized for the uniform prior
  Matrix p_second;  // zero-sized for the uniform prior
};

KlGradients kl_gradients(const PosteriorParams& q, const PriorParams& p);

}  // namespace helen

#include "helen/elbo.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "helen/dirichlet.hpp"
#include "helen/errors.hpp"
#include "helen/special_functions.hpp"

namespace helen {

namespace {

void require_noise_var(double noise_var) {
  if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
    throw DomainError("noise variance must be positive and finite");
  }
}

// Likelihood part of the patch bound as a function of (E[A], Var[A]) and its
// gradient with respect to both.
double likelihood_part(const PatchSuffStats& stats, double noise_var, const Matrix& mean,
                       const Matrix& var, Matrix* d_mean, Matrix* d_var) {
  const Matrix mean_rs = mean * stats.r_s;  // M x N
  const double linear = (mean.array() * stats.y_s.transpose().array()).sum();
  const double quad = (mean_rs.array() * mean.array()).sum();
  const Vector diag = stats.r_s.diagonal();
  const double var_term = (var * diag).sum();
  if (d_mean != nullptr) {
    *d_mean = (stats.y_s.transpose() - mean_rs) / noise_var;
  }
  if (d_var != nullptr) {
    *d_var = Matrix::Zero(var.rows(), var.cols());
    d_var->rowwise() = (-0.5 / noise_var) * diag.transpose();
  }
  return (linear - 0.5 * (quad + var_term)) / noise_var;
}

PosteriorGradient chain_to_parameters(const PosteriorParams& q, const Matrix& d_mean,
                                      const Matrix& d_var) {
  const MomentJacobian jac = moment_jacobian(q);
  PosteriorGradient g;
  g.first = d_mean.cwiseProduct(jac.mean_d_first) + d_var.cwiseProduct(jac.var_d_first);
  g.second = d_mean.cwiseProduct(jac.mean_d_second) + d_var.cwiseProduct(jac.var_d_second);
  return g;
}

}  // namespace

PatchMoments PatchMoments::of(const PosteriorParams& q) {
  return PatchMoments{posterior_mean(q), posterior_correlation(q)};
}

PixelSuffStats pixel_suff_stats(const Eigen::Ref<const Vector>& y, const PatchMoments& moments,
                                const Eigen::Ref<const Vector>& alpha) {
  if (moments.mean.rows() != y.size() || moments.mean.cols() != alpha.size()) {
    throw InvalidArgument("pixel statistics: dimension mismatch");
  }
  PixelSuffStats s;
  s.y_norm_sq = y.squaredNorm();
  s.cross = y.dot(moments.mean * dirichlet_mean(alpha));
  s.trace_term = (moments.correlation.array() * dirichlet_correlation(alpha).array()).sum();
  return s;
}

double pixel_elbo_constant(Eigen::Index bands, Eigen::Index endmembers) {
  return -0.5 * static_cast<double>(bands) * std::log(2.0 * std::numbers::pi) +
         log_gamma(static_cast<double>(endmembers));
}

double pixel_elbo(const Eigen::Ref<const Vector>& y, double noise_var, const PatchMoments& moments,
                  const Eigen::Ref<const Vector>& alpha) {
  require_noise_var(noise_var);
  const PixelSuffStats s = pixel_suff_stats(y, moments, alpha);
  const double m = static_cast<double>(y.size());
  return -0.5 * s.expected_residual() / noise_var - 0.5 * m * std::log(noise_var) +
         dirichlet_entropy(alpha) + pixel_elbo_constant(y.size(), alpha.size());
}

double pixel_elbo(const Eigen::Ref<const Vector>& y, double noise_var, const PosteriorParams& q_A,
                  const Eigen::Ref<const Vector>& alpha) {
  return pixel_elbo(y, noise_var, PatchMoments::of(q_A), alpha);
}

Vector pixel_elbo_alpha_gradient(const Eigen::Ref<const Vector>& y, double noise_var,
                                 const PatchMoments& moments, const Eigen::Ref<const Vector>& alpha) {
  require_noise_var(noise_var);
  validate_dirichlet(alpha);
  const Vector b = moments.mean.transpose() * y;
  const Matrix& c = moments.correlation;
  const double total = alpha.sum();
  const double b_alpha = b.dot(alpha);
  const Vector c_alpha = c * alpha;
  const double numer = c.diagonal().dot(alpha) + alpha.dot(c_alpha);
  const double denom = total * (total + 1.0);
  const Vector d_numer = c.diagonal() + 2.0 * c_alpha;
  const double d_denom = 2.0 * total + 1.0;
  const Vector d_cross = (b / total).array() - b_alpha / (total * total);
  const Vector d_trace = (d_numer * denom).array() - numer * d_denom;
  return d_cross / noise_var - (0.5 / (noise_var * denom * denom)) * d_trace +
         dirichlet_entropy_gradient(alpha);
}

PosteriorGradient pixel_elbo_posterior_gradient(const Eigen::Ref<const Vector>& y, double noise_var,
                                                const PosteriorParams& q_A,
                                                const Eigen::Ref<const Vector>& alpha) {
  require_noise_var(noise_var);
  PatchSuffStats stats;
  stats.r_s = dirichlet_correlation(alpha);
  stats.y_s = dirichlet_mean(alpha) * y.transpose();
  stats.weight = 1.0;
  Matrix d_mean;
  Matrix d_var;
  likelihood_part(stats, noise_var, posterior_mean(q_A), posterior_variance(q_A), &d_mean, &d_var);
  return chain_to_parameters(q_A, d_mean, d_var);
}

double mixing_term(double omega, double gamma, double log_pout) {
  const double inf = std::numeric_limits<double>::infinity();
  const double nominal = 1.0 - omega;
  double value = 0.0;
  if (omega > 0.0) {
    if (gamma <= 0.0) return -inf;
    value += omega * (std::log(gamma) + log_pout - std::log(omega));
  }
  if (nominal > 0.0) {
    if (gamma >= 1.0) return -inf;
    value += nominal * (std::log1p(-gamma) - std::log(nominal));
  }
  return value;
}

PatchSuffStats patch_suff_stats(const Eigen::Ref<const Matrix>& pixels,
                                const Eigen::Ref<const Matrix>& alphas,
                                const Eigen::Ref<const Vector>& omegas) {
  if (pixels.cols() != alphas.cols() || pixels.cols() != omegas.size()) {
    throw InvalidArgument("patch statistics: pixel, alpha and omega counts differ");
  }
  const Eigen::Index n = alphas.rows();
  PatchSuffStats s;
  s.r_s = Matrix::Zero(n, n);
  s.y_s = Matrix::Zero(n, pixels.rows());
  for (Eigen::Index t = 0; t < pixels.cols(); ++t) {
    const double w = 1.0 - omegas[t];
    if (w == 0.0) continue;
    s.r_s += w * dirichlet_correlation(alphas.col(t));
    s.y_s += (w * dirichlet_mean(alphas.col(t))) * pixels.col(t).transpose();
    s.weight += w;
  }
  return s;
}

double patch_posterior_objective(const PatchSuffStats& stats, double noise_var,
                                 const PosteriorParams& q_A, const PriorParams& prior) {
  require_noise_var(noise_var);
  return likelihood_part(stats, noise_var, posterior_mean(q_A), posterior_variance(q_A), nullptr,
                         nullptr) -
         kl_to_prior(q_A, prior);
}

double patch_posterior_objective(const PatchSuffStats& stats, double noise_var,
                                 const PosteriorParams& q_A, const PriorParams& prior,
                                 PosteriorGradient& grad) {
  require_noise_var(noise_var);
  Matrix d_mean;
  Matrix d_var;
  const double like = likelihood_part(stats, noise_var, posterior_mean(q_A), posterior_variance(q_A),
                                      &d_mean, &d_var);
  grad = chain_to_parameters(q_A, d_mean, d_var);
  const KlGradients kl_grad = kl_gradients(q_A, prior);
  grad.first -= kl_grad.q_first;
  grad.second -= kl_grad.q_second;
  return like - kl_to_prior(q_A, prior);
}

double patch_elbo(const Eigen::Ref<const Matrix>& pixels, double noise_var, double gamma,
                  const PosteriorParams& q_A, const PriorParams& prior,
                  const Eigen::Ref<const Matrix>& alphas, const Eigen::Ref<const Vector>& omegas,
                  const OutlierDensity& outlier) {
  if (pixels.cols() == 0) {
    throw InvalidArgument("patch_elbo: empty patch");
  }
  if (pixels.cols() != alphas.cols() || pixels.cols() != omegas.size()) {
    throw InvalidArgument("patch_elbo: pixel, alpha and omega counts differ");
  }
  const PatchMoments moments = PatchMoments::of(q_A);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(pixels.cols()) + 1);
  for (Eigen::Index t = 0; t < pixels.cols(); ++t) {
    const double w = 1.0 - omegas[t];
    double term = mixing_term(omegas[t], gamma, log_outlier_density(pixels.col(t), outlier));
    if (w > 0.0) {
      term += w * pixel_elbo(pixels.col(t), noise_var, moments, alphas.col(t));
    }
    terms.push_back(term);
  }
  terms.push_back(-kl_to_prior(q_A, prior));
  return compensated_sum(terms);
}

double total_elbo(const HsiCube& cube, const PatchGrid& grid, const ModelParameters& model,
                  const VariationalState& state) {
  const std::size_t k_count = grid.count();
  if (state.patch_posteriors.size() != k_count) {
    throw InvalidArgument("total_elbo: one posterior per patch required");
  }
  if (static_cast<std::size_t>(state.alpha.cols()) != cube.pixels() ||
      static_cast<std::size_t>(state.omega.size()) != cube.pixels() ||
      grid.assignment.size() != cube.pixels()) {
    throw InvalidArgument("total_elbo: state does not match the cube");
  }
  std::vector<double> per_patch(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& idx = grid.members[k];
    const auto n = static_cast<Eigen::Index>(idx.size());
    Matrix pixels(cube.bands(), n);
    Matrix alphas(state.alpha.rows(), n);
    Vector omegas(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto t = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
      pixels.col(j) = cube.values().col(t);
      alphas.col(j) = state.alpha.col(t);
      omegas[j] = state.omega[t];
    }
    per_patch[k] = patch_elbo(pixels, model.noise_var, model.outlier_rate, state.patch_posteriors[k],
                              model.prior, alphas, omegas, model.outlier);
  }
  return compensated_sum(per_patch);
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double comp = 0.0;
  for (const double v : values) {
    if (!std::isfinite(v)) {
      double naive = 0.0;
      for (const double w : values) naive += w;
      return naive;
    }
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

}  // namespace helen

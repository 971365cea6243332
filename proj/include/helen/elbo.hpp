#pragma once

#include <span>

#include <Eigen/Dense>

#include "helen/model.hpp"
#include "helen/priors.hpp"

namespace helen {

// First and second moments of a patch endmember posterior, computed once and
// reused for every pixel of the patch.
struct PatchMoments {
  Matrix mean;         // E[A], M x N
  Matrix correlation;  // E[A^T A], N x N

  static PatchMoments of(const PosteriorParams& q);
};

struct PixelSuffStats {
  double y_norm_sq = 0.0;   // y^T y
  double cross = 0.0;       // y^T E[A] E[s]
  double trace_term = 0.0;  // tr(E[A^T A] E[s s^T])

  // y^T y - 2 y^T E[A] E[s] + tr(E[A^T A] E[s s^T]) = E||y - A s||^2
  double expected_residual() const { return y_norm_sq - 2.0 * cross + trace_term; }
};

PixelSuffStats pixel_suff_stats(const Eigen::Ref<const Vector>& y, const PatchMoments& moments,
                                const Eigen::Ref<const Vector>& alpha);

// Constant of the per-pixel bound: -(M/2) ln(2 pi) + ln((N-1)!). The second
// part is the log-density of the uniform Dirichlet prior on the simplex.
double pixel_elbo_constant(Eigen::Index bands, Eigen::Index endmembers);

// Per-pixel nominal bound l_{t,k}.
double pixel_elbo(const Eigen::Ref<const Vector>& y, double noise_var, const PosteriorParams& q_A,
                  const Eigen::Ref<const Vector>& alpha);
double pixel_elbo(const Eigen::Ref<const Vector>& y, double noise_var, const PatchMoments& moments,
                  const Eigen::Ref<const Vector>& alpha);

// d l_{t,k} / d alpha
Vector pixel_elbo_alpha_gradient(const Eigen::Ref<const Vector>& y, double noise_var,
                                 const PatchMoments& moments, const Eigen::Ref<const Vector>& alpha);

struct PosteriorGradient {
  Matrix first;
  Matrix second;
};

// d l_{t,k} / d (first, second posterior parameters)
PosteriorGradient pixel_elbo_posterior_gradient(const Eigen::Ref<const Vector>& y, double noise_var,
                                                const PosteriorParams& q_A,
                                                const Eigen::Ref<const Vector>& alpha);

// Outlier mixing term g_t(omega, gamma) with 0 log(./0) = 0; returns -inf when
// gamma excludes a component that omega still assigns mass to.
double mixing_term(double omega, double gamma, double log_pout);

struct PatchSuffStats {
  Matrix r_s;           // sum_t (1 - omega_t) E[s_t s_t^T], N x N
  Matrix y_s;           // sum_t (1 - omega_t) E[s_t] y_t^T, N x M
  double weight = 0.0;  // sum_t (1 - omega_t)
};

// pixels: M x n, alphas: N x n, omegas: n
PatchSuffStats patch_suff_stats(const Eigen::Ref<const Matrix>& pixels,
                                const Eigen::Ref<const Matrix>& alphas,
                                const Eigen::Ref<const Vector>& omegas);

// Part of the patch bound that depends on the endmember posterior:
//   (1/s2) <E[A], Y_s^T> - (1/2s2) tr(E[A^T A] R_s) - KL(q || p)
double patch_posterior_objective(const PatchSuffStats& stats, double noise_var,
                                 const PosteriorParams& q_A, const PriorParams& prior);

// Value and gradient of patch_posterior_objective with respect to the
// posterior parameters.
double patch_posterior_objective(const PatchSuffStats& stats, double noise_var,
                                 const PosteriorParams& q_A, const PriorParams& prior,
                                 PosteriorGradient& grad);

// sum_t [ (1 - omega_t) l_{t,k} + g_t ] - KL(q_A || prior)
double patch_elbo(const Eigen::Ref<const Matrix>& pixels, double noise_var, double gamma,
                  const PosteriorParams& q_A, const PriorParams& prior,
                  const Eigen::Ref<const Matrix>& alphas, const Eigen::Ref<const Vector>& omegas,
                  const OutlierDensity& outlier);

// Sum of patch_elbo over all patches (compensated summation).
double total_elbo(const HsiCube& cube, const PatchGrid& grid, const ModelParameters& model,
                  const VariationalState& state);

// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

}  // namespace helen

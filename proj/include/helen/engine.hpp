#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "helen/apg.hpp"
#include "helen/model.hpp"
#include "helen/priors.hpp"

namespace helen {

enum class InitMode { user_endmembers, successive_projection, random_simplex };

std::string_view to_string(InitMode mode);
InitMode parse_init_mode(std::string_view name);

struct InitSpec {
  InitMode mode = InitMode::successive_projection;
  std::optional<Matrix> endmembers;  // M x N, required in user mode
};

struct EngineConfig {
  PriorFamily prior_family = PriorFamily::beta;
  std::size_t n_endmembers = 3;
  std::size_t patch_rows = 5;
  std::size_t patch_cols = 5;
  std::size_t max_sweeps = 300;
  double rel_tol_mean_A = 1e-5;
  ApgConfig apg;
  OutlierDensity outlier;
  std::uint64_t seed = 0;
  InitSpec init;
  std::size_t threads = 1;
  double init_outlier_rate = 0.01;  // gamma and every omega at start
};

void validate(const EngineConfig& cfg);

struct ProgressRecord {
  std::size_t sweep = 0;
  double elbo = 0.0;
  double noise_var = 0.0;
  double outlier_rate = 0.0;
  double seconds = 0.0;
};

using ProgressSink = std::function<void(const ProgressRecord&)>;

// Runs alternating maximization of the ELBO: per sweep, abundance posteriors,
// patch endmember posteriors, outlier responsibilities, then prior
// parameters, noise variance and outlier rate.
UnmixResult run(const HsiCube& cube, const EngineConfig& cfg, const ProgressSink& sink = {});

// Closed-form responsibility: logistic((ln g + log p_out) - (ln(1-g) + l)).
double update_omega(double log_pout, double gamma, double pixel_elbo_value);

struct ResidualSums {
  double weighted_residual = 0.0;  // sum_t (1 - omega_t) E||y_t - A_k s_t||^2
  double weight = 0.0;             // sum_t (1 - omega_t)
};

ResidualSums patch_residual_sums(const Eigen::Ref<const Matrix>& pixels, const PosteriorParams& q_A,
                                 const Eigen::Ref<const Matrix>& alphas,
                                 const Eigen::Ref<const Vector>& omegas);

// sigma^2 = sum_k residual_k / (M sum_t (1 - omega_t)), clamped below at
// 1e-12. Empty optional when every pixel is fully an outlier.
std::optional<double> update_noise_var(std::span<const ResidualSums> per_patch, std::size_t bands);

// Mean of the responsibilities; lands on 0 or 1 only when every omega does.
double update_gamma(const Eigen::Ref<const Vector>& omega);

// [Sigma]_{mn} = 1 / (1/Q_{mn} + [R_s]_{nn} / sigma^2)
Matrix update_gaussian_sigma(const Matrix& prior_var, const Matrix& r_s, double noise_var);

// Mean of U_k; biased spread of U_k plus mean posterior variance (>= 1e-10).
std::pair<Matrix, Matrix> update_gaussian_prior(std::span<const Matrix> means,
                                                std::span<const Matrix> variances);

// Ascent on -sum_k KL(q_k || p) over shape-type prior parameters (beta or
// gamma) by APG; the objective never decreases.
PriorParams update_shape_prior(std::span<const PosteriorParams> posteriors, const PriorParams& prior,
                               const ApgConfig& apg);

// Beta-prior specialization of update_shape_prior returning (C, D).
std::pair<Matrix, Matrix> update_beta_prior(std::span<const Matrix> u, std::span<const Matrix> v,
                                            const Matrix& c, const Matrix& d, const ApgConfig& apg);

// Greedy successive projection: picks the pixel with the largest residual
// norm, projects it out, repeats. Returns pixel indices.
std::vector<std::size_t> successive_projection(const Matrix& pixels, std::size_t count);

struct Initialization {
  ModelParameters model;
  VariationalState state;
  PatchGrid grid;
  Matrix endmembers;  // M x N initial endmember estimate
};

Initialization initialize(const HsiCube& cube, const EngineConfig& cfg);

}  // namespace helen

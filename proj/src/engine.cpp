#include "helen/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "helen/dirichlet.hpp"
#include "helen/elbo.hpp"
#include "helen/parallel.hpp"
#include "helen/random.hpp"
#include "helen/special_functions.hpp"

namespace helen {

namespace {

constexpr double kAlphaLower = 1e-6;
constexpr double kAlphaUpper = 1e6;
constexpr double kNoiseFloor = 1e-12;
constexpr double kBetaConcentration = 20.0;
constexpr double kGammaRate = 400.0;
constexpr double kInitVariance = 0.01;

Vector flatten(const Matrix& first, const Matrix& second) {
  Vector x(first.size() + second.size());
  x.head(first.size()) = Eigen::Map<const Vector>(first.data(), first.size());
  x.tail(second.size()) = Eigen::Map<const Vector>(second.data(), second.size());
  return x;
}

void unflatten(const Vector& x, Matrix& first, Matrix& second) {
  first = Eigen::Map<const Matrix>(x.data(), first.rows(), first.cols());
  second = Eigen::Map<const Matrix>(x.data() + first.size(), second.rows(), second.cols());
}

BoxProjection box_for(const ParamBox& box, Eigen::Index entries) {
  BoxProjection proj;
  proj.lower_each.resize(2 * entries);
  proj.upper_each.resize(2 * entries);
  proj.lower_each.head(entries).setConstant(box.first_lower);
  proj.lower_each.tail(entries).setConstant(box.second_lower);
  proj.upper_each.head(entries).setConstant(box.first_upper);
  proj.upper_each.tail(entries).setConstant(box.second_upper);
  proj.lower = std::min(box.first_lower, box.second_lower);
  proj.upper = std::max(box.first_upper, box.second_upper);
  return proj;
}

// Abundance subproblem for one pixel: maximize l_{t,k} over alpha using
// b = E[A]^T y and C = E[A^T A].
struct AlphaObjective {
  Vector b;
  const Matrix* corr;
  double noise_var;

  double operator()(const Vector& alpha, Vector* grad) const {
    const Matrix& c = *corr;
    const double total = alpha.sum();
    const double b_alpha = b.dot(alpha);
    const Vector c_alpha = c * alpha;
    const double numer = c.diagonal().dot(alpha) + alpha.dot(c_alpha);
    const double denom = total * (total + 1.0);
    const double value = b_alpha / (total * noise_var) - 0.5 * numer / (denom * noise_var) +
                         dirichlet_entropy(alpha);
    if (grad != nullptr) {
      const Vector d_numer = c.diagonal() + 2.0 * c_alpha;
      const double d_denom = 2.0 * total + 1.0;
      *grad = (b / total).array() - b_alpha / (total * total);
      *grad /= noise_var;
      *grad -= (0.5 / (noise_var * denom * denom)) *
               ((d_numer * denom).array() - numer * d_denom).matrix();
      *grad += dirichlet_entropy_gradient(alpha);
    }
    return value;
  }
};

Vector to_log(const Vector& x, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
  return mask.select(x.array().log(), x.array()).matrix();
}

Vector from_log(const Vector& z, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
  return mask.select(z.array().exp(), z.array()).matrix();
}

double next_init_step(const ApgConfig& cfg, double last_step) {
  if (!(last_step > 0.0)) return cfg.init_step;
  return last_step / cfg.backtrack_shrink;
}

Matrix gather_columns(const Matrix& source, const std::vector<std::size_t>& idx) {
  Matrix out(source.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = source.col(static_cast<Eigen::Index>(idx[j]));
  }
  return out;
}

Vector gather(const Vector& source, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] = source[static_cast<Eigen::Index>(idx[j])];
  }
  return out;
}

std::size_t count_distinct_pixels(const Matrix& pixels, std::size_t cap) {
  std::vector<Eigen::Index> distinct;
  for (Eigen::Index t = 0; t < pixels.cols() && distinct.size() < cap; ++t) {
    bool seen = false;
    for (const auto d : distinct) {
      if (pixels.col(d) == pixels.col(t)) {
        seen = true;
        break;
      }
    }
    if (!seen) distinct.push_back(t);
  }
  return distinct.size();
}

// Pixels whose distance to the leading rank-`rank` subspace is not anomalous
// (median + 5 MAD). Keeps gross outliers out of the endmember search.
std::vector<std::size_t> subspace_inliers(const Matrix& pixels, std::size_t rank) {
  const Eigen::Index m = pixels.rows();
  const auto r = std::min<Eigen::Index>(static_cast<Eigen::Index>(rank), m);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(pixels * pixels.transpose());
  const Matrix basis = eig.eigenvectors().rightCols(r);
  const Vector dist = (pixels - basis * (basis.transpose() * pixels)).colwise().norm();

  std::vector<double> sorted(dist.data(), dist.data() + dist.size());
  auto median_of = [](std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  const double med = median_of(sorted);
  for (auto& d : sorted) d = std::abs(d - med);
  const double mad = 1.4826 * median_of(sorted);
  const double scale = pixels.colwise().norm().maxCoeff();
  const double cut = std::max(med + 5.0 * mad, 1e-8 * scale);

  std::vector<std::size_t> keep;
  for (Eigen::Index t = 0; t < dist.size(); ++t) {
    if (dist[t] <= cut) keep.push_back(static_cast<std::size_t>(t));
  }
  return keep;
}

// Largest point of a 1-D function on [lo, hi] (log scale) found by bisection
// on the sign of its derivative; the caller compares against the start.
template <typename Deriv>
double bisect_log_stationary(Deriv&& deriv, double lo, double hi) {
  double a = std::log(lo), b = std::log(hi);
  if (deriv(lo) <= 0.0) return lo;
  if (deriv(hi) >= 0.0) return hi;
  for (int i = 0; i < 100; ++i) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    (deriv(std::exp(m)) > 0.0 ? a : b) = m;
  }
  return std::exp(0.5 * (a + b));
}

double beta_entry_kl(double u, double v, double c, double d) {
  return log_beta(c, d) - log_beta(u, v) + (u - c) * digamma(u) + (v - d) * digamma(v) +
         (c + d - u - v) * digamma(u + v);
}

// With the means held fixed the patch objective separates per entry in the
// concentration k = U + V:  -(R_nn / 2 s2) mu (1 - mu) / (k + 1) - KL.
// Each entry moves to its 1-D maximizer when that raises its value. A scalar
// step cannot do this: the mean direction is stiffer by the data weight.
void refine_beta_concentration(PosteriorParams& q, const PriorParams& prior, const Matrix& r_s,
                               double noise_var, const ParamBox& box) {
  const bool flat = prior.family == PriorFamily::uniform;
  for (Eigen::Index n = 0; n < q.cols(); ++n) {
    const double w = r_s(n, n) / (2.0 * noise_var);
    for (Eigen::Index m = 0; m < q.rows(); ++m) {
      const double u0 = q.first(m, n), v0 = q.second(m, n);
      const double c = flat ? 1.0 : prior.first(m, n);
      const double d = flat ? 1.0 : prior.second(m, n);
      const double mu = u0 / (u0 + v0);
      const double spread = mu * (1.0 - mu);
      const double lo = std::max(box.first_lower / mu, box.second_lower / (1.0 - mu));
      const double hi = std::min(box.first_upper / mu, box.second_upper / (1.0 - mu));
      if (!(lo < hi)) continue;
      auto value = [&](double k) { return -w * spread / (k + 1.0) - beta_entry_kl(k * mu, k * (1.0 - mu), c, d); };
      auto deriv = [&](double k) {
        const double u = k * mu, v = k * (1.0 - mu);
        const double shared = (u + v - c - d) * trigamma(u + v);
        const double dkl = mu * ((u - c) * trigamma(u) - shared) + (1.0 - mu) * ((v - d) * trigamma(v) - shared);
        return w * spread / ((k + 1.0) * (k + 1.0)) - dkl;
      };
      const double k = bisect_log_stationary(deriv, lo, hi);
      if (value(k) > value(u0 + v0)) {
        q.first(m, n) = std::clamp(k * mu, box.first_lower, box.first_upper);
        q.second(m, n) = std::clamp(k * (1.0 - mu), box.second_lower, box.second_upper);
      }
    }
  }
}

bool bounded_support(PriorFamily family) {
  return family == PriorFamily::beta || family == PriorFamily::uniform;
}

}  // namespace

std::string_view to_string(InitMode mode) {
  switch (mode) {
    case InitMode::user_endmembers:
      return "user-endmembers";
    case InitMode::successive_projection:
      return "successive-projection";
    case InitMode::random_simplex:
      return "random-simplex";
  }
  return "unknown";
}

InitMode parse_init_mode(std::string_view name) {
  if (name == "user-endmembers") return InitMode::user_endmembers;
  if (name == "successive-projection") return InitMode::successive_projection;
  if (name == "random-simplex") return InitMode::random_simplex;
  throw InvalidArgument("unknown init mode '" + std::string(name) + "'");
}

void validate(const EngineConfig& cfg) {
  if (cfg.n_endmembers < 2) throw InvalidArgument("engine: need at least two endmembers");
  if (cfg.max_sweeps < 1) throw InvalidArgument("engine: max_sweeps must be at least 1");
  if (cfg.patch_rows < 1 || cfg.patch_cols < 1) {
    throw InvalidArgument("engine: patch dimensions must be at least 1");
  }
  if (!(cfg.rel_tol_mean_A >= 0.0)) throw InvalidArgument("engine: rel_tol_mean_A must be >= 0");
  if (!(cfg.init_outlier_rate >= 0.0 && cfg.init_outlier_rate <= 1.0)) {
    throw InvalidArgument("engine: init_outlier_rate must lie in [0, 1]");
  }
  validate(cfg.apg);
  validate(cfg.outlier);
  if (cfg.init.mode == InitMode::user_endmembers && !cfg.init.endmembers) {
    throw InvalidArgument("engine: user-endmembers init requires an endmember matrix");
  }
  if (cfg.init.endmembers) {
    const Matrix& e = *cfg.init.endmembers;
    if (static_cast<std::size_t>(e.cols()) != cfg.n_endmembers) {
      throw InvalidArgument("engine: init endmembers need one column per endmember");
    }
    if (!e.allFinite()) throw InvalidArgument("engine: init endmembers must be finite");
    const bool unit_interval =
        cfg.prior_family == PriorFamily::beta || cfg.prior_family == PriorFamily::uniform;
    if (unit_interval && !((e.array() > 0.0).all() && (e.array() < 1.0).all())) {
      throw InvalidArgument("engine: init endmembers must lie in (0, 1) for the beta family");
    }
  }
}

double update_omega(double log_pout, double gamma, double pixel_elbo_value) {
  if (gamma <= 0.0) return 0.0;
  if (gamma >= 1.0) return 1.0;
  const double diff =
      (std::log(gamma) + log_pout) - (std::log1p(-gamma) + pixel_elbo_value);
  if (diff >= 0.0) {
    return 1.0 / (1.0 + std::exp(-diff));
  }
  const double e = std::exp(diff);
  return e / (1.0 + e);
}

ResidualSums patch_residual_sums(const Eigen::Ref<const Matrix>& pixels, const PosteriorParams& q_A,
                                 const Eigen::Ref<const Matrix>& alphas,
                                 const Eigen::Ref<const Vector>& omegas) {
  const PatchMoments moments = PatchMoments::of(q_A);
  ResidualSums sums;
  for (Eigen::Index t = 0; t < pixels.cols(); ++t) {
    const double w = 1.0 - omegas[t];
    if (w == 0.0) continue;
    sums.weighted_residual +=
        w * pixel_suff_stats(pixels.col(t), moments, alphas.col(t)).expected_residual();
    sums.weight += w;
  }
  return sums;
}

std::optional<double> update_noise_var(std::span<const ResidualSums> per_patch, std::size_t bands) {
  double residual = 0.0;
  double weight = 0.0;
  for (const auto& p : per_patch) {
    residual += p.weighted_residual;
    weight += p.weight;
  }
  if (!(weight > 0.0)) return std::nullopt;
  return std::max(kNoiseFloor, residual / (static_cast<double>(bands) * weight));
}

double update_gamma(const Eigen::Ref<const Vector>& omega) {
  if (omega.size() == 0) throw InvalidArgument("update_gamma: no pixels");
  const double g = omega.mean();
  // rounding can land the mean on 0 or 1 while some omega is not there yet,
  // which would send the mixing term to -inf; step back one ulp
  if (g >= 1.0 && omega.minCoeff() < 1.0) return std::nextafter(1.0, 0.0);
  if (g <= 0.0 && omega.maxCoeff() > 0.0) return std::numeric_limits<double>::denorm_min();
  return g;
}

Matrix update_gaussian_sigma(const Matrix& prior_var, const Matrix& r_s, double noise_var) {
  if (r_s.rows() != prior_var.cols() || r_s.cols() != prior_var.cols()) {
    throw InvalidArgument("update_gaussian_sigma: R_s must be N x N");
  }
  Matrix sigma(prior_var.rows(), prior_var.cols());
  for (Eigen::Index n = 0; n < prior_var.cols(); ++n) {
    const double data_precision = r_s(n, n) / noise_var;
    for (Eigen::Index m = 0; m < prior_var.rows(); ++m) {
      sigma(m, n) = 1.0 / (1.0 / prior_var(m, n) + data_precision);
    }
  }
  return sigma;
}

std::pair<Matrix, Matrix> update_gaussian_prior(std::span<const Matrix> means,
                                                std::span<const Matrix> variances) {
  if (means.empty() || means.size() != variances.size()) {
    throw InvalidArgument("update_gaussian_prior: need matching non-empty lists");
  }
  const double k = static_cast<double>(means.size());
  Matrix mean = Matrix::Zero(means[0].rows(), means[0].cols());
  for (const auto& u : means) mean += u;
  mean /= k;
  Matrix spread = Matrix::Zero(mean.rows(), mean.cols());
  for (std::size_t i = 0; i < means.size(); ++i) {
    spread += (means[i] - mean).cwiseAbs2() + variances[i];
  }
  spread /= k;
  return {mean, spread.cwiseMax(1e-10)};
}

PriorParams update_shape_prior(std::span<const PosteriorParams> posteriors, const PriorParams& prior,
                               const ApgConfig& apg) {
  if (posteriors.empty()) throw InvalidArgument("update_shape_prior: no posteriors");
  if (prior.family != PriorFamily::beta && prior.family != PriorFamily::gamma) {
    throw InvalidArgument("update_shape_prior: only beta and gamma priors use the gradient path");
  }
  PriorParams work = prior;
  const Eigen::Index entries = prior.first.size();
  const BoxProjection box = box_for(prior_box(prior.family), entries);
  const Eigen::Array<bool, Eigen::Dynamic, 1> log_coords = (box.lower_each.array() > 0.0);
  BoxProjection log_box = box;
  log_box.lower_each = to_log(box.lower_each, log_coords);
  log_box.upper_each = to_log(box.upper_each, log_coords);
  Objective objective = [&](const Vector& z, Vector* grad) {
    const Vector x = from_log(z, log_coords);
    unflatten(x, work.first, work.second);
    double value = 0.0;
    Matrix g_first = Matrix::Zero(work.first.rows(), work.first.cols());
    Matrix g_second = g_first;
    for (const auto& q : posteriors) {
      value -= kl_to_prior(q, work);
      if (grad != nullptr) {
        const KlGradients g = kl_gradients(q, work);
        g_first -= g.p_first;
        g_second -= g.p_second;
      }
    }
    if (grad != nullptr) {
      *grad = flatten(g_first, g_second);
      *grad = log_coords.select(grad->cwiseProduct(x), *grad);
    }
    return value;
  };
  ApgConfig cfg = apg;
  cfg.mode = StepMode::backtracking;
  const ApgResult res =
      maximize(objective, to_log(flatten(prior.first, prior.second), log_coords), log_box, cfg);
  PriorParams out = prior;
  unflatten(from_log(res.x, log_coords), out.first, out.second);
  return out;
}

std::pair<Matrix, Matrix> update_beta_prior(std::span<const Matrix> u, std::span<const Matrix> v,
                                            const Matrix& c, const Matrix& d, const ApgConfig& apg) {
  if (u.size() != v.size()) throw InvalidArgument("update_beta_prior: U and V lists differ");
  std::vector<PosteriorParams> posteriors;
  posteriors.reserve(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    posteriors.push_back(PosteriorParams{PriorFamily::beta, u[k], v[k]});
  }
  const PriorParams out = update_shape_prior(posteriors, PriorParams{PriorFamily::beta, c, d}, apg);
  return {out.first, out.second};
}

std::vector<std::size_t> successive_projection(const Matrix& pixels, std::size_t count) {
  if (count == 0) return {};
  if (count_distinct_pixels(pixels, count) < count) {
    throw InvalidArgument("successive_projection: fewer distinct pixels than endmembers");
  }
  Matrix residual = pixels;
  std::vector<std::size_t> picked;
  picked.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::Index best = 0;
    residual.colwise().squaredNorm().maxCoeff(&best);
    picked.push_back(static_cast<std::size_t>(best));
    const double norm = residual.col(best).norm();
    if (norm == 0.0) break;
    const Vector u = residual.col(best) / norm;
    residual -= u * (u.transpose() * residual);
  }
  return picked;
}

Initialization initialize(const HsiCube& cube, const EngineConfig& cfg) {
  validate(cfg);
  const auto m = static_cast<Eigen::Index>(cube.bands());
  const auto n = static_cast<Eigen::Index>(cfg.n_endmembers);
  if (cfg.n_endmembers > cube.bands()) {
    throw InvalidArgument("engine: more endmembers than bands");
  }
  const Matrix& y = cube.values();

  Matrix endmembers(m, n);
  switch (cfg.init.mode) {
    case InitMode::user_endmembers: {
      const Matrix& given = *cfg.init.endmembers;
      if (given.rows() != m || given.cols() != n) {
        throw InvalidArgument("engine: initial endmembers must be " + std::to_string(m) + " x " +
                              std::to_string(n));
      }
      if (bounded_support(cfg.prior_family) &&
          !((given.array() > 0.0).all() && (given.array() < 1.0).all())) {
        throw InvalidArgument("engine: initial endmembers must lie in (0, 1) for the beta family");
      }
      endmembers = given;
      break;
    }
    case InitMode::successive_projection: {
      const auto keep = subspace_inliers(y, cfg.n_endmembers);
      const Matrix candidates = gather_columns(y, keep);
      if (count_distinct_pixels(candidates, cfg.n_endmembers) < cfg.n_endmembers) {
        endmembers = gather_columns(y, successive_projection(y, cfg.n_endmembers));
      } else {
        endmembers = gather_columns(candidates, successive_projection(candidates, cfg.n_endmembers));
      }
      break;
    }
    case InitMode::random_simplex: {
      if (count_distinct_pixels(y, cfg.n_endmembers) < cfg.n_endmembers) {
        throw InvalidArgument("engine: fewer distinct pixels than endmembers");
      }
      Rng rng(cfg.seed, 0x1417);
      std::vector<std::size_t> idx;
      while (idx.size() < cfg.n_endmembers) {
        const auto t = static_cast<std::size_t>(rng.below(cube.pixels()));
        bool duplicate = false;
        for (const auto j : idx) {
          if (y.col(static_cast<Eigen::Index>(j)) == y.col(static_cast<Eigen::Index>(t))) {
            duplicate = true;
            break;
          }
        }
        if (!duplicate) idx.push_back(t);
      }
      endmembers = gather_columns(y, idx);
      break;
    }
  }
  if (cfg.init.mode != InitMode::user_endmembers) {
    endmembers = endmembers.cwiseMax(0.01);
    if (bounded_support(cfg.prior_family)) endmembers = endmembers.cwiseMin(0.99);
  }

  Initialization init;
  init.endmembers = endmembers;
  init.grid = partition_image(cube.rows(), cube.cols(), cfg.patch_rows, cfg.patch_cols);

  const PriorFamily post_family = posterior_family_for(cfg.prior_family);
  PosteriorParams q;
  q.family = post_family;
  switch (cfg.prior_family) {
    case PriorFamily::beta:
    case PriorFamily::uniform:
      q.first = kBetaConcentration * endmembers;
      q.second = kBetaConcentration * (1.0 - endmembers.array()).matrix();
      break;
    case PriorFamily::gaussian:
      q.first = endmembers;
      q.second = Matrix::Constant(m, n, kInitVariance);
      break;
    case PriorFamily::lognormal:
      q.second = Matrix::Constant(m, n, kInitVariance);
      q.first = endmembers.array().log() - 0.5 * kInitVariance;
      break;
    case PriorFamily::gamma:
      q.first = kGammaRate * endmembers;
      q.second = Matrix::Constant(m, n, kGammaRate);
      break;
  }

  init.model.prior.family = cfg.prior_family;
  if (cfg.prior_family != PriorFamily::uniform) {
    init.model.prior.first = q.first;
    init.model.prior.second = q.second;
  }
  init.model.outlier = cfg.outlier;
  init.model.outlier_rate = cfg.init_outlier_rate;
  const double mean_power = y.array().square().mean();
  init.model.noise_var = std::max(kNoiseFloor, 1e-2 * mean_power);

  init.state.alpha = Matrix::Ones(n, static_cast<Eigen::Index>(cube.pixels()));
  init.state.omega = Vector::Constant(static_cast<Eigen::Index>(cube.pixels()), cfg.init_outlier_rate);
  init.state.patch_posteriors.assign(init.grid.count(), q);
  return init;
}

UnmixResult run(const HsiCube& cube, const EngineConfig& cfg, const ProgressSink& sink) {
  const auto started = std::chrono::steady_clock::now();
  Initialization init = initialize(cube, cfg);
  ModelParameters& model = init.model;
  VariationalState& state = init.state;
  const PatchGrid& grid = init.grid;

  const Matrix& y = cube.values();
  const std::size_t t_count = cube.pixels();
  const std::size_t k_count = grid.count();
  const std::size_t threads = std::max<std::size_t>(1, cfg.threads);
  const bool gaussian = cfg.prior_family == PriorFamily::gaussian;
  const PriorFamily post_family = posterior_family_for(cfg.prior_family);
  const Eigen::Index entries = static_cast<Eigen::Index>(cube.bands() * cfg.n_endmembers);

  Vector log_pout(static_cast<Eigen::Index>(t_count));
  for (std::size_t t = 0; t < t_count; ++t) {
    log_pout[static_cast<Eigen::Index>(t)] =
        log_outlier_density(y.col(static_cast<Eigen::Index>(t)), model.outlier);
  }

  BoxProjection alpha_log_box;
  alpha_log_box.lower = std::log(kAlphaLower);
  alpha_log_box.upper = std::log(kAlphaUpper);
  const BoxProjection posterior_proj = box_for(posterior_box(post_family), entries);
  const Eigen::Array<bool, Eigen::Dynamic, 1> log_coords = (posterior_proj.lower_each.array() > 0.0);
  BoxProjection log_proj = posterior_proj;
  log_proj.lower_each = to_log(posterior_proj.lower_each, log_coords);
  log_proj.upper_each = to_log(posterior_proj.upper_each, log_coords);
  log_proj.lower = log_proj.lower_each.minCoeff();
  log_proj.upper = log_proj.upper_each.maxCoeff();
  BoxProjection gaussian_mean_proj;
  gaussian_mean_proj.lower = posterior_box(PriorFamily::gaussian).first_lower;
  gaussian_mean_proj.upper = posterior_box(PriorFamily::gaussian).first_upper;

  std::vector<double> alpha_steps(t_count, 0.0);
  std::vector<double> patch_steps(k_count, 0.0);

  UnmixResult result;
  std::vector<PatchMoments> moments(k_count);
  std::vector<Matrix> previous_means(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    previous_means[k] = posterior_mean(state.patch_posteriors[k]);
  }

  for (std::size_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    // abundance posteriors
    for (std::size_t k = 0; k < k_count; ++k) moments[k] = PatchMoments::of(state.patch_posteriors[k]);
    parallel_for(t_count, threads, [&](std::size_t t) {
      const auto ti = static_cast<Eigen::Index>(t);
      const PatchMoments& pm = moments[grid.assignment[t]];
      AlphaObjective obj{pm.mean.transpose() * y.col(ti), &pm.correlation, model.noise_var};
      // searched in log alpha: the curvature in alpha falls like 1/alpha^2,
      // so plain steps crawl once the posterior concentrates
      Objective in_log = [&obj](const Vector& z, Vector* grad) {
        const Vector a = z.array().exp().matrix();
        const double v = obj(a, grad);
        if (grad != nullptr) *grad = grad->cwiseProduct(a);
        return v;
      };
      ApgConfig apg = cfg.apg;
      apg.mode = StepMode::backtracking;
      apg.init_step = next_init_step(cfg.apg, alpha_steps[t]);
      const ApgResult res =
          maximize(in_log, state.alpha.col(ti).array().log().matrix(), alpha_log_box, apg);
      Vector alpha = res.x.array().exp().matrix().cwiseMax(kAlphaLower).cwiseMin(kAlphaUpper);
      alpha_steps[t] = res.last_step;
      // then the total along the fixed proportions, exactly (same stiffness
      // mismatch as the beta concentration)
      const double total = alpha.sum();
      const Vector p = alpha / total;
      auto along = [&](double a0) {
        Vector g;
        obj(a0 * p, &g);
        return g.dot(p);
      };
      const double best =
          bisect_log_stationary(along, kAlphaLower / p.minCoeff(), kAlphaUpper / p.maxCoeff());
      if (obj(best * p, nullptr) > obj(alpha, nullptr)) alpha = best * p;
      state.alpha.col(ti) = alpha;
    });

    // patch endmember posteriors
    parallel_for(k_count, threads, [&](std::size_t k) {
      const auto& idx = grid.members[k];
      const PatchSuffStats stats = patch_suff_stats(gather_columns(y, idx),
                                                    gather_columns(state.alpha, idx),
                                                    gather(state.omega, idx));
      PosteriorParams& q = state.patch_posteriors[k];
      if (gaussian) {
        PosteriorParams work = q;
        Objective obj = [&](const Vector& x, Vector* grad) {
          work.first = Eigen::Map<const Matrix>(x.data(), q.rows(), q.cols());
          if (grad == nullptr) return patch_posterior_objective(stats, model.noise_var, work, model.prior);
          PosteriorGradient g;
          const double v = patch_posterior_objective(stats, model.noise_var, work, model.prior, g);
          *grad = Eigen::Map<const Vector>(g.first.data(), g.first.size());
          return v;
        };
        const double lipschitz = spectral_norm_symmetric(stats.r_s) / model.noise_var +
                                  model.prior.second.cwiseInverse().norm();
        ApgConfig apg = cfg.apg;
        apg.mode = StepMode::fixed_lipschitz;
        const ApgResult res =
            maximize(obj, Eigen::Map<const Vector>(q.first.data(), q.first.size()),
                     gaussian_mean_proj, apg, lipschitz);
        q.first = Eigen::Map<const Matrix>(res.x.data(), q.rows(), q.cols());
        q.second = update_gaussian_sigma(model.prior.second, stats.r_s, model.noise_var)
                       .cwiseMax(posterior_box(PriorFamily::gaussian).second_lower);
      } else {
        // positive parameters move on the log scale
        PosteriorParams work = q;
        Objective obj = [&](const Vector& z, Vector* grad) {
          const Vector x = from_log(z, log_coords);
          unflatten(x, work.first, work.second);
          if (grad == nullptr) return patch_posterior_objective(stats, model.noise_var, work, model.prior);
          PosteriorGradient g;
          const double v = patch_posterior_objective(stats, model.noise_var, work, model.prior, g);
          *grad = flatten(g.first, g.second);
          *grad = log_coords.select(grad->cwiseProduct(x), *grad);
          return v;
        };
        ApgConfig apg = cfg.apg;
        apg.mode = StepMode::backtracking;
        apg.init_step = next_init_step(cfg.apg, patch_steps[k]);
        const ApgResult res = maximize(obj, to_log(flatten(q.first, q.second), log_coords), log_proj, apg);
        unflatten(from_log(res.x, log_coords), q.first, q.second);
        patch_steps[k] = res.last_step;
        if (post_family == PriorFamily::beta) {
          refine_beta_concentration(q, model.prior, stats.r_s, model.noise_var, posterior_box(post_family));
        }
      }
    });

    // outlier responsibilities with the freshest alpha and patch posteriors
    for (std::size_t k = 0; k < k_count; ++k) moments[k] = PatchMoments::of(state.patch_posteriors[k]);
    parallel_for(t_count, threads, [&](std::size_t t) {
      const auto ti = static_cast<Eigen::Index>(t);
      const double l = pixel_elbo(y.col(ti), model.noise_var, moments[grid.assignment[t]],
                                  state.alpha.col(ti));
      state.omega[ti] = update_omega(log_pout[ti], model.outlier_rate, l);
    });

    // prior parameters
    switch (cfg.prior_family) {
      case PriorFamily::gaussian:
      case PriorFamily::lognormal: {
        std::vector<Matrix> means;
        std::vector<Matrix> vars;
        for (const auto& q : state.patch_posteriors) {
          means.push_back(q.first);
          vars.push_back(q.second);
        }
        auto [mean, spread] = update_gaussian_prior(means, vars);
        model.prior.first = std::move(mean);
        model.prior.second = std::move(spread);
        break;
      }
      case PriorFamily::beta:
      case PriorFamily::gamma:
        model.prior = update_shape_prior(state.patch_posteriors, model.prior, cfg.apg);
        break;
      case PriorFamily::uniform:
        break;
    }

    // noise variance
    std::vector<ResidualSums> residuals(k_count);
    parallel_for(k_count, threads, [&](std::size_t k) {
      const auto& idx = grid.members[k];
      residuals[k] = patch_residual_sums(gather_columns(y, idx), state.patch_posteriors[k],
                                         gather_columns(state.alpha, idx), gather(state.omega, idx));
    });
    if (const auto s2 = update_noise_var(residuals, cube.bands())) {
      model.noise_var = *s2;
    } else {
      result.noise_var_frozen = true;
    }

    // outlier rate
    // no clamp: gamma = 1 only when every omega is 1, which the omega update
    // then keeps, so the bound stays finite (likewise for 0)
    model.outlier_rate = update_gamma(state.omega);

    const double elbo = total_elbo(cube, grid, model, state);
    if (!std::isfinite(elbo)) {
      throw NumericalError("engine: non-finite ELBO at sweep " + std::to_string(sweep));
    }
    result.elbo_trace.push_back(elbo);
    result.iterations = sweep;
    if (sink) {
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      sink(ProgressRecord{sweep, elbo, model.noise_var, model.outlier_rate, seconds});
    }

    double max_change = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      Matrix mean = posterior_mean(state.patch_posteriors[k]);
      const double change = (mean - previous_means[k]).norm() / (previous_means[k].norm() + 1e-12);
      max_change = std::max(max_change, change);
      previous_means[k] = std::move(mean);
    }
    if (max_change < cfg.rel_tol_mean_A) {
      result.converged = true;
      break;
    }
  }

  result.endmembers.reserve(k_count);
  for (const auto& q : state.patch_posteriors) result.endmembers.push_back(posterior_mean(q));
  result.abundances = state.alpha.array().rowwise() / state.alpha.colwise().sum().array();
  result.outlier_scores = state.omega;
  result.model = model;
  result.state = state;
  result.grid = grid;
  return result;
}

}  // namespace helen

#include "helen/priors.hpp"

#include <cmath>
#include <string>

#include "helen/errors.hpp"
#include "helen/special_functions.hpp"

namespace helen {

namespace {

template <typename F>
Matrix map2(const Matrix& a, const Matrix& b, F&& f) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out(i, j) = f(a(i, j), b(i, j));
    }
  }
  return out;
}

void check_shapes(const Matrix& first, const Matrix& second, const char* what) {
  if (first.rows() != second.rows() || first.cols() != second.cols()) {
    throw InvalidArgument(std::string(what) + ": parameter matrices differ in shape");
  }
  if (!first.allFinite() || !second.allFinite()) {
    throw InvalidArgument(std::string(what) + ": parameters contain NaN/Inf");
  }
}

void check_positive(const Matrix& m, const char* what) {
  if (m.size() > 0 && !(m.array() > 0.0).all()) {
    throw InvalidArgument(std::string(what) + ": parameters must be strictly positive");
  }
}

void check_pairing(const PosteriorParams& q, const PriorParams& p) {
  if (posterior_family_for(p.family) != q.family) {
    throw InvalidArgument("kl: posterior family '" + std::string(to_string(q.family)) +
                          "' does not pair with prior family '" + std::string(to_string(p.family)) +
                          "'");
  }
  if (p.family != PriorFamily::uniform && (p.rows() != q.rows() || p.cols() != q.cols())) {
    throw InvalidArgument("kl: prior and posterior shapes differ");
  }
}

// Per-entry KL(Beta(u, v) || Beta(c, d)).
double beta_kl(double u, double v, double c, double d) {
  const double s = u + v;
  return log_beta(c, d) - log_beta(u, v) + (u - c) * digamma(u) + (v - d) * digamma(v) +
         (c + d - s) * digamma(s);
}

// Per-entry KL(N(u, sig) || N(a, q)), variances as parameters.
double gaussian_kl(double u, double sig, double a, double q) {
  const double diff = u - a;
  return 0.5 * ((diff * diff + sig) / q + std::log(q / sig) - 1.0);
}

// Per-entry KL(Gamma(u, v) || Gamma(c, d)), shape/rate parameterization.
double gamma_kl(double u, double v, double c, double d) {
  return (u - c) * digamma(u) - log_gamma(u) + log_gamma(c) + c * (std::log(v) - std::log(d)) +
         u * (d - v) / v;
}

}  // namespace

std::string_view to_string(PriorFamily family) {
  switch (family) {
    case PriorFamily::beta:
      return "beta";
    case PriorFamily::gaussian:
      return "gaussian";
    case PriorFamily::lognormal:
      return "lognormal";
    case PriorFamily::gamma:
      return "gamma";
    case PriorFamily::uniform:
      return "uniform";
  }
  return "unknown";
}

PriorFamily parse_prior_family(std::string_view name) {
  if (name == "beta") return PriorFamily::beta;
  if (name == "gaussian" || name == "gauss") return PriorFamily::gaussian;
  if (name == "lognormal") return PriorFamily::lognormal;
  if (name == "gamma") return PriorFamily::gamma;
  if (name == "uniform") return PriorFamily::uniform;
  throw InvalidArgument("unknown prior family '" + std::string(name) + "'");
}

PriorFamily posterior_family_for(PriorFamily prior) {
  return prior == PriorFamily::uniform ? PriorFamily::beta : prior;
}

bool is_location_scale(PriorFamily family) {
  return family == PriorFamily::gaussian || family == PriorFamily::lognormal;
}

ParamBox posterior_box(PriorFamily family) {
  switch (family) {
    case PriorFamily::gaussian:
      return {1e-6, 1e6, 1e-10, 1e6};
    case PriorFamily::lognormal:
      // log-mean is signed; log-variance capped to keep exp(2U + S) finite
      return {-30.0, 30.0, 1e-10, 50.0};
    case PriorFamily::beta:
    case PriorFamily::gamma:
    case PriorFamily::uniform:
      break;
  }
  return {1e-6, 1e6, 1e-6, 1e6};
}

ParamBox prior_box(PriorFamily family) { return posterior_box(posterior_family_for(family)); }

void validate(const PriorParams& p) {
  if (p.family == PriorFamily::uniform) return;
  check_shapes(p.first, p.second, "prior");
  check_positive(p.second, "prior");
  if (!is_location_scale(p.family)) check_positive(p.first, "prior");
}

void validate(const PosteriorParams& q) {
  if (q.family == PriorFamily::uniform) {
    throw InvalidArgument("posterior: the uniform prior pairs with a beta posterior");
  }
  check_shapes(q.first, q.second, "posterior");
  check_positive(q.second, "posterior");
  if (!is_location_scale(q.family)) check_positive(q.first, "posterior");
}

Matrix posterior_mean(const PosteriorParams& q) {
  switch (q.family) {
    case PriorFamily::beta:
    case PriorFamily::uniform:
      return map2(q.first, q.second, [](double u, double v) { return u / (u + v); });
    case PriorFamily::gaussian:
      return q.first;
    case PriorFamily::lognormal:
      return map2(q.first, q.second, [](double u, double s) { return std::exp(u + 0.5 * s); });
    case PriorFamily::gamma:
      return map2(q.first, q.second, [](double u, double v) { return u / v; });
  }
  return {};
}

Matrix posterior_variance(const PosteriorParams& q) {
  switch (q.family) {
    case PriorFamily::beta:
    case PriorFamily::uniform:
      return map2(q.first, q.second, [](double u, double v) {
        const double s = u + v;
        return (u / s) * (v / (s * (s + 1.0)));
      });
    case PriorFamily::gaussian:
      return q.second;
    case PriorFamily::lognormal:
      return map2(q.first, q.second, [](double u, double s) {
        return std::expm1(s) * std::exp(2.0 * u + s);
      });
    case PriorFamily::gamma:
      return map2(q.first, q.second, [](double u, double v) { return u / (v * v); });
  }
  return {};
}

Matrix posterior_correlation(const PosteriorParams& q) {
  const Matrix mean = posterior_mean(q);
  Matrix corr = mean.transpose() * mean;
  corr.diagonal() += posterior_variance(q).colwise().sum().transpose();
  return corr;
}

MomentJacobian moment_jacobian(const PosteriorParams& q) {
  const Eigen::Index m = q.rows();
  const Eigen::Index n = q.cols();
  MomentJacobian jac{Matrix(m, n), Matrix(m, n), Matrix(m, n), Matrix(m, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double a = q.first(i, j);
      const double b = q.second(i, j);
      switch (q.family) {
        case PriorFamily::beta:
        case PriorFamily::uniform: {
          const double s = a + b;
          const double var = (a / s) * (b / (s * (s + 1.0)));
          const double common = 2.0 / s + 1.0 / (s + 1.0);
          jac.mean_d_first(i, j) = b / (s * s);
          jac.mean_d_second(i, j) = -a / (s * s);
          jac.var_d_first(i, j) = var * (1.0 / a - common);
          jac.var_d_second(i, j) = var * (1.0 / b - common);
          break;
        }
        case PriorFamily::gaussian:
          jac.mean_d_first(i, j) = 1.0;
          jac.mean_d_second(i, j) = 0.0;
          jac.var_d_first(i, j) = 0.0;
          jac.var_d_second(i, j) = 1.0;
          break;
        case PriorFamily::lognormal: {
          const double mean = std::exp(a + 0.5 * b);
          const double second_moment = std::exp(2.0 * a + 2.0 * b);
          const double var = std::expm1(b) * std::exp(2.0 * a + b);
          jac.mean_d_first(i, j) = mean;
          jac.mean_d_second(i, j) = 0.5 * mean;
          jac.var_d_first(i, j) = 2.0 * var;
          jac.var_d_second(i, j) = second_moment + var;
          break;
        }
        case PriorFamily::gamma:
          jac.mean_d_first(i, j) = 1.0 / b;
          jac.mean_d_second(i, j) = -a / (b * b);
          jac.var_d_first(i, j) = 1.0 / (b * b);
          jac.var_d_second(i, j) = -2.0 * a / (b * b * b);
          break;
      }
    }
  }
  return jac;
}

double kl_to_prior(const PosteriorParams& q, const PriorParams& p) {
  check_pairing(q, p);
  double total = 0.0;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const double u = q.first(i, j);
      const double v = q.second(i, j);
      switch (p.family) {
        case PriorFamily::beta:
          total += beta_kl(u, v, p.first(i, j), p.second(i, j));
          break;
        case PriorFamily::uniform:
          total += beta_kl(u, v, 1.0, 1.0);
          break;
        case PriorFamily::gaussian:
        case PriorFamily::lognormal:
          total += gaussian_kl(u, v, p.first(i, j), p.second(i, j));
          break;
        case PriorFamily::gamma:
          total += gamma_kl(u, v, p.first(i, j), p.second(i, j));
          break;
      }
    }
  }
  return total;
}

KlGradients kl_gradients(const PosteriorParams& q, const PriorParams& p) {
  check_pairing(q, p);
  const Eigen::Index m = q.rows();
  const Eigen::Index n = q.cols();
  const bool has_prior_params = p.family != PriorFamily::uniform;
  KlGradients g{Matrix(m, n), Matrix(m, n), Matrix(has_prior_params ? m : 0, has_prior_params ? n : 0),
                Matrix(has_prior_params ? m : 0, has_prior_params ? n : 0)};
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double u = q.first(i, j);
      const double v = q.second(i, j);
      switch (p.family) {
        case PriorFamily::beta:
        case PriorFamily::uniform: {
          const double c = has_prior_params ? p.first(i, j) : 1.0;
          const double d = has_prior_params ? p.second(i, j) : 1.0;
          const double s = u + v;
          const double tri_s = trigamma(s);
          g.q_first(i, j) = (u - c) * trigamma(u) + (c + d - s) * tri_s;
          g.q_second(i, j) = (v - d) * trigamma(v) + (c + d - s) * tri_s;
          if (has_prior_params) {
            const double psi_cd = digamma(c + d);
            const double psi_s = digamma(s);
            g.p_first(i, j) = digamma(c) - psi_cd - digamma(u) + psi_s;
            g.p_second(i, j) = digamma(d) - psi_cd - digamma(v) + psi_s;
          }
          break;
        }
        case PriorFamily::gaussian:
        case PriorFamily::lognormal: {
          const double a = p.first(i, j);
          const double qv = p.second(i, j);
          const double diff = u - a;
          g.q_first(i, j) = diff / qv;
          g.q_second(i, j) = 0.5 * (1.0 / qv - 1.0 / v);
          g.p_first(i, j) = -diff / qv;
          g.p_second(i, j) = 0.5 * (1.0 / qv - (diff * diff + v) / (qv * qv));
          break;
        }
        case PriorFamily::gamma: {
          const double c = p.first(i, j);
          const double d = p.second(i, j);
          g.q_first(i, j) = (u - c) * trigamma(u) + d / v - 1.0;
          g.q_second(i, j) = c / v - u * d / (v * v);
          g.p_first(i, j) = digamma(c) - digamma(u) + std::log(v) - std::log(d);
          g.p_second(i, j) = u / v - c / d;
          break;
        }
      }
    }
  }
  return g;
}

}  // namespace helen

#include "helen/apg.hpp"

#include <cmath>

namespace helen {

namespace {

constexpr int kMaxShrinks = 60;

bool finite_point(double value, const Eigen::VectorXd& grad) {
  return std::isfinite(value) && grad.allFinite();
}

}  // namespace

void BoxProjection::apply(Eigen::VectorXd& x) const {
  if (lower_each.size() == x.size() && upper_each.size() == x.size()) {
    x = x.cwiseMax(lower_each).cwiseMin(upper_each);
  } else {
    x = x.cwiseMax(lower).cwiseMin(upper);
  }
}

bool BoxProjection::contains(const Eigen::VectorXd& x) const {
  if (lower_each.size() == x.size() && upper_each.size() == x.size()) {
    return (x.array() >= lower_each.array()).all() && (x.array() <= upper_each.array()).all();
  }
  return (x.array() >= lower).all() && (x.array() <= upper).all();
}

void validate(const ApgConfig& cfg) {
  if (cfg.max_iters < 1) throw InvalidArgument("apg: max_iters must be at least 1");
  if (!(cfg.backtrack_shrink > 0.0 && cfg.backtrack_shrink < 1.0)) {
    throw InvalidArgument("apg: backtrack_shrink must lie in (0, 1)");
  }
  if (!(cfg.init_step > 0.0)) throw InvalidArgument("apg: init_step must be positive");
  if (!(cfg.grad_tol >= 0.0)) throw InvalidArgument("apg: grad_tol must be non-negative");
}

ApgResult maximize(const Objective& objective, Eigen::VectorXd start, const BoxProjection& proj,
                   const ApgConfig& cfg, std::optional<double> lipschitz) {
  validate(cfg);
  const bool fixed = cfg.mode == StepMode::fixed_lipschitz;
  if (fixed && (!lipschitz || !(*lipschitz > 0.0) || !std::isfinite(*lipschitz))) {
    throw InvalidArgument("apg: fixed-lipschitz mode needs a positive Lipschitz constant");
  }

  Eigen::VectorXd x = std::move(start);
  proj.apply(x);
  Eigen::VectorXd grad_x;
  double f_x = objective(x, &grad_x);
  if (!finite_point(f_x, grad_x)) {
    throw ApgError("apg: objective or gradient not finite at the start point", x);
  }
  bool grad_x_valid = true;

  Eigen::VectorXd x_prev = x;
  double step = fixed ? 1.0 / *lipschitz : cfg.init_step;
  int since_restart = 0;
  int iters = 0;

  for (; iters < cfg.max_iters; ++iters) {
    const int j = since_restart + 1;
    const double momentum = static_cast<double>(j - 1) / static_cast<double>(j + 2);

    Eigen::VectorXd y;
    Eigen::VectorXd grad_y;
    double f_y = 0.0;
    bool extrapolated = false;
    if (momentum > 0.0 && x != x_prev) {
      y = x + momentum * (x - x_prev);
      proj.apply(y);
      f_y = objective(y, &grad_y);
      extrapolated = finite_point(f_y, grad_y);
    }
    if (!extrapolated) {
      if (!grad_x_valid) {
        f_x = objective(x, &grad_x);
        if (!finite_point(f_x, grad_x)) {
          throw ApgError("apg: objective or gradient not finite at an accepted iterate", x);
        }
        grad_x_valid = true;
      }
      y = x;
      f_y = f_x;
      grad_y = grad_x;
    }

    Eigen::VectorXd z;
    double f_z = 0.0;
    bool accepted = false;
    for (int shrink = 0; shrink <= kMaxShrinks; ++shrink) {
      z = y + step * grad_y;
      proj.apply(z);
      const Eigen::VectorXd d = z - y;
      if (d.norm() <= cfg.grad_tol * step) break;
      f_z = objective(z, nullptr);
      if (fixed) {
        accepted = std::isfinite(f_z);
        break;
      }
      if (std::isfinite(f_z) && f_z >= f_y + grad_y.dot(d) - d.squaredNorm() / (2.0 * step)) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack_shrink;
    }

    if (accepted && f_z >= f_x) {
      x_prev = x;
      x = std::move(z);
      f_x = f_z;
      grad_x_valid = false;
      ++since_restart;
      continue;
    }
    if (!extrapolated) {
      // No ascent from the current iterate itself: (near-)stationary.
      ++iters;
      break;
    }
    since_restart = 0;
    x_prev = x;
  }

  ApgResult result;
  result.x = std::move(x);
  result.value = f_x;
  result.iterations = iters;
  result.last_step = step;
  return result;
}

double spectral_norm_symmetric(const Eigen::MatrixXd& a, int max_steps, double tol) {
  if (a.rows() == 0) return 0.0;
  Eigen::VectorXd v =
      Eigen::VectorXd::LinSpaced(a.rows(), 1.0, 2.0).normalized();
  double estimate = 0.0;
  for (int i = 0; i < max_steps; ++i) {
    Eigen::VectorXd w = a * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(norm - estimate) <= tol * norm) {
      estimate = norm;
      break;
    }
    estimate = norm;
  }
  return estimate;
}

}  // namespace helen

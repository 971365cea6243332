#include "helen/special_functions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "helen/errors.hpp"

namespace helen {

namespace {

constexpr double kShift = 6.0;
// the trigamma series is truncated one term earlier relative to its size
constexpr double kTrigammaShift = 12.0;
constexpr double kStirlingShift = 10.0;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(fn) + ": argument must be a positive finite number, got " +
                      std::to_string(x));
  }
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < kShift) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number series: -sum_k B_2k / (2k x^2k)
  const double series =
      inv2 * (-1.0 / 12.0 +
              inv2 * (1.0 / 120.0 +
                      inv2 * (-1.0 / 252.0 +
                              inv2 * (1.0 / 240.0 +
                                      inv2 * (-1.0 / 132.0 +
                                              inv2 * (691.0 / 32760.0 + inv2 * (-1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 * inv + series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < kTrigammaShift) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * inv2 *
      (1.0 / 6.0 +
       inv2 * (-1.0 / 30.0 +
               inv2 * (1.0 / 42.0 +
                       inv2 * (-1.0 / 30.0 +
                               inv2 * (5.0 / 66.0 + inv2 * (-691.0 / 2730.0 + inv2 * (7.0 / 6.0)))))));
  return acc + inv + 0.5 * inv2 + series;
}

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  double shift_log = 0.0;
  if (x < kStirlingShift) {
    double prod = 1.0;
    while (x < kStirlingShift) {
      prod *= x;
      x += 1.0;
    }
    shift_log = std::log(prod);
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 +
                                             inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  return (x - 0.5) * std::log(x) - x + half_log_2pi + series - shift_log;
}

double log_beta(double a, double b) {
  require_positive(a, "log_beta");
  require_positive(b, "log_beta");
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double log_multivariate_beta(const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  if (alpha.size() < 2) {
    throw InvalidArgument("log_multivariate_beta: need at least two parameters");
  }
  double acc = 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    require_positive(alpha[i], "log_multivariate_beta");
    acc += log_gamma(alpha[i]);
    total += alpha[i];
  }
  return acc - log_gamma(total);
}

}  // namespace helen

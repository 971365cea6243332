#pragma once

#include <Eigen/Dense>

namespace helen {

// Digamma function psi(x) for x > 0. Shifts the argument above 6 by the
// recurrence psi(x) = psi(x + 1) - 1/x, then uses the asymptotic series.
double digamma(double x);

// First derivative of digamma.
double trigamma(double x);

// ln Gamma(x) for x > 0 (shift + Stirling series).
double log_gamma(double x);

// ln B(a, b) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a + b).
double log_beta(double a, double b);

// ln B(alpha) = sum_i ln Gamma(alpha_i) - ln Gamma(sum_i alpha_i); requires length >= 2.
double log_multivariate_beta(const Eigen::Ref<const Eigen::VectorXd>& alpha);

}  // namespace helen

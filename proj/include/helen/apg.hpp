#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "helen/errors.hpp"

namespace helen {

// Box constraint lower <= x <= upper. The per-coordinate vectors, when
// non-empty, override the scalar bounds.
struct BoxProjection {
  double lower = 1e-6;
  double upper = 1e6;
  Eigen::VectorXd lower_each;
  Eigen::VectorXd upper_each;

  void apply(Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x) const;
};

enum class StepMode { backtracking, fixed_lipschitz };

struct ApgConfig {
  int max_iters = 10;
  double backtrack_shrink = 0.5;
  double init_step = 1.0;
  double grad_tol = 1e-9;
  StepMode mode = StepMode::backtracking;
};

void validate(const ApgConfig& cfg);

// Returns f(x); fills *grad with the gradient when grad is non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct ApgResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  double last_step = 0.0;  // last accepted step size
};

// Thrown when the objective or its gradient is not finite at an iterate the
// method has to accept.
class ApgError : public NumericalError {
 public:
  ApgError(const std::string& what, Eigen::VectorXd iterate)
      : NumericalError(what), iterate_(std::move(iterate)) {}
  const Eigen::VectorXd& iterate() const noexcept { return iterate_; }

 private:
  Eigen::VectorXd iterate_;
};

// Accelerated projected gradient ascent with (j-1)/(j+2) extrapolation.
// Every accepted iterate increases the objective; when the extrapolated step
// fails to ascend, momentum is reset and a plain projected step is taken from
// the current iterate. In fixed_lipschitz mode the step is 1/lipschitz.
ApgResult maximize(const Objective& objective, Eigen::VectorXd start, const BoxProjection& proj,
                   const ApgConfig& cfg, std::optional<double> lipschitz = std::nullopt);

// Largest eigenvalue magnitude of a symmetric matrix by power iteration.
double spectral_norm_symmetric(const Eigen::MatrixXd& a, int max_steps = 50, double tol = 1e-10);

}  // namespace helen

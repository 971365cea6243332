#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "helen/priors.hpp"

namespace helen {

// Hyperspectral image of rows x cols pixels with M bands. Stored as an
// M x T matrix (T = rows * cols, pixel index t = r * cols + c) so that each
// pixel spectrum is a contiguous column.
class HsiCube {
 public:
  HsiCube() = default;
  HsiCube(std::size_t rows, std::size_t cols, Matrix values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t bands() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t pixels() const noexcept { return rows_ * cols_; }

  const Matrix& values() const noexcept { return values_; }
  auto pixel(std::size_t t) const { return values_.col(static_cast<Eigen::Index>(t)); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Matrix values_;
};

// Non-overlapping rectangular tiling of the image into patches, enumerated in
// row-major patch order. Trailing partial tiles form their own smaller patches.
struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t patch_rows = 0;
  std::size_t patch_cols = 0;
  std::vector<std::size_t> assignment;            // pixel -> patch
  std::vector<std::vector<std::size_t>> members;  // patch -> ascending pixel indices

  std::size_t count() const noexcept { return members.size(); }
  std::size_t size(std::size_t k) const { return members.at(k).size(); }
  std::vector<std::size_t> sizes() const;
};

PatchGrid partition_image(std::size_t rows, std::size_t cols, std::size_t patch_rows,
                          std::size_t patch_cols);

enum class OutlierKind { iid_gaussian };

// Density of an outlier pixel: iid Gaussian across bands.
struct OutlierDensity {
  OutlierKind kind = OutlierKind::iid_gaussian;
  double mean = 0.0;
  double variance = 9.0;
};

void validate(const OutlierDensity& d);

// sum_m log N(y_m; mean, variance), evaluated in the log domain.
double log_outlier_density(const Eigen::Ref<const Vector>& y, const OutlierDensity& d);

struct ModelParameters {
  PriorParams prior;
  double noise_var = 1e-3;
  double outlier_rate = 0.01;
  OutlierDensity outlier;
};

void validate(const ModelParameters& model);

struct VariationalState {
  Matrix alpha;   // N x T Dirichlet parameters, one column per pixel
  Vector omega;   // T outlier responsibilities
  std::vector<PosteriorParams> patch_posteriors;  // K
};

struct UnmixResult {
  std::vector<Matrix> endmembers;  // K matrices, M x N
  Matrix abundances;               // N x T, columns on the simplex
  Vector outlier_scores;           // T
  std::vector<double> elbo_trace;
  std::size_t iterations = 0;
  ModelParameters model;
  VariationalState state;
  PatchGrid grid;
  bool converged = false;
  bool noise_var_frozen = false;  // set when every pixel was an outlier in some sweep
};

}  // namespace helen

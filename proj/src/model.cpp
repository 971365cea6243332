#include "helen/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "helen/errors.hpp"

namespace helen {

HsiCube::HsiCube(std::size_t rows, std::size_t cols, Matrix values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0 || values_.rows() == 0) {
    throw InvalidArgument("cube: rows, cols and bands must be at least 1");
  }
  if (static_cast<std::size_t>(values_.cols()) != rows_ * cols_) {
    throw InvalidArgument("cube: value matrix has " + std::to_string(values_.cols()) +
                          " pixels, expected " + std::to_string(rows_ * cols_));
  }
  if (!values_.allFinite()) {
    throw InvalidArgument("cube: values contain NaN/Inf");
  }
}

std::vector<std::size_t> PatchGrid::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.size());
  return out;
}

PatchGrid partition_image(std::size_t rows, std::size_t cols, std::size_t patch_rows,
                          std::size_t patch_cols) {
  if (rows == 0 || cols == 0 || patch_rows == 0 || patch_cols == 0) {
    throw InvalidArgument("partition_image: all dimensions must be at least 1");
  }
  if (patch_rows > rows || patch_cols > cols) {
    throw InvalidArgument("partition_image: patch larger than the image");
  }
  PatchGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.patch_rows = patch_rows;
  grid.patch_cols = patch_cols;
  const std::size_t tiles_down = (rows + patch_rows - 1) / patch_rows;
  const std::size_t tiles_across = (cols + patch_cols - 1) / patch_cols;
  grid.members.resize(tiles_down * tiles_across);
  grid.assignment.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t k = (r / patch_rows) * tiles_across + c / patch_cols;
      const std::size_t t = r * cols + c;
      grid.assignment[t] = k;
      grid.members[k].push_back(t);
    }
  }
  return grid;
}

void validate(const OutlierDensity& d) {
  if (!(d.variance > 0.0) || !std::isfinite(d.variance) || !std::isfinite(d.mean)) {
    throw InvalidArgument("outlier density: variance must be positive and parameters finite");
  }
}

double log_outlier_density(const Eigen::Ref<const Vector>& y, const OutlierDensity& d) {
  const double m = static_cast<double>(y.size());
  const double sq = (y.array() - d.mean).square().sum();
  return -0.5 * m * std::log(2.0 * std::numbers::pi * d.variance) - 0.5 * sq / d.variance;
}

void validate(const ModelParameters& model) {
  validate(model.prior);
  validate(model.outlier);
  if (!(model.noise_var > 0.0) || !std::isfinite(model.noise_var)) {
    throw InvalidArgument("model: noise variance must be positive");
  }
  if (!(model.outlier_rate >= 0.0 && model.outlier_rate <= 1.0)) {
    throw InvalidArgument("model: outlier rate must lie in [0, 1]");
  }
}

}  // namespace helen

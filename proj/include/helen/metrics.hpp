#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "helen/model.hpp"

namespace helen {

// perm[n] is the estimated column matched to truth column n.
using Permutation = std::vector<std::size_t>;

struct EvalReport {
  double sam_deg = 0.0;
  double mse_db = 0.0;
  double rmse_s = 0.0;
  double outlier_precision = 0.0;
  double outlier_recall = 0.0;
  double outlier_f1 = 0.0;
  Permutation permutation;
  bool greedy_alignment = false;
};

// Value reported by mse_db for an exact match.
inline constexpr double kMseFloorDb = -300.0;

// Column matching minimizing the mean spectral angle over the listed pixels.
// Exhaustive for N <= 9, greedy otherwise.
Permutation align_permutation(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth);
Permutation align_permutation_greedy(const std::vector<Matrix>& estimated,
                                     const std::vector<Matrix>& truth);

// Mean spectral angle (degrees) between truth column n and estimated column
// perm[n], over all matrices and columns.
double sam(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth,
           const Permutation& perm);

// 10 log10( (1/(N T)) sum_t ||A_t - Ahat_t P||_F^2 ), floored at kMseFloorDb.
double mse_db(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth,
              const Permutation& perm);

// (1/T) sum_t sqrt(||s_t - P shat_t||^2 / N); abundances are N x T.
double rmse_s(const Matrix& estimated, const Matrix& truth, const Permutation& perm);

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Scores of (omega_t > threshold) against the mask. Empty denominators give 0.
DetectionScores outlier_scores(const Vector& omega, const std::vector<bool>& mask,
                               double threshold = 0.5);

// Patch estimates replicated to every pixel of their patch.
std::vector<Matrix> per_pixel_endmembers(const std::vector<Matrix>& patch_estimates,
                                         const PatchGrid& grid);

// Full report. Pixels flagged in the mask (when given) are excluded from
// the endmember and abundance metrics.
EvalReport evaluate(const std::vector<Matrix>& estimated_pixel_endmembers,
                    const std::vector<Matrix>& true_pixel_endmembers, const Matrix& estimated_abundances,
                    const Matrix& true_abundances, const Vector& omega,
                    const std::optional<std::vector<bool>>& outlier_mask, double threshold = 0.5);

}  // namespace helen

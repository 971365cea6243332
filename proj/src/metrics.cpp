#include "helen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "helen/errors.hpp"

namespace helen {

namespace {

constexpr std::size_t kExhaustiveLimit = 9;

void check_lists(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth) {
  if (estimated.size() != truth.size() || truth.empty()) {
    throw InvalidArgument("metrics: estimate and truth lists differ in length or are empty");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (estimated[i].rows() != truth[i].rows() || estimated[i].cols() != truth[i].cols()) {
      throw InvalidArgument("metrics: endmember matrices differ in shape");
    }
  }
}

void check_perm(const Permutation& perm, std::size_t n) {
  if (perm.size() != n) throw InvalidArgument("metrics: permutation has wrong length");
  std::vector<bool> seen(n, false);
  for (const auto p : perm) {
    if (p >= n || seen[p]) throw InvalidArgument("metrics: not a permutation");
    seen[p] = true;
  }
}

double angle_deg(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw DomainError("sam: spectral angle undefined for a zero column");
  }
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

// cost(i, j): mean angle between truth column i and estimated column j
Matrix angle_costs(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth) {
  const Eigen::Index n = truth.front().cols();
  Matrix cost = Matrix::Zero(n, n);
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        cost(i, j) += angle_deg(truth[t].col(i), estimated[t].col(j));
      }
    }
  }
  return cost / static_cast<double>(truth.size());
}

}  // namespace

Permutation align_permutation_greedy(const std::vector<Matrix>& estimated,
                                     const std::vector<Matrix>& truth) {
  check_lists(estimated, truth);
  const Matrix cost = angle_costs(estimated, truth);
  const auto n = static_cast<std::size_t>(cost.rows());
  Permutation perm(n, 0);
  std::vector<bool> row_done(n, false);
  std::vector<bool> col_done(n, false);
  for (std::size_t step = 0; step < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (row_done[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (col_done[j]) continue;
        const double c = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (c < best) {
          best = c;
          bi = i;
          bj = j;
        }
      }
    }
    perm[bi] = bj;
    row_done[bi] = true;
    col_done[bj] = true;
  }
  return perm;
}

Permutation align_permutation(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth) {
  check_lists(estimated, truth);
  const auto n = static_cast<std::size_t>(truth.front().cols());
  if (n > kExhaustiveLimit) return align_permutation_greedy(estimated, truth);
  const Matrix cost = angle_costs(estimated, truth);
  Permutation perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Permutation best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      c += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
    }
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double sam(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth,
           const Permutation& perm) {
  check_lists(estimated, truth);
  const auto n = static_cast<std::size_t>(truth.front().cols());
  check_perm(perm, n);
  double total = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      total += angle_deg(truth[t].col(static_cast<Eigen::Index>(i)),
                         estimated[t].col(static_cast<Eigen::Index>(perm[i])));
    }
  }
  return total / static_cast<double>(n * truth.size());
}

double mse_db(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth,
              const Permutation& perm) {
  check_lists(estimated, truth);
  const auto n = static_cast<std::size_t>(truth.front().cols());
  check_perm(perm, n);
  double total = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      total += (truth[t].col(static_cast<Eigen::Index>(i)) -
                estimated[t].col(static_cast<Eigen::Index>(perm[i])))
                   .squaredNorm();
    }
  }
  const double mse = total / static_cast<double>(n * truth.size());
  if (!(mse > 0.0)) return kMseFloorDb;
  return std::max(kMseFloorDb, 10.0 * std::log10(mse));
}

double rmse_s(const Matrix& estimated, const Matrix& truth, const Permutation& perm) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols() || truth.cols() == 0) {
    throw InvalidArgument("rmse_s: abundance matrices differ in shape");
  }
  const auto n = static_cast<std::size_t>(truth.rows());
  check_perm(perm, n);
  double total = 0.0;
  for (Eigen::Index t = 0; t < truth.cols(); ++t) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = truth(static_cast<Eigen::Index>(i), t) -
                       estimated(static_cast<Eigen::Index>(perm[i]), t);
      sq += d * d;
    }
    total += std::sqrt(sq / static_cast<double>(n));
  }
  return total / static_cast<double>(truth.cols());
}

DetectionScores outlier_scores(const Vector& omega, const std::vector<bool>& mask, double threshold) {
  if (static_cast<std::size_t>(omega.size()) != mask.size()) {
    throw InvalidArgument("outlier_scores: omega and mask lengths differ");
  }
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    const bool flagged = omega[static_cast<Eigen::Index>(t)] > threshold;
    if (flagged && mask[t]) ++tp;
    if (flagged && !mask[t]) ++fp;
    if (!flagged && mask[t]) ++fn;
  }
  DetectionScores s;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::vector<Matrix> per_pixel_endmembers(const std::vector<Matrix>& patch_estimates,
                                         const PatchGrid& grid) {
  if (patch_estimates.size() != grid.count()) {
    throw InvalidArgument("per_pixel_endmembers: one estimate per patch required");
  }
  std::vector<Matrix> out;
  out.reserve(grid.assignment.size());
  for (const auto k : grid.assignment) out.push_back(patch_estimates[k]);
  return out;
}

EvalReport evaluate(const std::vector<Matrix>& estimated_pixel_endmembers,
                    const std::vector<Matrix>& true_pixel_endmembers, const Matrix& estimated_abundances,
                    const Matrix& true_abundances, const Vector& omega,
                    const std::optional<std::vector<bool>>& outlier_mask, double threshold) {
  check_lists(estimated_pixel_endmembers, true_pixel_endmembers);
  const std::size_t t_count = true_pixel_endmembers.size();
  if (static_cast<std::size_t>(true_abundances.cols()) != t_count ||
      estimated_abundances.rows() != true_abundances.rows() ||
      estimated_abundances.cols() != true_abundances.cols() ||
      static_cast<std::size_t>(omega.size()) != t_count ||
      (outlier_mask && outlier_mask->size() != t_count)) {
    throw InvalidArgument("evaluate: inputs disagree on the number of pixels or endmembers");
  }
  if (true_abundances.rows() != true_pixel_endmembers.front().cols()) {
    throw InvalidArgument("evaluate: abundance and endmember counts differ");
  }

  std::vector<Matrix> est;
  std::vector<Matrix> tru;
  std::vector<Eigen::Index> keep;
  for (std::size_t t = 0; t < t_count; ++t) {
    if (outlier_mask && (*outlier_mask)[t]) continue;
    est.push_back(estimated_pixel_endmembers[t]);
    tru.push_back(true_pixel_endmembers[t]);
    keep.push_back(static_cast<Eigen::Index>(t));
  }
  if (keep.empty()) throw InvalidArgument("evaluate: every pixel is masked as an outlier");
  Matrix s_est(true_abundances.rows(), static_cast<Eigen::Index>(keep.size()));
  Matrix s_tru(true_abundances.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    s_est.col(static_cast<Eigen::Index>(j)) = estimated_abundances.col(keep[j]);
    s_tru.col(static_cast<Eigen::Index>(j)) = true_abundances.col(keep[j]);
  }

  EvalReport report;
  const auto n = static_cast<std::size_t>(true_abundances.rows());
  report.greedy_alignment = n > kExhaustiveLimit;
  report.permutation = align_permutation(est, tru);
  report.sam_deg = sam(est, tru, report.permutation);
  report.mse_db = mse_db(est, tru, report.permutation);
  report.rmse_s = rmse_s(s_est, s_tru, report.permutation);
  const DetectionScores det =
      outlier_scores(omega, outlier_mask ? *outlier_mask : std::vector<bool>(t_count, false), threshold);
  report.outlier_precision = det.precision;
  report.outlier_recall = det.recall;
  report.outlier_f1 = det.f1;
  return report;
}

}  // namespace helen

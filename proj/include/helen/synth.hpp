#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "helen/model.hpp"

namespace helen {

struct SynthConfig {
  std::size_t rows = 40;
  std::size_t cols = 40;
  std::size_t bands = 50;
  std::size_t n_endmembers = 3;
  std::size_t patch_rows = 5;
  std::size_t patch_cols = 5;
  double snr_db = 25.0;  // +inf: noiseless
  double max_purity = 0.7;
  std::size_t n_outliers = 0;
  std::pair<double, double> outlier_range{0.0, 2.0};
  std::size_t blur_kernel_size = 11;
  double blur_sigma = 1.0;
  std::pair<double, double> ev_scale_range{0.8, 1.2};
  double ev_perturb_std = 0.01;
  std::uint64_t seed = 0;
  std::optional<Matrix> base_endmembers;  // M x N
};

void validate(const SynthConfig& cfg);

struct SynthGroundTruth {
  HsiCube cube;
  Matrix base_endmembers;                 // M x N reference spectra
  std::vector<Matrix> patch_endmembers;   // K block endmembers before blurring
  std::vector<Matrix> pixel_endmembers;   // T matrices A_t, M x N
  Matrix abundances;                      // N x T
  std::vector<bool> outlier_mask;         // T
  double noise_var = 0.0;
  PatchGrid grid;
};

// Block-wise endmember variability, blurred across block borders, Dirichlet
// abundances with purity rejection, additive Gaussian noise at a target SNR
// and uniformly distributed outlier pixels.
SynthGroundTruth generate(const SynthConfig& cfg);

// Separable Gaussian blur of a rows x cols plane with reflect padding
// (edge pixel not repeated). The kernel is normalized to sum 1.
Matrix gaussian_blur_2d(const Matrix& field, std::size_t kernel_size, double sigma);

// Smooth random spectra: sum of 3-6 Gaussian bumps per column, clipped to
// [0.05, 0.95].
Matrix smooth_random_spectra(std::size_t bands, std::size_t count, std::uint64_t seed);

}  // namespace helen

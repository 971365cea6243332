#include <cmath>
#include <limits>
#include <set>

#include <doctest.h>

#include "helen/errors.hpp"
#include "helen/synth.hpp"

using namespace helen;

namespace {

// direct 2-D convolution with reflect padding (edge not repeated)
Matrix direct_blur(const Matrix& f, int size, double sigma) {
  const int h = size / 2;
  Matrix k(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      k(i, j) = std::exp(-((i - h) * (i - h) + (j - h) * (j - h)) / (2.0 * sigma * sigma));
    }
  }
  k /= k.sum();
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  Matrix out = Matrix::Zero(f.rows(), f.cols());
  for (int r = 0; r < f.rows(); ++r) {
    for (int c = 0; c < f.cols(); ++c) {
      for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
          out(r, c) += k(i, j) * f(reflect(r + i - h, static_cast<int>(f.rows())), reflect(c + j - h, static_cast<int>(f.cols())));
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("gaussian_blur_2d keeps constant fields") {
  const Matrix f = Matrix::Constant(9, 13, 0.37);
  CHECK((gaussian_blur_2d(f, 11, 1.5) - f).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("gaussian_blur_2d of an impulse is a symmetric kernel") {
  Matrix f = Matrix::Zero(21, 21);
  f(10, 10) = 1.0;
  const Matrix g = gaussian_blur_2d(f, 11, 1.0);
  CHECK((g - g.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((g - g.colwise().reverse()).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((g - g.rowwise().reverse()).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(g.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g(10, 11) / g(10, 10) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("gaussian_blur_2d matches direct convolution") {
  for (int seed = 0; seed < 5; ++seed) {
    std::srand(seed);
    const Matrix f = Matrix::Random(20, 20);
    CHECK((gaussian_blur_2d(f, 11, 1.0) - direct_blur(f, 11, 1.0)).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((gaussian_blur_2d(f, 5, 2.3) - direct_blur(f, 5, 2.3)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  std::srand(9);
  const Matrix small = Matrix::Random(4, 7);  // kernel wider than the field
  CHECK((gaussian_blur_2d(small, 11, 1.0) - direct_blur(small, 11, 1.0)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("generate: EV-free noiseless cube is exactly A s") {
  SynthConfig cfg;
  cfg.rows = cfg.cols = 10;
  cfg.bands = 15;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  cfg.ev_scale_range = {1.0, 1.0};
  cfg.ev_perturb_std = 0.0;
  const SynthGroundTruth gt = generate(cfg);
  CHECK(gt.noise_var == 0.0);
  for (std::size_t t = 0; t < gt.cube.pixels(); ++t) {
    CHECK(gt.pixel_endmembers[t] == gt.base_endmembers);
    const auto ti = static_cast<Eigen::Index>(t);
    CHECK((gt.cube.pixel(t) - gt.base_endmembers * gt.abundances.col(ti)).lpNorm<Eigen::Infinity>() < 1e-15);
  }
}

TEST_CASE("generate: empirical SNR is on target") {
  SynthConfig cfg;
  cfg.seed = 4;
  const SynthGroundTruth gt = generate(cfg);
  double signal = 0.0, noise = 0.0;
  for (std::size_t t = 0; t < gt.cube.pixels(); ++t) {
    const Vector clean = gt.pixel_endmembers[t] * gt.abundances.col(static_cast<Eigen::Index>(t));
    signal += clean.squaredNorm();
    noise += (gt.cube.pixel(t) - clean).squaredNorm();
  }
  CHECK(std::abs(10.0 * std::log10(signal / noise) - 25.0) <= 0.2);
}

TEST_CASE("generate: abundances, purity and outliers at desk scale") {
  SynthConfig cfg;
  cfg.rows = cfg.cols = 100;
  cfg.n_endmembers = 5;
  cfg.n_outliers = 100;
  cfg.seed = 1;
  const SynthGroundTruth gt = generate(cfg);
  CHECK(gt.grid.count() == 400);
  CHECK(gt.patch_endmembers.size() == 400);
  CHECK(std::count(gt.outlier_mask.begin(), gt.outlier_mask.end(), true) == 100);
  for (Eigen::Index t = 0; t < gt.abundances.cols(); ++t) {
    CHECK(gt.abundances.col(t).sum() == doctest::Approx(1.0));
    CHECK(gt.abundances.col(t).minCoeff() >= 0.0);
    CHECK(gt.abundances.col(t).maxCoeff() <= 0.7);
  }
  for (std::size_t t = 0; t < gt.cube.pixels(); ++t) {
    if (!gt.outlier_mask[t]) continue;
    CHECK(gt.cube.pixel(t).minCoeff() >= 0.0);
    CHECK(gt.cube.pixel(t).maxCoeff() <= 2.0);
  }
}

TEST_CASE("generate: variability is scaled and blurred per block") {
  SynthConfig cfg;
  cfg.seed = 2;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  const SynthGroundTruth gt = generate(cfg);
  std::set<double> distinct;
  for (const auto& a : gt.pixel_endmembers) distinct.insert(a(0, 0));
  CHECK(distinct.size() > 100);  // blurred field varies pixel to pixel
  // every block matrix stays near the scaled reference
  for (const auto& a : gt.patch_endmembers) {
    for (int n = 0; n < 3; ++n) {
      const double ratio = a.col(n).sum() / gt.base_endmembers.col(n).sum();
      CHECK(ratio > 0.75);
      CHECK(ratio < 1.25);
    }
  }
}

TEST_CASE("generate is deterministic in the seed") {
  SynthConfig cfg;
  cfg.rows = cfg.cols = 15;
  cfg.n_outliers = 3;
  cfg.seed = 77;
  const SynthGroundTruth a = generate(cfg);
  const SynthGroundTruth b = generate(cfg);
  CHECK(a.cube.values() == b.cube.values());
  CHECK(a.outlier_mask == b.outlier_mask);
  cfg.seed = 78;
  CHECK(generate(cfg).cube.values() != a.cube.values());
}

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  cfg.blur_kernel_size = 4;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.n_outliers = 5000;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.snr_db = std::nan("");
  CHECK_THROWS_AS(generate(cfg), ConfigError);
}

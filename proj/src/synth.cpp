#include "helen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "helen/errors.hpp"
#include "helen/random.hpp"

namespace helen {

namespace {

constexpr std::size_t kMaxRejections = 100000;

enum Stream : std::uint64_t {
  kSpectraStream = 1,
  kVariabilityStream = 2,
  kAbundanceStream = 3,
  kNoiseStream = 4,
  kOutlierStream = 5,
};

// Mirror index into [0, n) without repeating the edge sample.
std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(size / 2);
  std::vector<double> k(size);
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (auto& w : k) w /= total;
  return k;
}

Vector smooth_noise(Rng& rng, Eigen::Index length, double std_dev) {
  Vector white(length);
  for (Eigen::Index i = 0; i < length; ++i) white[i] = rng.normal();
  if (std_dev == 0.0) return Vector::Zero(length);
  const double width = std::max(1.0, static_cast<double>(length) / 10.0);
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * width));
  Vector smooth(length);
  for (Eigen::Index i = 0; i < length; ++i) {
    double acc = 0.0;
    double norm = 0.0;
    for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
      const double w = std::exp(-0.5 * static_cast<double>(d * d) / (width * width));
      acc += w * white[reflect(i + d, length)];
      norm += w * w;
    }
    smooth[i] = acc / std::sqrt(norm);
  }
  // per-entry std of the smoothed process is 1 by construction of the normalization
  return std_dev * smooth;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.rows == 0 || cfg.cols == 0 || cfg.bands == 0) {
    throw ConfigError("synth: rows, cols and bands must be at least 1");
  }
  if (cfg.n_endmembers < 2) throw ConfigError("synth: need at least two endmembers");
  if (cfg.patch_rows == 0 || cfg.patch_cols == 0 || cfg.patch_rows > cfg.rows ||
      cfg.patch_cols > cfg.cols) {
    throw ConfigError("synth: patch size must lie within the image");
  }
  if (std::isnan(cfg.snr_db) || cfg.snr_db == -std::numeric_limits<double>::infinity()) {
    throw ConfigError("synth: snr_db must be a number or +inf");
  }
  if (!(cfg.max_purity > 0.0 && cfg.max_purity <= 1.0)) {
    throw ConfigError("synth: max_purity must lie in (0, 1]");
  }
  if (cfg.n_outliers > cfg.rows * cfg.cols) throw ConfigError("synth: more outliers than pixels");
  if (!(cfg.outlier_range.first <= cfg.outlier_range.second)) {
    throw ConfigError("synth: outlier_range must be ordered");
  }
  if (cfg.blur_kernel_size % 2 == 0) throw ConfigError("synth: blur kernel size must be odd");
  if (!(cfg.blur_sigma > 0.0)) throw ConfigError("synth: blur sigma must be positive");
  if (!(cfg.ev_scale_range.first <= cfg.ev_scale_range.second) || cfg.ev_scale_range.first < 0.0) {
    throw ConfigError("synth: ev_scale_range must be ordered and non-negative");
  }
  if (!(cfg.ev_perturb_std >= 0.0)) throw ConfigError("synth: ev_perturb_std must be >= 0");
  if (cfg.base_endmembers &&
      (cfg.base_endmembers->rows() != static_cast<Eigen::Index>(cfg.bands) ||
       cfg.base_endmembers->cols() != static_cast<Eigen::Index>(cfg.n_endmembers))) {
    throw ConfigError("synth: base_endmembers must be bands x n_endmembers");
  }
}

Matrix gaussian_blur_2d(const Matrix& field, std::size_t kernel_size, double sigma) {
  if (kernel_size % 2 == 0) throw InvalidArgument("gaussian_blur_2d: kernel size must be odd");
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_blur_2d: sigma must be positive");
  const std::vector<double> k = gaussian_kernel(kernel_size, sigma);
  const auto radius = static_cast<std::ptrdiff_t>(kernel_size / 2);
  const auto rows = static_cast<std::ptrdiff_t>(field.rows());
  const auto cols = static_cast<std::ptrdiff_t>(field.cols());

  Matrix tmp(field.rows(), field.cols());
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        acc += k[static_cast<std::size_t>(d + radius)] * field(r, reflect(c + d, cols));
      }
      tmp(r, c) = acc;
    }
  }
  Matrix out(field.rows(), field.cols());
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        acc += k[static_cast<std::size_t>(d + radius)] * tmp(reflect(r + d, rows), c);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

Matrix smooth_random_spectra(std::size_t bands, std::size_t count, std::uint64_t seed) {
  Rng rng(seed, kSpectraStream);
  const auto m = static_cast<Eigen::Index>(bands);
  const double span = static_cast<double>(bands);
  Matrix spectra(m, static_cast<Eigen::Index>(count));
  for (Eigen::Index n = 0; n < spectra.cols(); ++n) {
    const double baseline = rng.uniform(0.1, 0.4);
    const auto bumps = 3 + static_cast<int>(rng.below(4));
    std::vector<double> amp(bumps), center(bumps), width(bumps);
    for (int b = 0; b < bumps; ++b) {
      amp[b] = rng.uniform(-0.15, 0.5);
      center[b] = rng.uniform(0.0, span);
      width[b] = rng.uniform(span / 20.0, span / 4.0);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      double v = baseline;
      for (int b = 0; b < bumps; ++b) {
        const double z = (static_cast<double>(i) - center[b]) / width[b];
        v += amp[b] * std::exp(-0.5 * z * z);
      }
      spectra(i, n) = std::clamp(v, 0.05, 0.95);
    }
  }
  return spectra;
}

SynthGroundTruth generate(const SynthConfig& cfg) {
  validate(cfg);
  const auto m = static_cast<Eigen::Index>(cfg.bands);
  const auto n = static_cast<Eigen::Index>(cfg.n_endmembers);
  const std::size_t t_count = cfg.rows * cfg.cols;

  SynthGroundTruth gt;
  gt.base_endmembers =
      cfg.base_endmembers ? *cfg.base_endmembers : smooth_random_spectra(cfg.bands, cfg.n_endmembers, cfg.seed);
  gt.grid = partition_image(cfg.rows, cfg.cols, cfg.patch_rows, cfg.patch_cols);

  // block endmembers: column scaling plus a smooth additive perturbation
  Rng ev_rng(cfg.seed, kVariabilityStream);
  gt.patch_endmembers.reserve(gt.grid.count());
  for (std::size_t k = 0; k < gt.grid.count(); ++k) {
    Matrix a(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double scale = ev_rng.uniform(cfg.ev_scale_range.first, cfg.ev_scale_range.second);
      a.col(j) = scale * gt.base_endmembers.col(j) + smooth_noise(ev_rng, m, cfg.ev_perturb_std);
    }
    gt.patch_endmembers.push_back(a.cwiseMax(0.001).cwiseMin(0.999));
  }

  // per-pixel endmembers: blur of the block-constant field, per band and endmember
  gt.pixel_endmembers.assign(t_count, Matrix(m, n));
  Matrix plane(static_cast<Eigen::Index>(cfg.rows), static_cast<Eigen::Index>(cfg.cols));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      for (std::size_t t = 0; t < t_count; ++t) {
        plane(static_cast<Eigen::Index>(t / cfg.cols), static_cast<Eigen::Index>(t % cfg.cols)) =
            gt.patch_endmembers[gt.grid.assignment[t]](i, j);
      }
      // a constant plane is its own blur; copying keeps EV-free cubes exact
      const bool flat = (plane.array() == plane(0, 0)).all();
      const Matrix blurred = flat ? plane : gaussian_blur_2d(plane, cfg.blur_kernel_size, cfg.blur_sigma);
      for (std::size_t t = 0; t < t_count; ++t) {
        gt.pixel_endmembers[t](i, j) =
            blurred(static_cast<Eigen::Index>(t / cfg.cols), static_cast<Eigen::Index>(t % cfg.cols));
      }
    }
  }

  // abundances: Dir(1) with purity rejection
  Rng s_rng(cfg.seed, kAbundanceStream);
  gt.abundances.resize(n, static_cast<Eigen::Index>(t_count));
  for (std::size_t t = 0; t < t_count; ++t) {
    std::size_t rejected = 0;
    while (true) {
      Vector s(n);
      for (Eigen::Index j = 0; j < n; ++j) s[j] = s_rng.exponential();
      s /= s.sum();
      if (s.maxCoeff() <= cfg.max_purity) {
        gt.abundances.col(static_cast<Eigen::Index>(t)) = s;
        break;
      }
      if (++rejected >= kMaxRejections) {
        throw ConfigError("synth: abundance rejection sampling failed " +
                          std::to_string(kMaxRejections) +
                          " consecutive draws; max_purity too small for the number of endmembers");
      }
    }
  }

  Matrix signal(m, static_cast<Eigen::Index>(t_count));
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    signal.col(ti) = gt.pixel_endmembers[t] * gt.abundances.col(ti);
  }
  const double mean_power = signal.colwise().squaredNorm().mean();
  gt.noise_var = std::isinf(cfg.snr_db)
                     ? 0.0
                     : mean_power / (static_cast<double>(cfg.bands) * std::pow(10.0, cfg.snr_db / 10.0));

  Matrix values = signal;
  if (gt.noise_var > 0.0) {
    Rng noise_rng(cfg.seed, kNoiseStream);
    const double sd = std::sqrt(gt.noise_var);
    for (Eigen::Index t = 0; t < values.cols(); ++t) {
      for (Eigen::Index i = 0; i < m; ++i) values(i, t) += sd * noise_rng.normal();
    }
  }

  gt.outlier_mask.assign(t_count, false);
  if (cfg.n_outliers > 0) {
    Rng o_rng(cfg.seed, kOutlierStream);
    std::vector<std::size_t> order(t_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < cfg.n_outliers; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(o_rng.below(t_count - i));
      std::swap(order[i], order[j]);
      const std::size_t t = order[i];
      gt.outlier_mask[t] = true;
      for (Eigen::Index b = 0; b < m; ++b) {
        values(b, static_cast<Eigen::Index>(t)) =
            o_rng.uniform(cfg.outlier_range.first, cfg.outlier_range.second);
      }
    }
  }

  gt.cube = HsiCube(cfg.rows, cfg.cols, std::move(values));
  return gt;
}

}  // namespace helen

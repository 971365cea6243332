#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "helen/engine.hpp"
#include "helen/metrics.hpp"
#include "helen/model.hpp"
#include "helen/synth.hpp"

namespace helen {

// Binary cube file:
//   "HYPC" | u16 version (=1) | u32 rows | u32 cols | u32 bands | f64 data
// all little-endian, data band-major then pixel-row-major.
inline constexpr std::uint16_t kCubeVersion = 1;
inline constexpr std::size_t kCubeHeaderBytes = 4 + 2 + 3 * 4;

std::string encode_cube(const HsiCube& cube);
HsiCube decode_cube(std::string_view bytes);

void write_cube(const HsiCube& cube, const std::filesystem::path& path);
HsiCube read_cube(const std::filesystem::path& path);

// Run configuration: {"synth": {...}, "engine": {...}}. Either section may be
// absent (defaults apply). Unknown keys raise ConfigError.
struct RunConfig {
  SynthConfig synth;
  EngineConfig engine;
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

// Result as written by `unmix`.
struct StoredResult {
  std::vector<Matrix> endmembers;  // K, M x N
  PatchGrid grid;
  Matrix abundances;  // N x T
  Vector omega;
  PriorParams prior;
  double noise_var = 0.0;
  double outlier_rate = 0.0;
  std::vector<double> elbo_trace;
  std::size_t iterations = 0;
  bool converged = false;
};

std::string result_to_json(const UnmixResult& result);
StoredResult parse_result(std::string_view text);

// Ground truth as written by `synth`.
struct StoredTruth {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Matrix abundances;  // N x T
  std::vector<bool> outlier_mask;
  double noise_var = 0.0;
  std::vector<Matrix> pixel_endmembers;  // T, M x N
  std::vector<Matrix> patch_endmembers;  // K, M x N
  PatchGrid grid;
};

std::string truth_to_json(const SynthGroundTruth& truth);
StoredTruth parse_truth(std::string_view text);

std::string eval_report_to_json(const EvalReport& report);

// header `band,em1,...,emN`, one row per band
std::string endmembers_csv(const Matrix& endmembers);

// header `sweep,elbo,sigma2,gamma,seconds`
std::string elbo_csv(const std::vector<ProgressRecord>& records);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace helen

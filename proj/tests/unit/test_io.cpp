#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "helen/engine.hpp"
#include "helen/errors.hpp"
#include "helen/io.hpp"
#include "helen/random.hpp"

using namespace helen;

namespace {

HsiCube random_cube(std::size_t r, std::size_t c, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  Matrix v(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(r * c));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return HsiCube(r, c, v);
}

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("helen_io_" + name);
}

}  // namespace

TEST_CASE("cube roundtrip is bitwise") {
  const HsiCube cube = random_cube(4, 4, 3, 1);
  const auto path = temp("rt.cube");
  write_cube(cube, path);
  const HsiCube back = read_cube(path);
  CHECK(back.rows() == 4);
  CHECK(back.cols() == 4);
  CHECK(back.bands() == 3);
  CHECK(std::memcmp(back.values().data(), cube.values().data(), sizeof(double) * 48) == 0);
  CHECK(std::filesystem::file_size(path) == kCubeHeaderBytes + 48 * 8);
  std::filesystem::remove(path);
}

TEST_CASE("cube layout is band-major, little-endian") {
  Matrix v(2, 3);  // 2 bands, 1x3 image
  v << 1, 2, 3, 4, 5, 6;
  const std::string bytes = encode_cube(HsiCube(1, 3, v));
  CHECK(bytes.substr(0, 4) == "HYPC");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[5]) == 0);
  double first_band_last_pixel = 0.0;
  std::memcpy(&first_band_last_pixel, bytes.data() + kCubeHeaderBytes + 2 * 8, 8);
  CHECK(first_band_last_pixel == 3.0);
  double second_band_first = 0.0;
  std::memcpy(&second_band_first, bytes.data() + kCubeHeaderBytes + 3 * 8, 8);
  CHECK(second_band_first == 4.0);
}

TEST_CASE("corrupt cubes") {
  std::string bytes = encode_cube(random_cube(3, 3, 2, 2));
  std::string bad = bytes;
  bad[0] = 'X';
  try {
    decode_cube(bad);
    FAIL("no error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
  bad = bytes;
  bad[4] = 7;
  CHECK_THROWS_AS(decode_cube(bad), FormatError);
  CHECK_THROWS_AS(decode_cube(bytes.substr(0, bytes.size() - 1)), FormatError);
  CHECK_THROWS_AS(decode_cube(bytes + "x"), FormatError);
  CHECK_THROWS_AS(decode_cube(bytes.substr(0, 10)), FormatError);

  // header declaring a huge cube with a short payload
  std::string big = bytes.substr(0, kCubeHeaderBytes);
  const std::uint32_t huge = 0xFFFFFFFFu;
  for (int i = 0; i < 3; ++i) std::memcpy(big.data() + 6 + 4 * i, &huge, 4);
  big += std::string(64, '\0');
  try {
    decode_cube(big);
    FAIL("no error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
  CHECK_THROWS_AS(read_cube(temp("does_not_exist.cube")), Error);
}

TEST_CASE("run config parsing") {
  const RunConfig cfg = parse_run_config(R"({
    "synth": {"rows": 12, "cols": 8, "snr_db": "inf", "outlier_range": [0, 3]},
    "engine": {"prior_family": "gaussian", "n_endmembers": 4, "max_sweeps": 9,
               "apg": {"mode": "fixed-lipschitz", "max_iters": 4},
               "outlier": {"kind": "iid-gaussian", "mean": 0.5, "variance": 2},
               "init": {"mode": "random-simplex"}}
  })");
  CHECK(cfg.synth.rows == 12);
  CHECK(std::isinf(cfg.synth.snr_db));
  CHECK(cfg.synth.outlier_range.second == 3.0);
  CHECK(cfg.engine.prior_family == PriorFamily::gaussian);
  CHECK(cfg.engine.n_endmembers == 4);
  CHECK(cfg.engine.apg.mode == StepMode::fixed_lipschitz);
  CHECK(cfg.engine.apg.max_iters == 4);
  CHECK(cfg.engine.outlier.variance == 2.0);
  CHECK(cfg.engine.init.mode == InitMode::random_simplex);

  // serialization round trip
  const RunConfig again = parse_run_config(run_config_to_json(cfg));
  CHECK(run_config_to_json(again) == run_config_to_json(cfg));

  CHECK(parse_run_config("{}").engine.max_sweeps == 300);
}

TEST_CASE("run config rejects unknown or malformed input") {
  CHECK_THROWS_AS(parse_run_config(R"({"engine": {"max_sweep": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"extra": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"engine": {"prior_family": "cauchy"}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"engine": {"n_endmembers": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"engine": {"n_endmembers": "three"}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"engine": {"init": {"mode": "user-endmembers"}}})"), ConfigError);
}

TEST_CASE("result json round trip and determinism") {
  SynthConfig sc;
  sc.rows = sc.cols = 6;
  sc.bands = 8;
  sc.seed = 3;
  const SynthGroundTruth gt = generate(sc);
  EngineConfig cfg;
  cfg.patch_rows = cfg.patch_cols = 3;
  cfg.max_sweeps = 5;
  const UnmixResult r = run(gt.cube, cfg);
  const std::string json = result_to_json(r);
  CHECK(json == result_to_json(run(gt.cube, cfg)));
  const StoredResult s = parse_result(json);
  CHECK(s.endmembers.size() == 4);
  CHECK(s.endmembers[2] == r.endmembers[2]);
  CHECK(s.abundances == r.abundances);
  CHECK(s.omega == r.state.omega);
  CHECK(s.noise_var == r.model.noise_var);
  CHECK(s.elbo_trace == r.elbo_trace);
  CHECK(s.grid.assignment == r.grid.assignment);
  CHECK(s.prior.first == r.model.prior.first);

  const StoredTruth t = parse_truth(truth_to_json(gt));
  CHECK(t.abundances == gt.abundances);
  CHECK(t.pixel_endmembers[5] == gt.pixel_endmembers[5]);
  CHECK(t.noise_var == gt.noise_var);
  CHECK_THROWS_AS(parse_result("{}"), FormatError);
  CHECK_THROWS_AS(parse_truth("[1,2]"), FormatError);
}

TEST_CASE("csv outputs") {
  Matrix a(2, 2);
  a << 0.1, 0.2, 0.3, 1.0 / 3.0;
  const std::string csv = endmembers_csv(a);
  CHECK(csv.rfind("band,em1,em2\n", 0) == 0);
  CHECK(csv.find("0.33333333333333331") != std::string::npos);
  std::vector<ProgressRecord> recs{{1, -3.5, 0.01, 0.02, 0.5}};
  CHECK(elbo_csv(recs).rfind("sweep,elbo,sigma2,gamma,seconds\n1,", 0) == 0);
}

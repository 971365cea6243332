// helen: synth / unmix / eval / selftest

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "helen/engine.hpp"
#include "helen/errors.hpp"
#include "helen/io.hpp"
#include "helen/metrics.hpp"
#include "helen/synth.hpp"
#include "oracles.hpp"

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumerical = 4 };

std::optional<std::size_t> env_threads() {
  const char* v = std::getenv("HELEN_THREADS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    const long n = std::stol(v);
    if (n < 1) throw std::invalid_argument("");
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw helen::ConfigError("HELEN_THREADS must be a positive integer");
  }
}

int cmd_synth(const std::string& config, const std::string& prefix) {
  const helen::RunConfig cfg = helen::load_run_config(config);
  const helen::SynthGroundTruth gt = helen::generate(cfg.synth);
  helen::write_cube(gt.cube, prefix + ".cube");
  helen::write_text(prefix + ".truth.json", helen::truth_to_json(gt));
  helen::write_text(prefix + ".endmembers.csv", helen::endmembers_csv(gt.base_endmembers));
  std::cerr << "synth: " << gt.cube.rows() << "x" << gt.cube.cols() << "x" << gt.cube.bands()
            << ", noise variance " << gt.noise_var << "\n";
  return kOk;
}

int cmd_unmix(const std::string& config, const std::string& cube_path, const std::string& prefix,
              std::optional<std::size_t> threads, bool quiet) {
  helen::RunConfig cfg = helen::load_run_config(config);
  if (const auto t = env_threads()) cfg.engine.threads = *t;
  if (threads) cfg.engine.threads = *threads;
  if (cfg.engine.prior_family == helen::PriorFamily::lognormal ||
      cfg.engine.prior_family == helen::PriorFamily::gamma) {
    std::cerr << "unmix: the " << helen::to_string(cfg.engine.prior_family)
              << " prior is experimental\n";
  }
  const helen::HsiCube cube = helen::read_cube(cube_path);
  std::vector<helen::ProgressRecord> records;
  const helen::UnmixResult result = helen::run(cube, cfg.engine, [&](const helen::ProgressRecord& r) {
    records.push_back(r);
    if (!quiet && (r.sweep == 1 || r.sweep % 25 == 0)) {
      std::fprintf(stderr, "sweep %4zu  elbo %.10g  sigma2 %.4g  gamma %.4g\n", r.sweep, r.elbo,
                   r.noise_var, r.outlier_rate);
    }
  });
  helen::write_text(prefix + ".result.json", helen::result_to_json(result));
  helen::write_text(prefix + ".elbo.csv", helen::elbo_csv(records));
  std::cerr << "unmix: " << result.iterations << " sweeps, "
            << (result.converged ? "converged" : "sweep limit reached") << "\n";
  return kOk;
}

int cmd_eval(const std::string& result_path, const std::string& truth_path, double threshold,
             const std::string& out) {
  const helen::StoredResult r = helen::parse_result(helen::read_text(result_path));
  const helen::StoredTruth t = helen::parse_truth(helen::read_text(truth_path));
  if (r.grid.rows != t.rows || r.grid.cols != t.cols) {
    throw helen::InvalidArgument("eval: result and truth describe different image sizes");
  }
  const helen::EvalReport report =
      helen::evaluate(helen::per_pixel_endmembers(r.endmembers, r.grid), t.pixel_endmembers, r.abundances,
                      t.abundances, r.omega, t.outlier_mask, threshold);
  if (report.greedy_alignment) std::cerr << "eval: N > 9, permutation found greedily\n";
  const std::string json = helen::eval_report_to_json(report);
  std::cout << json;
  if (!out.empty()) helen::write_text(out, json);
  return kOk;
}

int cmd_selftest(bool quick) {
  namespace o = helen::oracle;
  o::DistributionSuiteConfig dcfg;
  if (quick) {
    dcfg.samples = 100000;
    dcfg.parameterizations = 5;
  }
  const std::vector<o::SuiteReport> reports = {
      o::distribution_suite(dcfg), o::gradient_suite(quick ? 5 : 20), o::maximizer_suite(quick ? 5 : 20)};
  bool ok = true;
  for (const auto& r : reports) {
    std::fprintf(stderr, "%-24s %s  %zu checks, %zu failed, %zu re-drawn, %.1fs\n", r.name.c_str(),
                 r.passed() ? "PASS" : "FAIL", r.checks.size(), r.failures(), r.retests, r.seconds);
    if (!r.passed()) {
      std::cerr << r.failure_summary();
      ok = false;
    }
  }
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HELEN hyperspectral unmixing with endmember variability"};
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "worker thread cap (overrides HELEN_THREADS)")
      ->check(CLI::PositiveNumber);

  std::string config, prefix, cube, result, truth, out;
  double threshold = 0.5;
  bool quiet = false, quick = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cube with ground truth");
  synth->add_option("--config", config, "run configuration (JSON)")->required();
  synth->add_option("--out-prefix", prefix, "output prefix")->required();

  auto* unmix = app.add_subcommand("unmix", "estimate endmembers, abundances and outliers");
  unmix->add_option("--config", config, "run configuration (JSON)")->required();
  unmix->add_option("--cube", cube, "input cube (.cube)")->required();
  unmix->add_option("--out-prefix", prefix, "output prefix")->required();
  unmix->add_flag("--quiet", quiet, "no per-sweep progress");

  auto* eval = app.add_subcommand("eval", "score a result against ground truth");
  eval->add_option("--result", result, "result JSON from unmix")->required();
  eval->add_option("--truth", truth, "truth JSON from synth")->required();
  eval->add_option("--threshold", threshold, "outlier threshold on omega");
  eval->add_option("--out", out, "also write the report here");

  auto* selftest = app.add_subcommand("selftest", "run the oracle suites");
  selftest->add_flag("--quick", quick, "fewer samples and instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << "\n" << app.help();
    return kConfig;
  }

  try {
    if (*synth) return cmd_synth(config, prefix);
    if (*unmix) return cmd_unmix(config, cube, prefix, threads, quiet);
    if (*eval) return cmd_eval(result, truth, threshold, out);
    if (*selftest) return cmd_selftest(quick);
  } catch (const helen::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const helen::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const helen::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kFailure;
}

#include "helen/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "helen/errors.hpp"

namespace helen {

using nlohmann::json;

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  if (in.size() < offset + sizeof(T)) throw FormatError("cube: truncated header", in.size());
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

// ---- json helpers

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// abundances N x T stored as one array of N per pixel
json columns_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index t = 0; t < m.cols(); ++t) out.push_back(vector_json(m.col(t)));
  return out;
}

json grid_json(const PatchGrid& g) {
  return json{{"rows", g.rows}, {"cols", g.cols}, {"patch_rows", g.patch_rows},
              {"patch_cols", g.patch_cols}};
}

// Errors while reading data files (results, truth) are data errors.
[[noreturn]] void data_error(const std::string& what) { throw FormatError(what, 0); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) data_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

double number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  data_error("expected a number");
}

Matrix matrix_from(const json& j) {
  if (!j.is_array()) data_error("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) data_error("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = number(row.at(static_cast<std::size_t>(c)));
  }
  return m;
}

Vector vector_from(const json& j) {
  if (!j.is_array()) data_error("expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j.at(i));
  return v;
}

Matrix columns_from(const json& j) {
  if (!j.is_array() || j.empty()) data_error("expected a non-empty array of columns");
  const Vector first = vector_from(j.at(0));
  Matrix m(first.size(), static_cast<Eigen::Index>(j.size()));
  for (std::size_t t = 0; t < j.size(); ++t) {
    const Vector c = vector_from(j.at(t));
    if (c.size() != first.size()) data_error("columns differ in length");
    m.col(static_cast<Eigen::Index>(t)) = c;
  }
  return m;
}

std::vector<Matrix> matrices_from(const json& j) {
  if (!j.is_array()) data_error("expected an array of matrices");
  std::vector<Matrix> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(matrix_from(e));
  return out;
}

std::size_t count_from(const json& j) {
  if (!j.is_number_unsigned()) data_error("expected a non-negative integer");
  return j.get<std::size_t>();
}

PatchGrid grid_from(const json& j) {
  try {
    return partition_image(count_from(field(j, "rows")), count_from(field(j, "cols")),
                           count_from(field(j, "patch_rows")), count_from(field(j, "patch_cols")));
  } catch (const InvalidArgument& e) {
    data_error(std::string("bad patch grid: ") + e.what());
  }
}

json parse_json(std::string_view text, bool config) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    if (config) throw ConfigError(std::string("config: ") + e.what());
    throw FormatError(std::string("json: ") + e.what(), e.byte);
  }
}

// ---- run configuration

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw ConfigError("config: " + where + ": " + what);
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) config_error(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) config_error(where, "unknown key '" + key + "'");
  }
}

double cfg_real(const json& obj, const std::string& key, const std::string& where, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
  }
  config_error(where + "." + key, "expected a number");
}

std::size_t cfg_count(const json& obj, const std::string& key, const std::string& where,
                      std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) config_error(where + "." + key, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::string cfg_string(const json& obj, const std::string& key, const std::string& where,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) config_error(where + "." + key, "expected a string");
  return v.get<std::string>();
}

std::pair<double, double> cfg_pair(const json& obj, const std::string& key, const std::string& where,
                                   std::pair<double, double> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    config_error(where + "." + key, "expected [low, high]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

Matrix cfg_matrix(const json& obj, const std::string& key, const std::string& where) {
  try {
    return matrix_from(obj.at(key));
  } catch (const FormatError&) {
    config_error(where + "." + key, "expected a matrix (array of rows)");
  }
}

SynthConfig synth_from(const json& j) {
  const std::string w = "synth";
  reject_unknown(j, {"rows", "cols", "bands", "n_endmembers", "patch_rows", "patch_cols", "snr_db",
                     "max_purity", "n_outliers", "outlier_range", "blur_kernel_size", "blur_sigma",
                     "ev_scale_range", "ev_perturb_std", "seed", "base_endmembers"},
                 w);
  SynthConfig c;
  c.rows = cfg_count(j, "rows", w, c.rows);
  c.cols = cfg_count(j, "cols", w, c.cols);
  c.bands = cfg_count(j, "bands", w, c.bands);
  c.n_endmembers = cfg_count(j, "n_endmembers", w, c.n_endmembers);
  c.patch_rows = cfg_count(j, "patch_rows", w, c.patch_rows);
  c.patch_cols = cfg_count(j, "patch_cols", w, c.patch_cols);
  c.snr_db = cfg_real(j, "snr_db", w, c.snr_db);
  c.max_purity = cfg_real(j, "max_purity", w, c.max_purity);
  c.n_outliers = cfg_count(j, "n_outliers", w, c.n_outliers);
  c.outlier_range = cfg_pair(j, "outlier_range", w, c.outlier_range);
  c.blur_kernel_size = cfg_count(j, "blur_kernel_size", w, c.blur_kernel_size);
  c.blur_sigma = cfg_real(j, "blur_sigma", w, c.blur_sigma);
  c.ev_scale_range = cfg_pair(j, "ev_scale_range", w, c.ev_scale_range);
  c.ev_perturb_std = cfg_real(j, "ev_perturb_std", w, c.ev_perturb_std);
  c.seed = cfg_count(j, "seed", w, c.seed);
  if (j.contains("base_endmembers") && !j.at("base_endmembers").is_null()) {
    c.base_endmembers = cfg_matrix(j, "base_endmembers", w);
  }
  validate(c);
  return c;
}

ApgConfig apg_from(const json& j) {
  const std::string w = "engine.apg";
  reject_unknown(j, {"max_iters", "backtrack_shrink", "init_step", "grad_tol", "mode"}, w);
  ApgConfig c;
  c.max_iters = static_cast<int>(cfg_count(j, "max_iters", w, static_cast<std::size_t>(c.max_iters)));
  c.backtrack_shrink = cfg_real(j, "backtrack_shrink", w, c.backtrack_shrink);
  c.init_step = cfg_real(j, "init_step", w, c.init_step);
  c.grad_tol = cfg_real(j, "grad_tol", w, c.grad_tol);
  const std::string mode = cfg_string(j, "mode", w, "backtracking");
  if (mode == "backtracking") {
    c.mode = StepMode::backtracking;
  } else if (mode == "fixed-lipschitz") {
    c.mode = StepMode::fixed_lipschitz;
  } else {
    config_error(w + ".mode", "expected 'backtracking' or 'fixed-lipschitz'");
  }
  return c;
}

EngineConfig engine_from(const json& j) {
  const std::string w = "engine";
  reject_unknown(j, {"prior_family", "n_endmembers", "patch_rows", "patch_cols", "max_sweeps",
                     "rel_tol_mean_A", "apg", "outlier", "seed", "init", "threads",
                     "init_outlier_rate"},
                 w);
  EngineConfig c;
  try {
    c.prior_family = parse_prior_family(cfg_string(j, "prior_family", w, "beta"));
  } catch (const InvalidArgument& e) {
    config_error(w + ".prior_family", e.what());
  }
  c.n_endmembers = cfg_count(j, "n_endmembers", w, c.n_endmembers);
  c.patch_rows = cfg_count(j, "patch_rows", w, c.patch_rows);
  c.patch_cols = cfg_count(j, "patch_cols", w, c.patch_cols);
  c.max_sweeps = cfg_count(j, "max_sweeps", w, c.max_sweeps);
  c.rel_tol_mean_A = cfg_real(j, "rel_tol_mean_A", w, c.rel_tol_mean_A);
  if (j.contains("apg")) c.apg = apg_from(j.at("apg"));
  if (j.contains("outlier")) {
    const json& o = j.at("outlier");
    reject_unknown(o, {"kind", "mean", "variance"}, w + ".outlier");
    if (cfg_string(o, "kind", w + ".outlier", "iid-gaussian") != "iid-gaussian") {
      config_error(w + ".outlier.kind", "only 'iid-gaussian' is supported");
    }
    c.outlier.mean = cfg_real(o, "mean", w + ".outlier", c.outlier.mean);
    c.outlier.variance = cfg_real(o, "variance", w + ".outlier", c.outlier.variance);
  }
  c.seed = cfg_count(j, "seed", w, c.seed);
  if (j.contains("init")) {
    const json& in = j.at("init");
    reject_unknown(in, {"mode", "endmembers"}, w + ".init");
    try {
      c.init.mode = parse_init_mode(cfg_string(in, "mode", w + ".init", "successive-projection"));
    } catch (const InvalidArgument& e) {
      config_error(w + ".init.mode", e.what());
    }
    if (in.contains("endmembers") && !in.at("endmembers").is_null()) {
      c.init.endmembers = cfg_matrix(in, "endmembers", w + ".init");
    }
  }
  c.threads = cfg_count(j, "threads", w, c.threads);
  c.init_outlier_rate = cfg_real(j, "init_outlier_rate", w, c.init_outlier_rate);
  return c;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

// ---- cube

std::string encode_cube(const HsiCube& cube) {
  constexpr auto limit = std::numeric_limits<std::uint32_t>::max();
  if (cube.rows() > limit || cube.cols() > limit || cube.bands() > limit) {
    throw InvalidArgument("cube: dimension does not fit in 32 bits");
  }
  std::string out;
  out.reserve(kCubeHeaderBytes + 8 * cube.bands() * cube.pixels());
  out.append("HYPC", 4);
  put_le<std::uint16_t>(out, kCubeVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cube.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cube.cols()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cube.bands()));
  const Matrix& v = cube.values();
  for (Eigen::Index b = 0; b < v.rows(); ++b) {
    for (Eigen::Index t = 0; t < v.cols(); ++t) put_le<double>(out, v(b, t));
  }
  return out;
}

HsiCube decode_cube(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "HYPC") throw FormatError("cube: bad magic", 0);
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kCubeVersion) {
    throw FormatError("cube: unsupported version " + std::to_string(version), 4);
  }
  const std::uint64_t rows = get_le<std::uint32_t>(bytes, 6);
  const std::uint64_t cols = get_le<std::uint32_t>(bytes, 10);
  const std::uint64_t bands = get_le<std::uint32_t>(bytes, 14);
  if (rows == 0 || cols == 0 || bands == 0) throw FormatError("cube: zero dimension", 6);
  // compare by division so huge headers cannot overflow
  const std::uint64_t pixels = rows * cols;  // < 2^64
  const std::uint64_t payload = bytes.size() - kCubeHeaderBytes;
  if (pixels > payload / 8 / bands) {
    throw FormatError("cube: header declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                          "x" + std::to_string(bands) + " values but the payload is truncated",
                      bytes.size());
  }
  const std::uint64_t expected = pixels * bands * 8;
  if (payload != expected) {
    throw FormatError("cube: trailing bytes after payload", kCubeHeaderBytes + expected);
  }
  Matrix v(static_cast<Eigen::Index>(bands), static_cast<Eigen::Index>(pixels));
  std::size_t offset = kCubeHeaderBytes;
  for (Eigen::Index b = 0; b < v.rows(); ++b) {
    for (Eigen::Index t = 0; t < v.cols(); ++t) {
      v(b, t) = get_le<double>(bytes, offset);
      offset += 8;
    }
  }
  return HsiCube(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), std::move(v));
}

void write_cube(const HsiCube& cube, const std::filesystem::path& path) {
  write_text(path, encode_cube(cube));
}

HsiCube read_cube(const std::filesystem::path& path) { return decode_cube(read_text(path)); }

// ---- config

RunConfig parse_run_config(std::string_view text) {
  const json j = parse_json(text, true);
  reject_unknown(j, {"synth", "engine"}, "top level");
  RunConfig cfg;
  try {
    if (j.contains("synth")) cfg.synth = synth_from(j.at("synth"));
    if (j.contains("engine")) cfg.engine = engine_from(j.at("engine"));
    validate(cfg.engine);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

std::string run_config_to_json(const RunConfig& cfg) {
  const SynthConfig& s = cfg.synth;
  json synth{{"rows", s.rows},
             {"cols", s.cols},
             {"bands", s.bands},
             {"n_endmembers", s.n_endmembers},
             {"patch_rows", s.patch_rows},
             {"patch_cols", s.patch_cols},
             {"max_purity", s.max_purity},
             {"n_outliers", s.n_outliers},
             {"outlier_range", {s.outlier_range.first, s.outlier_range.second}},
             {"blur_kernel_size", s.blur_kernel_size},
             {"blur_sigma", s.blur_sigma},
             {"ev_scale_range", {s.ev_scale_range.first, s.ev_scale_range.second}},
             {"ev_perturb_std", s.ev_perturb_std},
             {"seed", s.seed}};
  if (std::isinf(s.snr_db)) {
    synth["snr_db"] = s.snr_db > 0 ? "inf" : "-inf";
  } else {
    synth["snr_db"] = s.snr_db;
  }
  if (s.base_endmembers) synth["base_endmembers"] = matrix_json(*s.base_endmembers);

  const EngineConfig& e = cfg.engine;
  json engine{{"prior_family", std::string(to_string(e.prior_family))},
              {"n_endmembers", e.n_endmembers},
              {"patch_rows", e.patch_rows},
              {"patch_cols", e.patch_cols},
              {"max_sweeps", e.max_sweeps},
              {"rel_tol_mean_A", e.rel_tol_mean_A},
              {"apg",
               {{"max_iters", e.apg.max_iters},
                {"backtrack_shrink", e.apg.backtrack_shrink},
                {"init_step", e.apg.init_step},
                {"grad_tol", e.apg.grad_tol},
                {"mode", e.apg.mode == StepMode::backtracking ? "backtracking" : "fixed-lipschitz"}}},
              {"outlier", {{"kind", "iid-gaussian"}, {"mean", e.outlier.mean}, {"variance", e.outlier.variance}}},
              {"seed", e.seed},
              {"init", {{"mode", std::string(to_string(e.init.mode))}}},
              {"threads", e.threads},
              {"init_outlier_rate", e.init_outlier_rate}};
  if (e.init.endmembers) engine["init"]["endmembers"] = matrix_json(*e.init.endmembers);
  return dump(json{{"synth", synth}, {"engine", engine}});
}

// ---- result

std::string result_to_json(const UnmixResult& r) {
  json endmembers = json::array();
  for (const auto& a : r.endmembers) endmembers.push_back(matrix_json(a));
  json prior{{"family", std::string(to_string(r.model.prior.family))}};
  if (r.model.prior.family != PriorFamily::uniform) {
    prior["first"] = matrix_json(r.model.prior.first);
    prior["second"] = matrix_json(r.model.prior.second);
  }
  json trace = json::array();
  for (const double v : r.elbo_trace) trace.push_back(v);
  json j{{"grid", grid_json(r.grid)},
         {"endmembers", endmembers},
         {"abundances", columns_json(r.abundances)},
         {"omega", vector_json(r.outlier_scores)},
         {"model",
          {{"prior", prior},
           {"noise_var", r.model.noise_var},
           {"outlier_rate", r.model.outlier_rate},
           {"noise_var_frozen", r.noise_var_frozen}}},
         {"elbo_trace", trace},
         {"iterations", r.iterations},
         {"converged", r.converged}};
  return dump(j);
}

StoredResult parse_result(std::string_view text) {
  const json j = parse_json(text, false);
  StoredResult r;
  r.grid = grid_from(field(j, "grid"));
  r.endmembers = matrices_from(field(j, "endmembers"));
  r.abundances = columns_from(field(j, "abundances"));
  r.omega = vector_from(field(j, "omega"));
  const json& model = field(j, "model");
  const json& prior = field(model, "prior");
  try {
    r.prior.family = parse_prior_family(field(prior, "family").get<std::string>());
  } catch (const std::exception& e) {
    data_error(std::string("bad prior family: ") + e.what());
  }
  if (r.prior.family != PriorFamily::uniform) {
    r.prior.first = matrix_from(field(prior, "first"));
    r.prior.second = matrix_from(field(prior, "second"));
  }
  r.noise_var = number(field(model, "noise_var"));
  r.outlier_rate = number(field(model, "outlier_rate"));
  for (const auto& v : field(j, "elbo_trace")) r.elbo_trace.push_back(number(v));
  r.iterations = count_from(field(j, "iterations"));
  r.converged = field(j, "converged").get<bool>();

  const std::size_t t_count = r.grid.assignment.size();
  if (r.endmembers.size() != r.grid.count()) data_error("result: one endmember matrix per patch required");
  if (static_cast<std::size_t>(r.abundances.cols()) != t_count ||
      static_cast<std::size_t>(r.omega.size()) != t_count) {
    data_error("result: abundances/omega do not match the grid");
  }
  for (const auto& a : r.endmembers) {
    if (a.cols() != r.abundances.rows() || a.rows() != r.endmembers.front().rows()) {
      data_error("result: endmember shapes disagree");
    }
  }
  return r;
}

// ---- truth

std::string truth_to_json(const SynthGroundTruth& t) {
  json mask = json::array();
  for (const bool b : t.outlier_mask) mask.push_back(b);
  json pixel = json::array();
  for (const auto& a : t.pixel_endmembers) pixel.push_back(matrix_json(a));
  json patch = json::array();
  for (const auto& a : t.patch_endmembers) patch.push_back(matrix_json(a));
  json j{{"rows", t.cube.rows()},
         {"cols", t.cube.cols()},
         {"grid", grid_json(t.grid)},
         {"abundances", columns_json(t.abundances)},
         {"outlier_mask", mask},
         {"noise_var", t.noise_var},
         {"base_endmembers", matrix_json(t.base_endmembers)},
         {"patch_endmembers", patch},
         {"pixel_endmembers", pixel}};
  return dump(j);
}

StoredTruth parse_truth(std::string_view text) {
  const json j = parse_json(text, false);
  StoredTruth t;
  t.rows = count_from(field(j, "rows"));
  t.cols = count_from(field(j, "cols"));
  t.grid = grid_from(field(j, "grid"));
  t.abundances = columns_from(field(j, "abundances"));
  for (const auto& b : field(j, "outlier_mask")) {
    if (!b.is_boolean()) data_error("truth: outlier_mask must hold booleans");
    t.outlier_mask.push_back(b.get<bool>());
  }
  t.noise_var = number(field(j, "noise_var"));
  t.pixel_endmembers = matrices_from(field(j, "pixel_endmembers"));
  if (j.contains("patch_endmembers")) t.patch_endmembers = matrices_from(j.at("patch_endmembers"));
  const std::size_t t_count = t.rows * t.cols;
  if (static_cast<std::size_t>(t.abundances.cols()) != t_count || t.outlier_mask.size() != t_count ||
      t.pixel_endmembers.size() != t_count || t.grid.assignment.size() != t_count) {
    data_error("truth: sizes do not match rows x cols");
  }
  return t;
}

std::string eval_report_to_json(const EvalReport& r) {
  json perm = json::array();
  for (const auto p : r.permutation) perm.push_back(p);
  json j{{"sam_deg", r.sam_deg},
         {"mse_db", r.mse_db},
         {"rmse_s", r.rmse_s},
         {"outlier_precision", r.outlier_precision},
         {"outlier_recall", r.outlier_recall},
         {"outlier_f1", r.outlier_f1},
         {"permutation", perm},
         {"greedy_alignment", r.greedy_alignment}};
  return dump(j);
}

// ---- csv

namespace {

std::string fmt17(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string endmembers_csv(const Matrix& a) {
  std::string out = "band";
  for (Eigen::Index n = 0; n < a.cols(); ++n) out += ",em" + std::to_string(n + 1);
  out += "\n";
  for (Eigen::Index m = 0; m < a.rows(); ++m) {
    out += std::to_string(m + 1);
    for (Eigen::Index n = 0; n < a.cols(); ++n) out += "," + fmt17(a(m, n));
    out += "\n";
  }
  return out;
}

std::string elbo_csv(const std::vector<ProgressRecord>& records) {
  std::string out = "sweep,elbo,sigma2,gamma,seconds\n";
  for (const auto& r : records) {
    out += std::to_string(r.sweep) + "," + fmt17(r.elbo) + "," + fmt17(r.noise_var) + "," +
           fmt17(r.outlier_rate) + "," + fmt17(r.seconds) + "\n";
  }
  return out;
}

// ---- files

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace helen

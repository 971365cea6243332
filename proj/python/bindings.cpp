// Python surface: configs and results cross as JSON text, cubes as
// (rows, cols, bands) float64 arrays.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "helen/engine.hpp"
#include "helen/errors.hpp"
#include "helen/io.hpp"
#include "helen/metrics.hpp"
#include "helen/synth.hpp"

namespace py = pybind11;
using namespace helen;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array cube_to_array(const HsiCube& cube) {
  Array out({cube.rows(), cube.cols(), cube.bands()});
  std::copy_n(cube.values().data(), cube.values().size(), out.mutable_data());
  return out;
}

HsiCube array_to_cube(const Array& a) {
  if (a.ndim() != 3) throw InvalidArgument("cube must be a (rows, cols, bands) array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  Matrix values(a.shape(2), static_cast<Eigen::Index>(rows * cols));
  std::copy_n(a.data(), values.size(), values.data());
  return HsiCube(rows, cols, std::move(values));
}

// N x T -> (rows, cols, N)
Array per_pixel(const Matrix& m, std::size_t rows, std::size_t cols) {
  Array out({rows, cols, static_cast<std::size_t>(m.rows())});
  std::copy_n(m.data(), m.size(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "HELEN hyperspectral unmixing with endmember variability";

  // translators run newest first, so the base class goes in first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def("normalize_config", [](const std::string& text) { return run_config_to_json(parse_run_config(text)); },
        py::arg("config_json"));

  m.def(
      "synth",
      [](const std::string& config_json) {
        const SynthGroundTruth gt = generate(parse_run_config(config_json).synth);
        return py::make_tuple(cube_to_array(gt.cube), truth_to_json(gt));
      },
      py::arg("config_json"));

  m.def(
      "unmix",
      [](const Array& cube, const std::string& config_json, const std::function<void(py::dict)>& progress) {
        const HsiCube c = array_to_cube(cube);
        const EngineConfig cfg = parse_run_config(config_json).engine;
        ProgressSink sink;
        if (progress) {
          sink = [&](const ProgressRecord& p) {
            py::gil_scoped_acquire gil;
            py::dict d;
            d["sweep"] = p.sweep;
            d["elbo"] = p.elbo;
            d["noise_var"] = p.noise_var;
            d["outlier_rate"] = p.outlier_rate;
            d["seconds"] = p.seconds;
            progress(d);
          };
        }
        UnmixResult r;
        {
          py::gil_scoped_release release;
          r = run(c, cfg, sink);
        }
        py::dict out;
        out["endmembers"] = r.endmembers;
        out["abundances"] = per_pixel(r.abundances, c.rows(), c.cols());
        Array omega({c.rows(), c.cols()});
        std::copy_n(r.state.omega.data(), r.state.omega.size(), omega.mutable_data());
        out["omega"] = omega;
        out["noise_var"] = r.model.noise_var;
        out["outlier_rate"] = r.model.outlier_rate;
        out["elbo_trace"] = r.elbo_trace;
        out["iterations"] = r.iterations;
        out["converged"] = r.converged;
        out["json"] = result_to_json(r);
        return out;
      },
      py::arg("cube"), py::arg("config_json") = "{}", py::arg("progress") = nullptr);

  m.def(
      "evaluate",
      [](const std::string& result_json, const std::string& truth_json, double threshold) {
        const StoredResult r = parse_result(result_json);
        const StoredTruth t = parse_truth(truth_json);
        if (r.grid.rows != t.rows || r.grid.cols != t.cols) {
          throw InvalidArgument("result and truth describe different image sizes");
        }
        return eval_report_to_json(evaluate(per_pixel_endmembers(r.endmembers, r.grid), t.pixel_endmembers,
                                            r.abundances, t.abundances, r.omega, t.outlier_mask, threshold));
      },
      py::arg("result_json"), py::arg("truth_json"), py::arg("threshold") = 0.5);

  m.def("encode_cube", [](const Array& cube) { return py::bytes(encode_cube(array_to_cube(cube))); });
  m.def("decode_cube", [](const py::bytes& b) { return cube_to_array(decode_cube(std::string(b))); });
  m.def("sam", &sam, py::arg("estimated"), py::arg("truth"), py::arg("permutation"));
  m.def("align_permutation", &align_permutation, py::arg("estimated"), py::arg("truth"));
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "psg/checks.hpp"
#include "psg/config_json.hpp"
#include "psg/dataset.hpp"
#include "psg/quantizer.hpp"
#include "psg/scaling.hpp"
#include "psg/theory.hpp"
#include "psg/train.hpp"

namespace py = pybind11;
using namespace psg;

namespace {

MatD mat_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() == 1) {
    MatD m(1, static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), m.v.begin());
    return m;
  }
  if (a.ndim() == 2) {
    MatD m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.v.begin());
    return m;
  }
  throw config_error("expected a 1-D or 2-D array");
}

py::array_t<double> array_from_mat(const MatD& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.v.begin(), m.v.end(), out.mutable_data());
  return out;
}

std::optional<QuantGrid> grid_from(std::optional<int> bits, std::optional<double> delta) {
  if (!bits && !delta) return std::nullopt;  // zero-target mode
  if (!bits || !delta) throw config_error("provide both bits and delta, or neither");
  check_bits(*bits);
  if (!(*delta > 0.0)) throw config_error("delta must be > 0");
  return QuantGrid{*bits, *delta};
}

}  // namespace

PYBIND11_MODULE(psgd, m) {
  m.doc() = "position-based scaled gradient training, quantization and verification";

  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<numeric_error>(m, "NumericError");
  py::register_exception<format_error>(m, "FormatError");

  m.def(
      "step_size",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w, int bits) {
        return step_size(mat_from_array(w), bits);
      },
      py::arg("weights"), py::arg("bits"),
      "Uniform symmetric step size max(-min, max) / (2^(n-1) - 1).");

  m.def(
      "quantize",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w, int bits) {
        const MatD mw = mat_from_array(w);
        const QuantGrid g = make_grid(mw, bits);
        const QuantizedLayer q = quantize(mw, g);
        py::array_t<int> codes({q.rows, q.cols});
        std::copy(q.codes.begin(), q.codes.end(), codes.mutable_data());
        return py::make_tuple(codes, g.delta);
      },
      py::arg("weights"), py::arg("bits"), "Integer codes and the step size.");

  m.def(
      "dequantize",
      [](const py::array_t<int, py::array::c_style | py::array::forcecast>& codes, double delta,
         int bits) {
        QuantizedLayer q;
        q.rows = codes.ndim() == 2 ? static_cast<int>(codes.shape(0)) : 1;
        q.cols = static_cast<int>(codes.ndim() == 2 ? codes.shape(1) : codes.shape(0));
        q.grid = QuantGrid{bits, delta};
        q.codes.assign(codes.data(), codes.data() + codes.size());
        return array_from_mat(dequantize(q));
      },
      py::arg("codes"), py::arg("delta"), py::arg("bits"));

  m.def(
      "nearest_target",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
         std::optional<int> bits, std::optional<double> delta) {
        return array_from_mat(nearest_target(mat_from_array(w), grid_from(bits, delta)));
      },
      py::arg("weights"), py::arg("bits") = std::nullopt, py::arg("delta") = std::nullopt,
      "Nearest grid point per element; zero-target mode when no grid is given.");

  m.def(
      "quant_mse",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& t) {
        return quant_mse(mat_from_array(w), mat_from_array(t));
      },
      py::arg("weights"), py::arg("target"));

  m.def(
      "scale_independent",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& xbar, double eps) {
        return array_from_mat(scale_independent(mat_from_array(x), mat_from_array(xbar), eps));
      },
      py::arg("x"), py::arg("xbar"), py::arg("eps") = 1e-8);

  m.def(
      "scale_directional",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& xbar, double eps) {
        return array_from_mat(scale_directional(mat_from_array(x), mat_from_array(xbar), eps));
      },
      py::arg("x"), py::arg("xbar"), py::arg("eps") = 1e-8);

  m.def(
      "warp",
      [](double x, std::optional<int> bits, std::optional<double> delta, double eps) {
        return warp(x, grid_from(bits, delta), eps);
      },
      py::arg("x"), py::arg("bits") = std::nullopt, py::arg("delta") = std::nullopt,
      py::arg("eps") = 1e-8);

  m.def(
      "warp_inverse",
      [](double y, std::optional<int> bits, std::optional<double> delta, double eps) {
        return warp_inverse(y, grid_from(bits, delta), eps);
      },
      py::arg("y"), py::arg("bits") = std::nullopt, py::arg("delta") = std::nullopt,
      py::arg("eps") = 1e-8);

  m.def("offset_c", &offset_c, py::arg("xbar"), py::arg("delta"), py::arg("eps") = 1e-8);

  m.def(
      "warp_demo",
      [](std::optional<int> bits, std::optional<double> delta, double eps, double lo, double hi,
         int samples) {
        const auto rows = warp_demo_1d(grid_from(bits, delta), eps, lo, hi, samples);
        py::array_t<double> out({static_cast<py::ssize_t>(rows.size()), py::ssize_t(3)});
        auto* p = out.mutable_data();
        for (const auto& r : rows) {
          *p++ = r.x;
          *p++ = r.fx;
          *p++ = r.loss;
        }
        return out;
      },
      py::arg("bits") = 2, py::arg("delta") = 1.0, py::arg("eps") = 1e-8, py::arg("lo") = -2.0,
      py::arg("hi") = 8.0, py::arg("samples") = 2001,
      "Columns: x, f(x), cos((x - 3.07)^2).");

  m.def(
      "load_idx",
      [](const std::string& images, const std::string& labels) {
        const Dataset ds = load_mnist_idx(images, labels);
        py::array_t<float> x({ds.train_x.rows, ds.train_x.cols});
        std::copy(ds.train_x.v.begin(), ds.train_x.v.end(), x.mutable_data());
        py::array_t<int> y(static_cast<py::ssize_t>(ds.train_y.size()));
        std::copy(ds.train_y.begin(), ds.train_y.end(), y.mutable_data());
        return py::make_tuple(x, y);
      },
      py::arg("images_path"), py::arg("labels_path"),
      "Images scaled to [0, 1] plus integer labels.");

  m.def(
      "run_experiment",
      [](const std::string& config_json, std::optional<std::string> out_dir) {
        ExperimentConfig cfg = parse_config_text(config_json);
        TrainResult r = train(cfg);
        r.report.config_echo = config_to_json(cfg);
        if (out_dir) {
          emit_report(r.report, *out_dir);
          save_model(r.model, *out_dir + "/model.psgm");
        }
        return r.report.to_json().dump();
      },
      py::arg("config_json"), py::arg("out_dir") = std::nullopt,
      py::call_guard<py::gil_scoped_release>(),
      "Train per the JSON config; returns the report as a JSON string.");

  m.def(
      "run_theory_checks",
      [](int equivalence_trials, int convergence_trials, std::uint64_t seed) {
        TheoryCheckConfig cfg;
        cfg.equivalence_trials = equivalence_trials;
        cfg.convergence_trials = convergence_trials;
        cfg.seed = seed;
        return checks_to_json(run_theory_checks(cfg)).dump();
      },
      py::arg("equivalence_trials") = 50, py::arg("convergence_trials") = 200,
      py::arg("seed") = 2024, py::call_guard<py::gil_scoped_release>(),
      "JSON list of named theory-check results.");
}

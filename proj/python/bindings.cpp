// Python face of the registration engine: phantoms, field I/O,
// registration, deformation application, sKL evaluation, SVG rendering.
// Heavy state stays in C++; values cross as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "odfreg/deformation.hpp"
#include "odfreg/errors.hpp"
#include "odfreg/evaluation.hpp"
#include "odfreg/field.hpp"
#include "odfreg/io.hpp"
#include "odfreg/optimizer.hpp"
#include "odfreg/phantom.hpp"
#include "odfreg/render.hpp"
#include "odfreg/sqrt_odf.hpp"
#include "odfreg/version.hpp"

namespace py = pybind11;
using namespace odf;

namespace {

// Registration output flattened for scripting: the deformed template and
// the endpoint bundle are materialized up front.
struct PyRegistration {
  ODFField deformed;
  DeformationBundle deformation;
  Eigen::MatrixX3d trace;  // rows (total, energy, matching)
  int iterations = 0;
  std::string termination;
  double min_det = 0.0;
  double inverse_residual = 0.0;
};

PhantomSpec spec_from_dict(const std::map<std::string, std::string>& kv) {
  Config cfg;
  for (const auto& [key, value] : kv) cfg.set(key, value);
  return parse_phantom_spec(cfg);
}

PyRegistration run_registration(const ODFField& temp, const ODFField& targ,
                                const RegistrationConfig& cfg) {
  validate_config(cfg);
  RegistrationResult res = register_fields(temp, targ, cfg);
  PyRegistration out;
  out.deformation = make_deformation(res.momentum, res.trajectory);
  out.deformed = group_action(out.deformation, temp);
  out.trace.resize(static_cast<Eigen::Index>(res.trace.size()), 3);
  for (std::size_t i = 0; i < res.trace.size(); ++i)
    out.trace.row(static_cast<Eigen::Index>(i)) << res.trace[i].total,
        res.trace[i].energy, res.trace[i].matching;
  out.iterations = res.iterations;
  out.termination = res.termination;
  out.min_det = res.diagnostics.min_det;
  out.inverse_residual = res.diagnostics.inverse_residual;
  return out;
}

}  // namespace

PYBIND11_MODULE(_odfreg, m) {
  m.doc() = "Diffeomorphic registration of ODF volumes";
  m.attr("__version__") = version_string;

  py::register_exception<usage_error>(m, "UsageError", PyExc_ValueError);
  py::register_exception<data_error>(m, "DataError", PyExc_IOError);
  py::register_exception<numeric_error>(m, "NumericError", PyExc_RuntimeError);

  py::class_<ODFField>(m, "Field")
      .def_property_readonly(
          "dims",
          [](const ODFField& f) {
            return py::make_tuple(f.grid.dims[0], f.grid.dims[1],
                                  f.grid.dims[2]);
          })
      .def_property_readonly(
          "voxel_size",
          [](const ODFField& f) { return Eigen::Vector3d(f.grid.voxel_size); })
      .def_property_readonly(
          "n_dirs", [](const ODFField& f) { return f.sampling->size(); })
      .def_property_readonly(
          "directions",
          [](const ODFField& f) {
            return Eigen::MatrixX3d(f.sampling->directions().transpose());
          })
      .def_property_readonly(
          "weights",
          [](const ODFField& f) {
            return Eigen::VectorXd(f.sampling->weights());
          })
      .def_property_readonly(
          "values", [](const ODFField& f) { return Eigen::MatrixXd(f.values); },
          "Square-root ODF samples, one column per voxel")
      .def("__repr__", [](const ODFField& f) {
        return "Field(" + std::to_string(f.grid.dims[0]) + "x" +
               std::to_string(f.grid.dims[1]) + "x" +
               std::to_string(f.grid.dims[2]) + ", " +
               std::to_string(f.sampling->size()) + " dirs)";
      });

  py::class_<DeformationBundle>(m, "Deformation")
      .def_property_readonly(
          "phi", [](const DeformationBundle& d) { return d.phi; },
          "Forward map, physical coordinates, one row per voxel")
      .def_property_readonly(
          "phi_inv", [](const DeformationBundle& d) { return d.phi_inv; })
      .def("__repr__", [](const DeformationBundle& d) {
        return "Deformation(" + std::to_string(d.grid.nvox()) + " voxels)";
      });

  py::class_<PyRegistration>(m, "Registration")
      .def_readonly("deformed", &PyRegistration::deformed)
      .def_readonly("deformation", &PyRegistration::deformation)
      .def_readonly("trace", &PyRegistration::trace,
                    "Objective per accepted step: total, energy, matching")
      .def_readonly("iterations", &PyRegistration::iterations)
      .def_readonly("termination", &PyRegistration::termination)
      .def_readonly("min_det", &PyRegistration::min_det)
      .def_readonly("inverse_residual", &PyRegistration::inverse_residual);

  m.def(
      "phantom",
      [](const std::map<std::string, std::string>& spec) {
        return make_phantom(spec_from_dict(spec));
      },
      py::arg("spec"),
      "Synthetic ODF volume from a spec dict (same keys as the CLI spec "
      "file)");

  m.def(
      "phantom_mask",
      [](const std::map<std::string, std::string>& spec) {
        const auto support = phantom_support(spec_from_dict(spec));
        return std::vector<int>(support.begin(), support.end());
      },
      py::arg("spec"), "Support mask of the phantom, 1 inside the shape");

  m.def("load", &load_field, py::arg("path"));
  m.def("save", &save_field, py::arg("field"), py::arg("path"));
  m.def("load_deformation", &load_deformation, py::arg("path"));
  m.def("save_deformation", &save_deformation, py::arg("deformation"),
        py::arg("path"));

  m.def(
      "register_fields",
      [](const ODFField& temp, const ODFField& targ, double sigma_v,
         double lam, int timesteps, int max_iterations,
         double gradient_tolerance) {
        RegistrationConfig cfg;
        cfg.sigma_v = sigma_v;
        cfg.lambda = lam;
        cfg.timesteps = timesteps;
        cfg.max_iterations = max_iterations;
        cfg.gradient_tolerance = gradient_tolerance;
        return run_registration(temp, targ, cfg);
      },
      py::arg("template_field"), py::arg("target"), py::kw_only(),
      py::arg("sigma_v") = 5.0, py::arg("lam") = 1.0,
      py::arg("timesteps") = 10, py::arg("max_iterations") = 100,
      py::arg("gradient_tolerance") = 1e-4,
      "Register the template onto the target; returns the deformed "
      "template, the deformation and the objective trace");

  m.def("apply", &group_action, py::arg("deformation"), py::arg("field"),
        "Deform a field: resample along the inverse map and reorient");

  m.def(
      "evaluate",
      [](const ODFField& a, const ODFField& b,
         const std::vector<std::uint8_t>& mask) {
        const SklReport r = skl_map(a, b, mask);
        py::dict out;
        out["map"] = Eigen::VectorXd(r.map);
        out["mean"] = r.mean;
        out["cdf_value"] = Eigen::VectorXd(r.cdf_value);
        out["cdf_fraction"] = Eigen::VectorXd(r.cdf_fraction);
        return out;
      },
      py::arg("a"), py::arg("b"),
      py::arg("mask") = std::vector<std::uint8_t>{},
      "Per-voxel symmetric KL report as a dict");

  m.def("dice", &dice, py::arg("a"), py::arg("b"));

  m.def(
      "render_svg",
      [](const ODFField& f, int axis, int index, double cell_px,
         int samples) {
        RenderOptions opt;
        opt.axis = axis;
        opt.index = index;
        opt.cell_px = cell_px;
        opt.glyph_samples = samples;
        return render_svg(f, opt);
      },
      py::arg("field"), py::kw_only(), py::arg("axis") = 2,
      py::arg("index") = 0, py::arg("cell_px") = 16.0,
      py::arg("samples") = 64, "One slice as an SVG string of ODF glyphs");
}

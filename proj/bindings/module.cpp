// Python bindings for the main operations: noise paths, cocycle evolution,
// Lyapunov estimation, pullback attractors, and periodic-curve extraction.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rds/curves.hpp"
#include "rds/invariant.hpp"
#include "rds/lyapunov.hpp"
#include "rds/zoo.hpp"

namespace py = pybind11;
using namespace rds;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cylinder random dynamical systems: cocycles, Lyapunov analysis, "
            "pullback attractors, random periodic curves.";

  py::register_exception<BlowupError>(m, "BlowupError");
  py::register_exception<DissipativityError>(m, "DissipativityError");
  py::register_exception<ExtractionError>(m, "ExtractionError");

  py::class_<NoisePath>(m, "NoisePath")
      .def(py::init<uint64_t, double, int>(), py::arg("seed"), py::arg("grid_step"),
           py::arg("dimension"))
      .def_property_readonly("seed", &NoisePath::seed)
      .def_property_readonly("grid_step", &NoisePath::grid_step)
      .def_property_readonly("dimension", &NoisePath::dimension)
      .def_property_readonly("shift_offset", &NoisePath::shift_offset)
      .def("increment", &NoisePath::increment, py::arg("slot"))
      .def("shifted_slots", &NoisePath::shifted_slots, py::arg("slots"))
      .def("shift", [](const NoisePath& p, double t) { return shift(p, t); }, py::arg("t"));

  py::class_<CylinderState>(m, "CylinderState")
      .def(py::init<double, Eigen::VectorXd>(), py::arg("s"), py::arg("x"))
      .def_readonly("s", &CylinderState::s)
      .def_readonly("x", &CylinderState::x);

  py::class_<ScaledMatrix>(m, "ScaledMatrix")
      .def_readonly("mat", &ScaledMatrix::mat)
      .def_readonly("log_scale", &ScaledMatrix::log_scale)
      .def_readonly("log_scaled", &ScaledMatrix::log_scaled)
      .def("log_operator_norm", &ScaledMatrix::log_operator_norm)
      .def("dense", &ScaledMatrix::dense);

  py::class_<CocycleSystem>(m, "CocycleSystem")
      .def_property_readonly("dimension", &CocycleSystem::dimension)
      .def_property_readonly("steps_per_unit", &CocycleSystem::steps_per_unit)
      .def_property_readonly("grid_step", &CocycleSystem::grid_step)
      .def_property_readonly("name", &CocycleSystem::name)
      .def("evolve", &CocycleSystem::evolve, py::arg("t"), py::arg("omega"), py::arg("z"))
      .def("jacobian_product", &CocycleSystem::jacobian_product, py::arg("n"), py::arg("omega"),
           py::arg("z"))
      .def("phi_n",
           [](const CocycleSystem& sys, int n, const NoisePath& omega, const CylinderState& z) {
             return sys.phi_n(n, omega, z).value;
           },
           py::arg("n"), py::arg("omega"), py::arg("z"));

  m.def("model_names", [] {
    std::vector<std::string> names;
    for (const auto& e : model_zoo()) names.push_back(e.name);
    return names;
  });
  m.def("build_model", &build_model, py::arg("name"), py::arg("params") = ModelParams{},
        py::arg("steps_per_unit") = 512);

  py::class_<LyapunovEstimate>(m, "LyapunovEstimate")
      .def_readonly("exponents", &LyapunovEstimate::exponents)
      .def_readonly("standard_error", &LyapunovEstimate::standard_error)
      .def_readonly("degenerate_warning", &LyapunovEstimate::degenerate_warning);
  m.def("estimate_spectrum", &estimate_spectrum, py::arg("sys"), py::arg("omega"), py::arg("z"),
        py::arg("n_steps"), py::arg("qr_stride"));

  py::class_<FibreCloud>(m, "FibreCloud")
      .def_readonly("bins", &FibreCloud::bins)
      .def_readonly("bin_width", &FibreCloud::bin_width)
      .def_readonly("accepted", &FibreCloud::accepted)
      .def_readonly("convergence_gap", &FibreCloud::convergence_gap)
      .def_readonly("tol_k", &FibreCloud::tol_k)
      .def("bin_s", &FibreCloud::bin_s, py::arg("bin"))
      .def("bin_points", [](const FibreCloud& c, int b) { return c.points.at(b); }, py::arg("bin"))
      .def("total_points", &FibreCloud::total_points);

  m.def(
      "pullback_attractor",
      [](const CocycleSystem& sys, const NoisePath& omega, const Eigen::VectorXd& box_min,
         const Eigen::VectorXd& box_max, int grid, double horizon, int bins, double tol_k) {
        PullbackParams p;
        p.box_min = box_min;
        p.box_max = box_max;
        p.grid_per_axis = grid;
        p.horizon = horizon;
        p.bins = bins;
        p.tol_k = tol_k;
        return pullback_attractor(sys, omega, p);
      },
      py::arg("sys"), py::arg("omega"), py::arg("box_min"), py::arg("box_max"),
      py::arg("grid") = 8, py::arg("horizon") = 50.0, py::arg("bins") = 256,
      py::arg("tol_k") = 0.0);

  py::class_<CardinalityReport>(m, "CardinalityReport")
      .def_readonly("n", &CardinalityReport::n)
      .def_readonly("min_separation", &CardinalityReport::min_separation)
      .def_readonly("per_bin", &CardinalityReport::per_bin)
      .def_readonly("flagged_bins", &CardinalityReport::flagged_bins);
  m.def("fibre_cardinality", &fibre_cardinality, py::arg("cloud"), py::arg("gap_threshold"));

  py::class_<CoveringProfile>(m, "CoveringProfile")
      .def_readonly("eps", &CoveringProfile::eps)
      .def_readonly("upper", &CoveringProfile::upper)
      .def_readonly("lower", &CoveringProfile::lower)
      .def_readonly("max_upper", &CoveringProfile::max_upper);
  m.def("covering_number", &covering_number, py::arg("cloud"), py::arg("eps"));

  py::class_<PeriodicCurve>(m, "PeriodicCurve")
      .def_readonly("period", &PeriodicCurve::period)
      .def_readonly("labels", &PeriodicCurve::labels)
      .def_readonly("samples", &PeriodicCurve::samples);
  py::class_<PeriodicCurveSet>(m, "PeriodicCurveSet")
      .def_readonly("curves", &PeriodicCurveSet::curves)
      .def_readonly("permutation", &PeriodicCurveSet::permutation)
      .def_readonly("bins", &PeriodicCurveSet::bins)
      .def("period_multiset", &PeriodicCurveSet::period_multiset);
  m.def(
      "extract_periodic_curves",
      [](const FibreCloud& cloud, int strips, double jump_threshold, double cluster_cut,
         double tol_match) {
        ExtractionParams p;
        p.strips = strips;
        p.jump_threshold = jump_threshold;
        p.cluster_cut = cluster_cut;
        p.tol_match = tol_match;
        return extract_periodic_curves(cloud, p);
      },
      py::arg("cloud"), py::arg("strips") = 8, py::arg("jump_threshold") = 0.0,
      py::arg("cluster_cut") = 0.0, py::arg("tol_match") = 0.0);

  py::class_<PeriodicityReport>(m, "PeriodicityReport")
      .def_readonly("pass_", &PeriodicityReport::pass)
      .def_readonly("residuals", &PeriodicityReport::residuals)
      .def_readonly("failure", &PeriodicityReport::failure)
      .def_readonly("tol", &PeriodicityReport::tol);
  m.def("verify_random_periodicity", &verify_random_periodicity, py::arg("sys"),
        py::arg("at_omega"), py::arg("at_shifted"), py::arg("k"), py::arg("tol_period"));

  py::class_<EmpiricalRandomMeasure>(m, "EmpiricalRandomMeasure")
      .def_readonly("horizon", &EmpiricalRandomMeasure::horizon);
  m.def("krylov_bogolyubov", &krylov_bogolyubov, py::arg("sys"), py::arg("omega"), py::arg("nu0"),
        py::arg("N"));
  m.def("measure_mean_distance", &measure_mean_distance, py::arg("mu"), py::arg("curve"),
        py::arg("winding") = 1);

  m.def("forced_contraction_curve", &forced_contraction_curve, py::arg("s"));
}

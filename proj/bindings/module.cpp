// Python bindings for the main operations: datasets, link families, penalized
// fitting, block-jackknife inference, the single-sample distribution
// estimator, the simulation harness, and the efficient-information bound.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cstrans/data.hpp"
#include "cstrans/families.hpp"
#include "cstrans/fit.hpp"
#include "cstrans/inference.hpp"
#include "cstrans/information.hpp"
#include "cstrans/isotonic.hpp"
#include "cstrans/simulate.hpp"

namespace py = pybind11;
using namespace cstrans;

namespace {

Eigen::VectorXd map_curve(const std::function<double(double)>& f,
                          const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

Eigen::MatrixXd replicate_betas(const StudyResult& s) {
  int used = 0;
  for (const auto& r : s.replicates)
    if (r.converged) ++used;
  Eigen::MatrixXd betas(used, s.config.design.beta0.size());
  int row = 0;
  for (const auto& r : s.replicates)
    if (r.converged) betas.row(row++) = r.beta_hat.transpose();
  return betas;
}

}  // namespace

PYBIND11_MODULE(_cstrans, m) {
  m.doc() = "Partly linear transformation models for current status data";
  m.attr("__version__") = "0.1.0";

  py::class_<B5dReport>(m, "B5dReport")
      .def_readonly("min_event", &B5dReport::min_event)
      .def_readonly("min_censored", &B5dReport::min_censored)
      .def_readonly("argmin_event", &B5dReport::argmin_event)
      .def_readonly("argmin_censored", &B5dReport::argmin_censored)
      .def_readonly("satisfied", &B5dReport::satisfied)
      .def("__repr__", [](const B5dReport& r) {
        return std::string("B5dReport(satisfied=") +
               (r.satisfied ? "True" : "False") + ")";
      });

  py::class_<LinkFamily>(m, "LinkFamily")
      .def_property_readonly("name", &LinkFamily::name)
      .def("cdf", &LinkFamily::cdf, py::arg("t"))
      .def("quantile", &LinkFamily::quantile, py::arg("p"))
      .def("log_cdf", &LinkFamily::log_cdf, py::arg("t"))
      .def("log_sf", &LinkFamily::log_sf, py::arg("t"))
      .def(
          "q",
          [](const LinkFamily& f, int delta, double t) {
            const QEval r = f.q(delta, t);
            return py::make_tuple(r.q, r.q1, r.q2);
          },
          py::arg("delta"), py::arg("t"),
          "Log-likelihood kernel value and its first two t-derivatives")
      .def("check_b5d", &LinkFamily::check_b5d, py::arg("lo") = -10.0,
           py::arg("hi") = 10.0, py::arg("step") = 0.01)
      .def("__repr__",
           [](const LinkFamily& f) { return "LinkFamily('" + f.name() + "')"; });

  m.def("family", &LinkFamily::parse, py::arg("spec"),
        "Parse a link family: cloglog | logit | pareto:<g> | probit | "
        "gnorm:<g> | cauchy");

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&Dataset::from_columns), py::arg("v"), py::arg("delta"),
           py::arg("z"), py::arg("w"),
           "Current status sample; rows are sorted by censoring time v")
      .def_readonly("v", &Dataset::v)
      .def_readonly("delta", &Dataset::delta)
      .def_readonly("z", &Dataset::z)
      .def_readonly("w", &Dataset::w)
      .def("__len__", &Dataset::n)
      .def_property_readonly("d", &Dataset::d);

  m.def("read_csv", &read_csv, py::arg("path"));
  m.def("write_csv", &write_csv, py::arg("data"), py::arg("path"));

  py::class_<ModelParams>(m, "ModelParams")
      .def_readonly("beta", &ModelParams::beta)
      .def(
          "h_at",
          [](const ModelParams& p, const Eigen::VectorXd& w) {
            return map_curve([&](double x) { return p.h(x); }, w);
          },
          py::arg("w"), "Smooth effect h evaluated on an array")
      .def(
          "H_at",
          [](const ModelParams& p, const Eigen::VectorXd& v) {
            return map_curve([&](double x) { return p.H(x); }, v);
          },
          py::arg("v"), "Monotone transform H evaluated on an array")
      .def_property_readonly(
          "H_sites",
          [](const ModelParams& p) {
            return Eigen::Map<const Eigen::VectorXd>(
                       p.H.sites().data(),
                       static_cast<Eigen::Index>(p.H.sites().size()))
                .eval();
          })
      .def_property_readonly(
          "H_values",
          [](const ModelParams& p) {
            return Eigen::Map<const Eigen::VectorXd>(
                       p.H.values().data(),
                       static_cast<Eigen::Index>(p.H.values().size()))
                .eval();
          })
      .def("predictor", &ModelParams::predictor, py::arg("z"), py::arg("w"),
           py::arg("v"));

  py::class_<FitDiagnostics>(m, "FitDiagnostics")
      .def_readonly("objective_trace", &FitDiagnostics::objective_trace)
      .def_readonly("fenchel_ineq", &FitDiagnostics::fenchel_ineq)
      .def_readonly("fenchel_eq", &FitDiagnostics::fenchel_eq)
      .def_readonly("grad_norm", &FitDiagnostics::grad_norm)
      .def_readonly("outer_iterations", &FitDiagnostics::outer_iterations)
      .def_readonly("converged", &FitDiagnostics::converged)
      .def_readonly("warnings", &FitDiagnostics::warnings);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("params", &FitResult::params)
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("penalty", &FitResult::penalty)
      .def_readonly("objective", &FitResult::objective)
      .def_readonly("lam", &FitResult::lambda)
      .def_readonly("diag", &FitResult::diag)
      .def("__repr__", [](const FitResult& r) {
        return "FitResult(converged=" +
               std::string(r.diag.converged ? "True" : "False") +
               ", objective=" + std::to_string(r.objective) + ")";
      });

  m.def(
      "fit",
      [](const Dataset& data, const LinkFamily& fam, double lam,
         int interior_knots, double stat_tol, int max_outer,
         std::uint64_t seed) {
        FitConfig c;
        c.lambda = lam;
        c.interior_knots = interior_knots;
        c.stat_tol = stat_tol;
        c.max_outer = max_outer;
        c.seed = seed;
        return fit(data, fam, c);
      },
      py::arg("data"), py::arg("family"), py::arg("lam") = -1.0,
      py::arg("interior_knots") = -1, py::arg("stat_tol") = 1e-6,
      py::arg("max_outer") = 200, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Penalized maximum likelihood fit; lam < 0 selects n^(-1/3)");

  py::class_<JackknifeResult>(m, "JackknifeResult")
      .def_readonly("beta_hat", &JackknifeResult::beta_hat)
      .def_readonly("block_betas", &JackknifeResult::block_betas)
      .def_readonly("scatter", &JackknifeResult::scatter)
      .def_readonly("n", &JackknifeResult::n)
      .def_readonly("m", &JackknifeResult::m)
      .def_readonly("k", &JackknifeResult::k)
      .def_readonly("n_used", &JackknifeResult::n_used)
      .def_readonly("level", &JackknifeResult::level)
      .def_readonly("reliable", &JackknifeResult::reliable)
      .def_readonly("failed_blocks", &JackknifeResult::failed_blocks)
      .def("statistic", &JackknifeResult::statistic, py::arg("beta0"))
      .def("critical", &JackknifeResult::critical, py::arg("level"))
      .def("covers", &JackknifeResult::covers, py::arg("beta0"))
      .def("marginal_halfwidth", &JackknifeResult::marginal_halfwidth,
           py::arg("r"))
      .def("covers_marginal", &JackknifeResult::covers_marginal, py::arg("r"),
           py::arg("beta0_r"));

  m.def(
      "block_jackknife",
      [](const Dataset& data, const LinkFamily& fam, int blocks, double level,
         std::uint64_t seed, bool center_at_full, double lam) {
        JackknifeConfig c;
        c.m = blocks;
        c.level = level;
        c.seed = seed;
        c.center_at_full = center_at_full;
        c.fit.lambda = lam;
        return block_jackknife(data, fam, c);
      },
      py::arg("data"), py::arg("family"), py::arg("m") = 10,
      py::arg("level") = 0.95, py::arg("seed") = 0,
      py::arg("center_at_full") = false, py::arg("lam") = -1.0,
      py::call_guard<py::gil_scoped_release>(),
      "Delete-one-block-in-m jackknife with F-calibrated regions");

  m.def(
      "npmle",
      [](const std::vector<int>& delta) { return npmle_single_sample(delta); },
      py::arg("delta"),
      "Single-sample distribution estimate from indicators sorted by "
      "censoring time");

  py::class_<CoverageSummary>(m, "CoverageSummary")
      .def_readonly("m", &CoverageSummary::m)
      .def_readonly("marginal", &CoverageSummary::marginal)
      .def_readonly("joint", &CoverageSummary::joint)
      .def_readonly("used", &CoverageSummary::used);

  py::class_<StudyResult>(m, "StudyResult")
      .def_property_readonly("n", [](const StudyResult& s) { return s.config.n; })
      .def_property_readonly("reps",
                             [](const StudyResult& s) { return s.config.reps; })
      .def_readonly("failed_fits", &StudyResult::failed_fits)
      .def("beta_mean", &StudyResult::beta_mean)
      .def("beta_sd", &StudyResult::beta_sd)
      .def("coverage", &StudyResult::coverage, py::arg("m_index"))
      .def("betas", &replicate_betas,
           "Estimates from converged replicates, one row per replicate");

  m.def(
      "run_study",
      [](int n, int reps, std::uint64_t seed, std::vector<int> m_values,
         double level, int workers) {
        StudyConfig c;
        c.n = n;
        c.reps = reps;
        c.seed = seed;
        if (!m_values.empty()) c.m_values = std::move(m_values);
        c.level = level;
        c.workers = workers;
        return run_study(c);
      },
      py::arg("n") = 400, py::arg("reps") = 200, py::arg("seed") = 1,
      py::arg("m_values") = std::vector<int>{10, 40}, py::arg("level") = 0.95,
      py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>(),
      "Monte Carlo study on the built-in design: fits plus jackknife coverage");

  py::class_<BiasResult>(m, "BiasResult")
      .def_readonly("at_first", &BiasResult::at_first)
      .def_readonly("at_last", &BiasResult::at_last)
      .def_readonly("truth_low", &BiasResult::truth_low)
      .def_readonly("truth_high", &BiasResult::truth_high)
      .def("mean_first", &BiasResult::mean_first)
      .def("mean_last", &BiasResult::mean_last)
      .def("freq_low", &BiasResult::freq_low, py::arg("eps"));

  m.def(
      "bias_experiment",
      [](int n, int reps, std::uint64_t seed) {
        BiasConfig c;
        c.n = n;
        c.reps = reps;
        c.seed = seed;
        return bias_experiment(c);
      },
      py::arg("n") = 20000, py::arg("reps") = 500, py::arg("seed") = 1,
      py::call_guard<py::gil_scoped_release>(),
      "Boundary bias of the single-sample estimator at the censoring support "
      "edges");

  py::class_<EfficientScorePieces>(m, "EfficientScorePieces")
      .def_readonly("h_tilde", &EfficientScorePieces::h_tilde)
      .def_readonly("q_tilde", &EfficientScorePieces::q_tilde)
      .def_readonly("I0", &EfficientScorePieces::I0)
      .def_readonly("series_terms", &EfficientScorePieces::series_terms)
      .def_readonly("series_increment", &EfficientScorePieces::series_increment);

  m.def(
      "efficient_information",
      [](int grid_points, double tol, int max_terms) {
        const DesignSpec spec = study_design(grid_points);
        const HStarResult hs = hstar_series(spec, tol, max_terms);
        return efficient_information(spec, hs);
      },
      py::arg("grid_points") = 201, py::arg("tol") = 1e-8,
      py::arg("max_terms") = 200, py::call_guard<py::gil_scoped_release>(),
      "Efficient score pieces and information matrix for the built-in design");
}

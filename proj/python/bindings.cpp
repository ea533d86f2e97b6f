#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "drcate/asymptotics.hpp"
#include "drcate/bandwidth.hpp"
#include "drcate/config.hpp"
#include "drcate/error.hpp"
#include "drcate/kernels.hpp"
#include "drcate/outputs.hpp"
#include "drcate/simulation.hpp"

namespace py = pybind11;
using namespace drcate;

namespace {

KernelFamily family_of(const std::string& name) { return parse_kernel(name + ":2", 1).family; }

py::dict rate_report_dict(const RateReport& report) {
  const auto texts = [](const std::vector<RateCondition>& list) {
    std::vector<std::string> out;
    for (const auto& c : list) out.push_back(c.inequality);
    return out;
  };
  py::dict out;
  out["satisfied"] = report.satisfied();
  out["violated"] = texts(report.violated);
  out["boundary"] = texts(report.boundary);
  return out;
}

py::dict curve_dict(const CateCurve& curve) {
  std::vector<double> x1;
  std::vector<std::optional<double>> tau, f, v, lo, hi;
  std::vector<std::size_t> n_eff;
  for (std::size_t g = 0; g < curve.points.size(); ++g) {
    const auto& p = curve.points[g];
    x1.push_back(p.x1[0]);
    tau.push_back(p.tau_hat);
    f.push_back(p.f_hat);
    v.push_back(p.v_hat);
    const auto band = curve.band(g);
    lo.push_back(band ? std::optional(band->first) : std::nullopt);
    hi.push_back(band ? std::optional(band->second) : std::nullopt);
    n_eff.push_back(p.n_eff);
  }
  py::dict out;
  out["x1"] = x1;
  out["tau_hat"] = tau;
  out["f_hat"] = f;
  out["v_hat"] = v;
  out["ci_lo"] = lo;
  out["ci_hi"] = hi;
  out["n_eff"] = n_eff;
  out["h1"] = curve.h1;
  return out;
}

py::dict report_dict(const McReport& report) {
  py::list rows;
  for (const auto& r : report.rows) {
    py::dict row;
    row["x1"] = r.x1;
    row["bias"] = r.bias;
    row["sam_sd"] = r.sam_sd;
    row["mse"] = r.mse;
    row["p05"] = r.p05;
    row["p95"] = r.p95;
    row["mean_t"] = r.mean_t;
    row["sam_sd_se"] = r.sam_sd_se;
    rows.append(row);
  }
  py::dict out;
  out["combination"] = report.combination;
  out["n"] = report.n;
  out["reps"] = report.reps;
  out["successes"] = report.successes;
  out["failures"] = report.failures;
  out["failure_reasons"] = report.failure_reasons;
  out["valid"] = report.valid;
  out["h1"] = report.h1;
  out["rows"] = rows;
  return out;
}

}  // namespace

PYBIND11_MODULE(_drcate, m) {
  m.doc() = "Doubly robust CATE estimation with kernel-smoothed pseudo-outcomes";

  auto base = py::register_exception<Error>(m, "DrcateError", PyExc_RuntimeError);
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<RankError>(m, "RankError", base.ptr());
  py::register_exception<EmptyWindowError>(m, "EmptyWindowError", base.ptr());
  py::register_exception<DegenerateStructureError>(m, "DegenerateStructureError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());

  m.def(
      "kernel_eval",
      [](const std::string& family, int order, std::vector<double> u) {
        return kernel_eval(KernelSpec{family_of(family), order, static_cast<int>(u.size())}, u);
      },
      py::arg("family"), py::arg("order"), py::arg("u"), "Product kernel at the point u.");
  m.def(
      "kernel_moment",
      [](const std::string& family, int order, int j) { return kernel_moment(KernelSpec{family_of(family), order, 1}, j); },
      py::arg("family"), py::arg("order"), py::arg("j"));
  m.def(
      "kernel_roughness",
      [](const std::string& family, int order, int dim) {
        return kernel_roughness(KernelSpec{family_of(family), order, dim});
      },
      py::arg("family"), py::arg("order"), py::arg("dim") = 1);

  m.def("vd", &vd, py::arg("p1"), py::arg("p2"));
  m.def("true_tau", &true_tau, py::arg("x1"));

  m.def(
      "default_bandwidth",
      [](const std::string& model, double n) { return default_schedule(parse_model(model)).schedule.resolve(1, n); },
      py::arg("model"), py::arg("n"));

  m.def(
      "check_rates",
      [](const std::string& model, const std::string& scenario, std::optional<double> eta1) {
        auto defaults = default_schedule(parse_model(model));
        if (eta1) defaults.schedule.set(1, {defaults.schedule.at(1).scale, *eta1});
        return rate_report_dict(check_rate_conditions(defaults.schedule, defaults.orders, defaults.d, defaults.k,
                                                      parse_rate_scenario(scenario)));
      },
      py::arg("model") = "model1", py::arg("scenario") = "all-correct", py::arg("eta1") = py::none(),
      "Rate conditions for the model's default schedule, optionally with eta1 replaced.");

  m.def(
      "generate",
      [](const std::string& model, Eigen::Index n, std::uint64_t seed, std::uint64_t replication) {
        auto rng = replication_stream(seed, replication);
        const auto s = generate(parse_model(model), n, rng);
        py::dict out;
        out["x"] = s.data.x();
        out["y"] = s.data.y();
        out["d"] = s.data.d();
        out["p"] = s.truth.p;
        out["m1"] = s.truth.m1;
        out["m0"] = s.truth.m0;
        return out;
      },
      py::arg("model"), py::arg("n"), py::arg("seed") = 20240601, py::arg("replication") = 1);

  m.def(
      "estimate",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& d, const std::string& config) {
        const auto parsed = parse_config(config);
        std::optional<EstimateResult> estimated;
        {
          py::gil_scoped_release release;
          estimated = run_estimate(parsed, Dataset(x, {0}, y, d));
        }
        const auto& result = *estimated;
        auto out = curve_dict(result.curve);
        out["p_hat"] = result.fit.p_hat;
        out["m1_hat"] = result.fit.m1_hat;
        out["m0_hat"] = result.fit.m0_hat;
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("d"), py::arg("config") = "{}",
      "CATE curve on arrays; column 0 of x is X1. `config` is a JSON run configuration.");

  m.def(
      "simulate",
      [](const std::string& config) {
        const auto mc = to_mc_config(parse_config(config));
        McReport report;
        {
          py::gil_scoped_release release;
          report = run_mc(mc);
        }
        return report_dict(report);
      },
      py::arg("config") = "{}", "Monte Carlo summary for a JSON run configuration.");

  m.def(
      "config_hash", [](const std::string& config) { return hash_hex(config_hash(parse_config(config))); },
      py::arg("config"));
  m.def(
      "canonical_config", [](const std::string& config) { return serialize_config(parse_config(config)); },
      py::arg("config"));
  m.def("combinations", &combination_labels);
}

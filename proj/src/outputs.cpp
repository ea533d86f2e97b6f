#include "drcate/outputs.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "drcate/error.hpp"

namespace drcate {

namespace {

using OrderedJson = nlohmann::ordered_json;

std::vector<std::string> x1_header(Eigen::Index k) {
  if (k == 1) return {"x1"};
  std::vector<std::string> out;
  for (Eigen::Index c = 0; c < k; ++c) out.push_back("x1_" + std::to_string(c + 1));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::filesystem::path prepare(const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  return out_dir;
}

std::string file_tag(const std::string& combination) {
  std::string out;
  for (char c : combination)
    if (c != '(' && c != ')' && c != ' ') out += c == ',' ? '_' : c;
  return out;
}

}  // namespace

CsvTable fitted_table(const NuisanceFit& fit) {
  CsvTable table{{"i", "p_hat", "m1_hat", "m0_hat"}, {}};
  for (Eigen::Index i = 0; i < fit.p_hat.size(); ++i)
    table.rows.push_back({static_cast<double>(i + 1), fit.p_hat[i], fit.m1_hat[i], fit.m0_hat[i]});
  return table;
}

CsvTable curve_table(const CateCurve& curve, double z) {
  CsvTable table;
  const Eigen::Index k = curve.points.empty() ? 1 : curve.points.front().x1.size();
  table.header = x1_header(k);
  for (const char* name : {"tau_hat", "f_hat", "v_hat", "ci_lo", "ci_hi", "n_eff"}) table.header.emplace_back(name);
  for (std::size_t g = 0; g < curve.points.size(); ++g) {
    const auto& point = curve.points[g];
    std::vector<CsvCell> row(point.x1.data(), point.x1.data() + point.x1.size());
    row.push_back(point.tau_hat);
    row.push_back(point.f_hat);
    row.push_back(point.v_hat);
    const auto band = curve.band(g, z);
    row.push_back(band ? CsvCell(band->first) : std::nullopt);
    row.push_back(band ? CsvCell(band->second) : std::nullopt);
    row.push_back(static_cast<double>(point.n_eff));
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable replications_table(const McReport& report) {
  CsvTable table{{"r", "x1", "tau_hat", "T"}, {}};
  for (const auto& rec : report.records)
    table.rows.push_back({static_cast<double>(rec.replication), rec.x1, rec.tau_hat, rec.t_stat});
  return table;
}

CsvTable summary_table(const McReport& report) {
  CsvTable table{{"x1", "bias", "sam_sd", "mse", "p05", "p95", "mean_t", "sam_sd_se"}, {}};
  for (const auto& row : report.rows)
    table.rows.push_back({row.x1, row.bias, row.sam_sd, row.mse, row.p05, row.p95, row.mean_t, row.sam_sd_se});
  return table;
}

CsvTable vd_table(const std::vector<double>& p1, int points, double xi_sq) {
  if (points < 1) throw ArgumentError("grid needs at least one point");
  CsvTable table{{"p1", "p2", "vd", "sigma2_minus_sigma1"}, {}};
  for (double a : p1) {
    for (int i = 1; i <= points; ++i) {
      const double b = static_cast<double>(i) / (points + 1);
      table.rows.push_back({a, b, vd(a, b), sigma2_minus_sigma1_homoscedastic(a, b, xi_sq)});
    }
  }
  return table;
}

CsvTable variance_curve_table(const std::vector<VarianceCurvePoint>& points) {
  CsvTable table;
  const Eigen::Index k = points.empty() ? 1 : points.front().x1.size();
  table.header = x1_header(k);
  for (const char* name : {"v1", "v2", "v3", "v4", "bias"}) table.header.emplace_back(name);
  for (const auto& p : points) {
    std::vector<CsvCell> row(p.x1.data(), p.x1.data() + p.x1.size());
    row.insert(row.end(), {p.v1, p.v2, p.v3, p.v4, p.bias});
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string mc_manifest(const McReport& report, const RunConfig& config) {
  OrderedJson j;
  j["command"] = "simulate";
  j["seed"] = config.seed;
  j["config_hash"] = hash_hex(config_hash(config));
  j["model"] = to_string(report.model);
  j["combination"] = report.combination;
  j["n"] = report.n;
  j["reps"] = report.reps;
  j["h1"] = report.h1;
  j["successes"] = report.successes;
  j["failures"] = report.failures;
  j["failure_reasons"] = report.failure_reasons;
  j["empty_window_fallbacks"] = report.empty_windows;
  j["valid"] = report.valid;
  j["threads"] = config.threads;
  j["runtime_seconds"] = report.runtime_seconds;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

EstimateResult run_estimate(const RunConfig& config) {
  const auto& settings = config.estimate;
  if (settings.data.empty()) throw ConfigError("estimate.data: no dataset path given");
  return run_estimate(config, dataset_from_csv(read_csv_file(settings.data), settings.x1_columns));
}

EstimateResult run_estimate(const RunConfig& config, const Dataset& data) {
  const auto& settings = config.estimate;
  const int d = data.covariate_dim();
  const int k = data.conditioning_dim();
  if (k != 1) throw ConfigError("estimate: the evaluation grid supports a scalar X1 only");

  const auto schedule = effective_schedule(config);
  auto kernels = effective_kernels(config);
  kernels[1].dim = k;
  for (int role : {2, 3, 4}) kernels[role].dim = d;
  kernels[5].dim = settings.propensity_sdr_dim;
  kernels[6].dim = kernels[7].dim = settings.outcome_sdr_dim;
  const auto n = static_cast<double>(data.n());

  const auto component = [&](NuisanceMethod method, FeatureMap features, int np_role, int sp_role, int sdr_dim) {
    ComponentConfig c;
    c.method = method;
    c.features = features;
    if (method == NuisanceMethod::Nonparametric) {
      c.kernel = kernels.at(np_role);
      c.bandwidth = schedule.resolve(np_role, n);
    } else if (method == NuisanceMethod::Semiparametric) {
      if (sdr_dim > d) throw ConfigError("estimate: reduced dimension exceeds the covariate dimension");
      c.kernel = kernels.at(sp_role);
      c.bandwidth = schedule.resolve(sp_role, n);
      c.sdr.target_dim = sdr_dim;
    }
    return c;
  };
  NuisanceConfig nuisance;
  nuisance.trim = config.trim;
  nuisance.propensity =
      component(settings.propensity, settings.propensity_features, 2, 5, settings.propensity_sdr_dim);
  nuisance.outcome1 = component(settings.outcome, settings.outcome_features, 3, 6, settings.outcome_sdr_dim);
  nuisance.outcome0 = component(settings.outcome, settings.outcome_features, 4, 7, settings.outcome_sdr_dim);

  EstimateResult result{assemble_nuisance(data, nuisance), {}};
  const double h1 = schedule.resolve(1, n);
  result.curve = estimate_cate(data, result.fit, scalar_grid(config.grid), kernels.at(1), h1);
  attach_plugin_variance(result.curve, data.x1(), pseudo_outcomes(data, result.fit));
  return result;
}

int cmd_estimate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
  const auto result = run_estimate(config);
  const auto dir = prepare(out_dir);
  write_csv_file(dir / "fitted.csv", fitted_table(result.fit));
  write_csv_file(dir / "curve.csv", curve_table(result.curve));
  OrderedJson j;
  j["command"] = "estimate";
  j["data"] = config.estimate.data;
  j["config_hash"] = hash_hex(config_hash(config));
  j["n"] = result.curve.n;
  j["h1"] = result.curve.h1;
  j["missing_points"] = result.curve.missing_points;
  j["empty_window_fallbacks"] = result.fit.empty_windows;
  j["band"] = "tau_hat +- 1.96 sqrt(v_hat / (n h1^k)), no bias correction (h1 undersmooths)";
  write_text(dir / "manifest.json", j.dump(2) + "\n");
  log << "wrote " << (dir / "fitted.csv").string() << ", " << (dir / "curve.csv").string() << ", "
      << (dir / "manifest.json").string() << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
  const auto report = run_mc(to_mc_config(config));
  const auto dir = prepare(out_dir);
  const std::string tag = file_tag(report.combination);
  write_csv_file(dir / ("replications_" + tag + ".csv"), replications_table(report));
  write_csv_file(dir / ("summary_" + tag + ".csv"), summary_table(report));
  write_text(dir / ("manifest_" + tag + ".json"), mc_manifest(report, config));
  log << report.combination << " " << to_string(report.model) << " n=" << report.n << " R=" << report.reps
      << " failures=" << report.failures << (report.valid ? "" : " (INVALID: more than 1% failed)") << "\n";
  log << std::setw(8) << "x1" << std::setw(12) << "bias" << std::setw(12) << "sam_sd" << std::setw(12) << "mse"
      << std::setw(8) << "p05" << std::setw(8) << "p95" << "\n";
  for (const auto& row : report.rows)
    log << std::fixed << std::setprecision(4) << std::setw(8) << row.x1 << std::setw(12) << row.bias
        << std::setw(12) << row.sam_sd << std::setw(12) << row.mse << std::setw(8) << row.p05 << std::setw(8)
        << row.p95 << "\n";
  log.unsetf(std::ios::floatfield);
  log << "wrote " << dir.string() << "/{replications,summary,manifest}_" << tag << "\n";
  return report.valid ? 0 : 2;
}

int cmd_variance_curves(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
  const auto& v = config.variance;
  const auto dir = prepare(out_dir);
  write_csv_file(dir / "vd_grid.csv", vd_table(v.p1, v.points, v.xi_sq));
  log << "wrote " << (dir / "vd_grid.csv").string() << "\n";
  if (v.population_n == 0) return 0;

  WorkingModels working;
  if (!v.propensity_working.empty()) working.propensity = parse_feature_map(v.propensity_working);
  if (!v.outcome_working.empty()) working.outcome = parse_feature_map(v.outcome_working);
  auto calibration_rng = replication_stream(config.seed, 1);
  auto target_rng = replication_stream(config.seed, 2);
  const auto calibration = population_sample(config.model, v.population_n, calibration_rng);
  const auto target = population_sample(config.model, v.population_n, target_rng);
  const auto limits = limiting_models(calibration, target, working);
  const auto kernels = effective_kernels(config);
  const double h1 = effective_schedule(config).resolve(1, static_cast<double>(config.n));
  const auto curves = variance_curves(target, limits, scalar_grid(config.grid), kernels.at(1), h1);
  write_csv_file(dir / "variance_curves.csv", variance_curve_table(curves));
  log << "wrote " << (dir / "variance_curves.csv").string() << "\n";
  return 0;
}

RateReport check_config_rates(const RunConfig& config) {
  const auto defaults = default_schedule(config.model);
  const auto orders = config.rates.orders.empty() ? defaults.orders : config.rates.orders;
  const int d = config.rates.d > 0 ? config.rates.d : defaults.d;
  return check_rate_conditions(effective_schedule(config), orders, d, config.rates.k, config.rates.scenario);
}

std::string format_rate_report(const RateReport& report, RateScenario scenario) {
  std::ostringstream out;
  out << "scenario: " << to_string(scenario) << "\n";
  const auto line = [&](const RateCondition& c) {
    out << "  " << c.statement << "  [" << c.inequality << ": " << c.lhs << (c.closed ? " >= " : " > ") << c.rhs
        << "]\n";
  };
  if (report.satisfied()) {
    out << "all conditions satisfied\n";
  } else {
    out << report.violated.size() << " condition(s) violated:\n";
    for (const auto& c : report.violated) line(c);
  }
  if (!report.boundary.empty()) {
    out << report.boundary.size() << " condition(s) hold with equality (accepted):\n";
    for (const auto& c : report.boundary) line(c);
  }
  return out.str();
}

int cmd_check_rates(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
  const auto text = format_rate_report(check_config_rates(config), config.rates.scenario);
  const auto dir = prepare(out_dir);
  write_text(dir / "rates.txt", text);
  log << text;
  return 0;
}

int cmd_kernel_moments(std::ostream& log) {
  log << std::setw(14) << "kernel";
  for (int j = 0; j <= 6; ++j) log << std::setw(14) << ("m" + std::to_string(j));
  log << std::setw(14) << "roughness" << "\n";
  for (auto family : {KernelFamily::Gaussian, KernelFamily::Epanechnikov}) {
    for (int order : {2, 4, 6}) {
      const KernelSpec spec{family, order, 1};
      log << std::setw(14) << to_string(spec);
      for (int j = 0; j <= 6; ++j) log << std::setw(14) << std::setprecision(6) << kernel_moment(spec, j);
      log << std::setw(14) << kernel_roughness(spec) << "\n";
    }
  }
  return 0;
}

}  // namespace drcate

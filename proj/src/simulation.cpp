#include "drcate/simulation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "drcate/error.hpp"
#include "drcate/estimator.hpp"

namespace drcate {

namespace {

constexpr double kNoiseSd = 0.25;
constexpr double kUpperNormalQuantile = 1.6448536269514722;  // Phi^-1(0.95)

double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

struct Draws {
  Eigen::MatrixXd x;
  Eigen::VectorXd y, d, p, m1, m0, y1, y0;
};

Draws draw(Model model, Eigen::Index n, RandomStream& rng) {
  if (n < 1) throw ArgumentError("sample size must be positive");
  const int dim = covariate_dim(model);
  Draws out;
  out.x.resize(n, dim);
  for (auto* v : {&out.y, &out.d, &out.p, &out.m1, &out.m0, &out.y1, &out.y0}) v->resize(n);
  Eigen::VectorXd rho(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < dim; ++c) rho[c] = rng.uniform(-0.5, 0.5);
    const double eps = kNoiseSd * rng.normal();
    const double u = rng.uniform();
    const auto obs = model_observation(model, rho, eps, u);
    out.x.row(i) = obs.x.transpose();
    out.y[i] = obs.y;
    out.d[i] = obs.d;
    out.p[i] = obs.p;
    out.m1[i] = obs.m1;
    out.m0[i] = obs.m0;
    out.y1[i] = obs.y1;
    out.y0[i] = obs.y0;
  }
  return out;
}

SimSample to_sample(Draws draws) {
  Dataset data(draws.x, {0}, draws.y, draws.d);
  return SimSample{std::move(data), OracleValues{std::move(draws.p), std::move(draws.m1), std::move(draws.m0)},
                   std::move(draws.y1), std::move(draws.y0)};
}

PopulationSample to_population(Draws draws) {
  PopulationSample out;
  out.x1 = draws.x.col(0);
  out.x = std::move(draws.x);
  out.y = std::move(draws.y);
  out.d = std::move(draws.d);
  out.p = std::move(draws.p);
  out.m1 = std::move(draws.m1);
  out.m0 = std::move(draws.m0);
  return out;
}

Eigen::MatrixXd working_features(const Eigen::MatrixXd& x, FeatureMap map) {
  const Eigen::Index n = x.rows();
  const Eigen::Index cols = map == FeatureMap::InterceptX1 ? 1 : x.cols();
  const Eigen::Index extra = map == FeatureMap::InterceptAllProduct ? 1 : 0;
  Eigen::MatrixXd out(n, 1 + cols + extra);
  out.col(0).setOnes();
  out.middleCols(1, cols) = x.leftCols(cols);
  if (extra) out.col(out.cols() - 1) = x.rowwise().prod();
  return out;
}

std::vector<Eigen::Index> rows_where(const Eigen::VectorXd& d, double value) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] == value) rows.push_back(i);
  return rows;
}

std::string failure_reason(const std::exception& e) {
  if (dynamic_cast<const ConvergenceError*>(&e)) return "convergence";
  if (dynamic_cast<const RankError*>(&e)) return "rank";
  if (dynamic_cast<const EmptyWindowError*>(&e)) return "empty-window";
  if (dynamic_cast<const DegenerateStructureError*>(&e)) return "degenerate-structure";
  return "other";
}

std::string label_text(ComponentLabel label) {
  switch (label) {
    case ComponentLabel::O: return "O";
    case ComponentLabel::cP: return "cP";
    case ComponentLabel::mP: return "mP";
    case ComponentLabel::N: return "N";
    case ComponentLabel::S: return "S";
  }
  return "?";
}

}  // namespace

std::string to_string(Model model) { return model == Model::Model1 ? "model1" : "model2"; }

Model parse_model(const std::string& text) {
  if (text == "model1") return Model::Model1;
  if (text == "model2") return Model::Model2;
  throw ConfigError("unknown model '" + text + "' (expected model1 or model2)");
}

int covariate_dim(Model model) { return model == Model::Model1 ? 2 : 4; }

double true_tau(double x1) {
  const double a = 1.0 + 2.0 * x1;
  const double b = x1 - 1.0;
  return x1 * a * a * b * b;
}

Observation model_observation(Model model, const Eigen::VectorXd& rho, double eps, double u_treat) {
  const int dim = covariate_dim(model);
  if (rho.size() != dim) throw ArgumentError("wrong number of covariate noises");
  Observation obs;
  obs.x.resize(dim);
  const double x1 = rho[0];
  obs.x[0] = x1;
  if (model == Model::Model1) {
    const double a = 1.0 + 2.0 * x1;
    const double b = x1 - 1.0;
    obs.x[1] = a * a * b * b + rho[1];
    obs.m1 = obs.x[0] * obs.x[1];
    obs.p = expit(obs.x[0] + obs.x[1]);
  } else {
    obs.x[1] = 1.0 + 2.0 * x1 + rho[1];
    obs.x[2] = 1.0 + 2.0 * x1 + rho[2];
    obs.x[3] = (x1 - 1.0) * (x1 - 1.0) + rho[3];
    obs.m1 = obs.x.prod();
    obs.p = expit(0.5 * obs.x.sum());
  }
  obs.m0 = 0.0;
  obs.y1 = obs.m1 + eps;
  obs.y0 = 0.0;
  obs.d = u_treat < obs.p ? 1.0 : 0.0;
  obs.y = obs.d == 1.0 ? obs.y1 : obs.y0;
  return obs;
}

SimSample gen_model1(Eigen::Index n, RandomStream& rng) { return to_sample(draw(Model::Model1, n, rng)); }
SimSample gen_model2(Eigen::Index n, RandomStream& rng) { return to_sample(draw(Model::Model2, n, rng)); }
SimSample generate(Model model, Eigen::Index n, RandomStream& rng) { return to_sample(draw(model, n, rng)); }

PopulationSample population_sample(Model model, Eigen::Index n, RandomStream& rng) {
  return to_population(draw(model, n, rng));
}

// ---------------------------------------------------------------------------

MisspecificationSpec local_misspecification_spec(double c_n, double d1_n) {
  MisspecificationSpec spec;
  spec.c_n = c_n;
  spec.d1_n = d1_n;
  spec.d0_n = 0.0;
  spec.base_p = [](const Eigen::VectorXd& x) { return expit(x[0]); };
  spec.a = [](const Eigen::VectorXd& x) { return x[1] - 1.0; };
  spec.base_m1 = [](const Eigen::VectorXd& x) { return x[0] + x[1]; };
  spec.b1 = [](const Eigen::VectorXd& x) { return x[0] * x[1]; };
  spec.base_m0 = [](const Eigen::VectorXd&) { return 0.0; };
  spec.b0 = [](const Eigen::VectorXd&) { return 0.0; };
  return spec;
}

PopulationSample population_sample(const MisspecificationSpec& spec, Eigen::Index n, RandomStream& rng) {
  if (n < 1) throw ArgumentError("sample size must be positive");
  PopulationSample out;
  out.x.resize(n, 2);
  for (auto* v : {&out.y, &out.d, &out.p, &out.m1, &out.m0}) v->resize(n);
  Eigen::VectorXd rho(2);
  for (Eigen::Index i = 0; i < n; ++i) {
    rho[0] = rng.uniform(-0.5, 0.5);
    rho[1] = rng.uniform(-0.5, 0.5);
    const double eps = kNoiseSd * rng.normal();
    const double u = rng.uniform();
    const auto base = model_observation(Model::Model1, rho, eps, u);
    const double p = spec.p(base.x);
    if (!(p > 0.0 && p < 1.0)) throw ArgumentError("misspecification pushes the propensity outside (0, 1)");
    out.x.row(i) = base.x.transpose();
    out.p[i] = p;
    out.m1[i] = spec.m1(base.x);
    out.m0[i] = spec.m0(base.x);
    out.d[i] = u < p ? 1.0 : 0.0;
    out.y[i] = out.d[i] == 1.0 ? out.m1[i] + eps : out.m0[i];
  }
  out.x1 = out.x.col(0);
  return out;
}

LimitingModels limiting_models(const PopulationSample& calibration, const PopulationSample& target,
                               const WorkingModels& working) {
  LimitingModels out;
  if (working.propensity) {
    const Eigen::VectorXd beta =
        fit_logistic_mle(working_features(calibration.x, *working.propensity), calibration.d);
    const Eigen::VectorXd eta = working_features(target.x, *working.propensity) * beta;
    out.p_tilde = eta.unaryExpr([](double e) { return expit(e); });
  } else {
    out.p_tilde = target.p;
  }
  if (working.outcome) {
    const Eigen::MatrixXd calib_features = working_features(calibration.x, *working.outcome);
    const Eigen::MatrixXd target_features = working_features(target.x, *working.outcome);
    out.m1_tilde = target_features * fit_linear_ls(calib_features, calibration.y, rows_where(calibration.d, 1.0));
    out.m0_tilde = target_features * fit_linear_ls(calib_features, calibration.y, rows_where(calibration.d, 0.0));
  } else {
    out.m1_tilde = target.m1;
    out.m0_tilde = target.m0;
  }
  return out;
}

// ---------------------------------------------------------------------------

ModelDefaults default_schedule(Model model) {
  ModelDefaults out;
  out.d = covariate_dim(model);
  out.k = 1;
  const bool first = model == Model::Model1;
  const double eta1 = first ? 1.0 / 9.0 : 1.0 / 13.0;
  const double eta = first ? 0.25 : 0.125;
  const int s1 = first ? 4 : 6;
  const int s = first ? 2 : 4;
  const std::map<int, double> scales = first
      ? std::map<int, double>{{1, 0.1}, {2, 0.7}, {3, 1.5}, {5, 0.5}, {6, 1.0}}
      : std::map<int, double>{{1, 0.1}, {2, 2.0}, {3, 2.5}, {5, 2.8}, {6, 1.0}};

  out.schedule.set(1, {scales.at(1), eta1});
  for (int role : {2, 3, 5, 6}) out.schedule.set(role, {scales.at(role), eta});
  // Control-arm fits reuse the treated-arm constants.
  out.schedule.set(4, out.schedule.at(3));
  out.schedule.set(7, out.schedule.at(6));

  out.orders[1] = s1;
  for (int role = 2; role <= kLastRole; ++role) out.orders[role] = s;

  out.propensity_basis = Eigen::MatrixXd::Ones(out.d, 1);
  out.outcome_basis = Eigen::MatrixXd::Identity(out.d, out.d);

  out.kernels[1] = KernelSpec{KernelFamily::Gaussian, s1, out.k};
  for (int role : {2, 3, 4}) out.kernels[role] = KernelSpec{KernelFamily::Epanechnikov, s, out.d};
  out.kernels[5] = KernelSpec{KernelFamily::Epanechnikov, s, static_cast<int>(out.propensity_basis.cols())};
  for (int role : {6, 7})
    out.kernels[role] = KernelSpec{KernelFamily::Epanechnikov, s, static_cast<int>(out.outcome_basis.cols())};
  return out;
}

std::string Combination::label() const {
  return "(" + label_text(propensity) + "," + label_text(outcome) + ")";
}

const std::vector<std::string>& combination_labels() {
  static const std::vector<std::string> labels{"(O,O)",  "(cP,cP)", "(N,N)",  "(S,S)",  "(mP,cP)",
                                               "(mP,N)", "(mP,S)",  "(cP,mP)", "(N,mP)", "(S,mP)"};
  return labels;
}

Combination parse_combination(const std::string& label) {
  std::string compact;
  for (char c : label)
    if (c != ' ') compact += c;
  for (auto ps : {ComponentLabel::O, ComponentLabel::cP, ComponentLabel::mP, ComponentLabel::N, ComponentLabel::S}) {
    for (auto oc :
         {ComponentLabel::O, ComponentLabel::cP, ComponentLabel::mP, ComponentLabel::N, ComponentLabel::S}) {
      const Combination candidate{ps, oc};
      if (candidate.label() != compact) continue;
      for (const auto& known : combination_labels())
        if (known == compact) return candidate;
    }
  }
  throw ConfigError("unknown combination '" + label + "'");
}

NuisanceConfig combination_config(Model model, const Combination& combination, const BandwidthSchedule& schedule,
                                  const std::map<int, KernelSpec>& kernels, const ModelDefaults& defaults,
                                  Eigen::Index n, TrimBounds trim, bool estimate_sdr) {
  (void)model;
  const auto kernel = [&](int role) {
    const auto it = kernels.find(role);
    if (it == kernels.end()) throw ConfigError("no kernel configured for K" + std::to_string(role));
    return it->second;
  };
  const auto bandwidth = [&](int role) {
    if (!schedule.has(role)) throw ConfigError("no bandwidth configured for h" + std::to_string(role));
    return schedule.resolve(role, static_cast<double>(n));
  };
  const auto sdr = [&](const Eigen::MatrixXd& basis) {
    SdrSpec spec;
    spec.target_dim = static_cast<int>(basis.cols());
    if (!estimate_sdr) spec.oracle = basis;
    return spec;
  };

  NuisanceConfig config;
  config.trim = trim;

  auto& ps = config.propensity;
  ps.tag = label_text(combination.propensity);
  switch (combination.propensity) {
    case ComponentLabel::O: ps.method = NuisanceMethod::Oracle; break;
    case ComponentLabel::cP:
      ps.method = NuisanceMethod::Parametric;
      ps.features = FeatureMap::InterceptAll;
      break;
    case ComponentLabel::mP:
      ps.method = NuisanceMethod::Parametric;
      ps.features = FeatureMap::InterceptX1;
      break;
    case ComponentLabel::N:
      ps.method = NuisanceMethod::Nonparametric;
      ps.kernel = kernel(2);
      ps.bandwidth = bandwidth(2);
      break;
    case ComponentLabel::S:
      ps.method = NuisanceMethod::Semiparametric;
      ps.kernel = kernel(5);
      ps.bandwidth = bandwidth(5);
      ps.sdr = sdr(defaults.propensity_basis);
      break;
  }

  for (int arm : {1, 0}) {
    auto& oc = arm == 1 ? config.outcome1 : config.outcome0;
    oc.tag = label_text(combination.outcome);
    switch (combination.outcome) {
      case ComponentLabel::O: oc.method = NuisanceMethod::Oracle; break;
      case ComponentLabel::cP:
        oc.method = NuisanceMethod::Parametric;
        oc.features = FeatureMap::InterceptAllProduct;
        break;
      case ComponentLabel::mP:
        oc.method = NuisanceMethod::Parametric;
        oc.features = FeatureMap::InterceptAll;
        break;
      case ComponentLabel::N:
        oc.method = NuisanceMethod::Nonparametric;
        oc.kernel = kernel(arm == 1 ? 3 : 4);
        oc.bandwidth = bandwidth(arm == 1 ? 3 : 4);
        break;
      case ComponentLabel::S:
        oc.method = NuisanceMethod::Semiparametric;
        oc.kernel = kernel(arm == 1 ? 6 : 7);
        oc.bandwidth = bandwidth(arm == 1 ? 6 : 7);
        oc.sdr = sdr(defaults.outcome_basis);
        break;
    }
  }
  return config;
}

McConfig default_mc_config(Model model, Eigen::Index n, const std::string& combination) {
  const auto defaults = default_schedule(model);
  McConfig config;
  config.model = model;
  config.n = n;
  config.combination = combination;
  config.schedule = defaults.schedule;
  config.kernels = defaults.kernels;
  return config;
}

// ---------------------------------------------------------------------------

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    const int used = std::min(threads, count);
    workers.reserve(static_cast<std::size_t>(used));
    for (int w = 0; w < used; ++w) {
      workers.emplace_back([&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

McReport run_mc(const McConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  if (config.reps < 2) throw ConfigError("at least two replications are required");
  if (config.n < 2) throw ConfigError("sample size must be at least 2");
  if (config.grid.empty()) throw ConfigError("evaluation grid is empty");
  config.trim.validate();
  const auto combination = parse_combination(config.combination);
  const auto defaults = default_schedule(config.model);
  const auto nuisance = combination_config(config.model, combination, config.schedule, config.kernels, defaults,
                                           config.n, config.trim, config.estimate_sdr);
  const auto k1_it = config.kernels.find(1);
  if (k1_it == config.kernels.end()) throw ConfigError("no kernel configured for K1");
  const KernelSpec k1 = k1_it->second;
  if (k1.dim != 1) throw ConfigError("K1 must be one-dimensional for the simulated models");
  const double h1 = config.schedule.resolve(1, static_cast<double>(config.n));
  const auto grid = scalar_grid(config.grid);
  const std::size_t points = config.grid.size();

  struct Outcome {
    bool ok = false;
    std::string reason;
    std::vector<double> tau_hat;
    int empty_windows = 0;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(config.reps));

  parallel_for(config.reps, config.threads, [&](int index) {
    auto& out = outcomes[static_cast<std::size_t>(index)];
    try {
      auto rng = replication_stream(config.seed, static_cast<std::uint64_t>(index) + 1);
      const auto sample = generate(config.model, config.n, rng);
      const auto fit = assemble_nuisance(sample.data, nuisance, &sample.truth);
      out.empty_windows = fit.empty_windows;
      const auto curve = estimate_cate(sample.data, fit, grid, k1, h1);
      if (curve.missing_points > 0) {
        out.reason = "empty-window";
        return;
      }
      out.tau_hat.reserve(points);
      for (const auto& point : curve.points) out.tau_hat.push_back(*point.tau_hat);
      out.ok = true;
    } catch (const Error& e) {
      out.reason = failure_reason(e);
    }
  });

  McReport report;
  report.combination = combination.label();
  report.model = config.model;
  report.n = config.n;
  report.reps = config.reps;
  report.h1 = h1;
  const double root = std::sqrt(static_cast<double>(config.n) * std::pow(h1, k1.dim));

  std::vector<std::vector<double>> t_by_point(points);
  std::vector<std::vector<double>> err_by_point(points);
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    const auto& out = outcomes[r];
    report.empty_windows += out.empty_windows;
    if (!out.ok) {
      ++report.failures;
      ++report.failure_reasons[out.reason];
      continue;
    }
    ++report.successes;
    for (std::size_t g = 0; g < points; ++g) {
      const double err = out.tau_hat[g] - true_tau(config.grid[g]);
      const double t = root * err;
      err_by_point[g].push_back(err);
      t_by_point[g].push_back(t);
      report.records.push_back({static_cast<int>(r) + 1, config.grid[g], out.tau_hat[g], t});
    }
  }
  report.valid = report.failures * 100 <= report.reps && report.successes >= 2;

  for (std::size_t g = 0; g < points; ++g) {
    McSummaryRow row;
    row.x1 = config.grid[g];
    const auto& ts = t_by_point[g];
    const auto& errs = err_by_point[g];
    const double count = static_cast<double>(ts.size());
    if (ts.size() >= 2) {
      double err_sum = 0.0, t_sum = 0.0, t_sq = 0.0;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        err_sum += errs[i];
        t_sum += ts[i];
        t_sq += ts[i] * ts[i];
      }
      row.bias = err_sum / count;
      row.mean_t = t_sum / count;
      row.mse = t_sq / count;
      double centred = 0.0;
      for (double t : ts) centred += (t - row.mean_t) * (t - row.mean_t);
      row.sam_sd = std::sqrt(centred / (count - 1.0));
      row.sam_sd_se = row.sam_sd / std::sqrt(2.0 * (count - 1.0));
      if (row.sam_sd > 0.0) {
        int below = 0, above = 0;
        for (double t : ts) {
          const double z = (t - row.mean_t) / row.sam_sd;
          if (z < -kUpperNormalQuantile) ++below;
          if (z > kUpperNormalQuantile) ++above;
        }
        row.p05 = below / count;
        row.p95 = above / count;
      }
    }
    report.rows.push_back(row);
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace drcate

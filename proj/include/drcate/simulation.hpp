#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcate/asymptotics.hpp"
#include "drcate/bandwidth.hpp"
#include "drcate/dataset.hpp"
#include "drcate/kernels.hpp"
#include "drcate/nuisance.hpp"
#include "drcate/rng.hpp"

namespace drcate {

enum class Model { Model1, Model2 };

std::string to_string(Model model);
Model parse_model(const std::string& text);
int covariate_dim(Model model);

// CATE of both models: x (1 + 2x)^2 (x - 1)^2.
double true_tau(double x1);

// ---------------------------------------------------------------------------
// Data-generating processes

struct SimSample {
  Dataset data;
  OracleValues truth;
  Eigen::VectorXd y1;  // potential outcomes
  Eigen::VectorXd y0;
};

// Deterministic map from the primitive draws of one observation.
struct Observation {
  Eigen::VectorXd x;
  double p = 0.0;
  double m1 = 0.0;
  double m0 = 0.0;
  double y1 = 0.0;
  double y0 = 0.0;
  double d = 0.0;
  double y = 0.0;
};

// rho holds the d U(-0.5, 0.5) covariate noises, eps the N(0, 0.25^2)
// outcome noise, u_treat the uniform deciding D = 1{u_treat < p}.
Observation model_observation(Model model, const Eigen::VectorXd& rho, double eps, double u_treat);

// Draw order per observation: rho_1..rho_d, eps, u_treat.
SimSample gen_model1(Eigen::Index n, RandomStream& rng);
SimSample gen_model2(Eigen::Index n, RandomStream& rng);
SimSample generate(Model model, Eigen::Index n, RandomStream& rng);

// Same draws packaged without dataset validation (large Monte Carlo samples).
PopulationSample population_sample(Model model, Eigen::Index n, RandomStream& rng);

// ---------------------------------------------------------------------------
// Misspecification wiring

// Model 1 covariates with p = expit(X1) (1 + c_n (X2 - 1)),
// m1 = X1 + X2 + d_n X1 X2, m0 = 0, Y(1) = m1 + N(0, 0.25^2).
MisspecificationSpec local_misspecification_spec(double c_n, double d1_n);
PopulationSample population_sample(const MisspecificationSpec& spec, Eigen::Index n, RandomStream& rng);

// Working parametric forms; nullopt marks a correctly specified component
// whose limit is the truth itself.
struct WorkingModels {
  std::optional<FeatureMap> propensity;
  std::optional<FeatureMap> outcome;
};

// Fits the working models on `calibration` (quasi-MLE limits beta*, gamma*)
// and evaluates them on `target`.
LimitingModels limiting_models(const PopulationSample& calibration, const PopulationSample& target,
                               const WorkingModels& working);

// ---------------------------------------------------------------------------
// Schedules and combinations

struct ModelDefaults {
  BandwidthSchedule schedule;
  std::map<int, int> orders;         // role -> s_j
  std::map<int, KernelSpec> kernels;  // role -> K_j (dimension included)
  int d = 2;
  int k = 1;
  Eigen::MatrixXd propensity_basis;  // oracle A
  Eigen::MatrixXd outcome_basis;     // oracle B1 = B0
};

ModelDefaults default_schedule(Model model);

enum class ComponentLabel { O, cP, mP, N, S };

struct Combination {
  ComponentLabel propensity = ComponentLabel::O;
  ComponentLabel outcome = ComponentLabel::O;

  std::string label() const;  // "(mP,N)"
  friend bool operator==(const Combination&, const Combination&) = default;
};

// Accepts exactly the ten simulated labels; throws ConfigError otherwise.
Combination parse_combination(const std::string& label);
const std::vector<std::string>& combination_labels();

NuisanceConfig combination_config(Model model, const Combination& combination, const BandwidthSchedule& schedule,
                                  const std::map<int, KernelSpec>& kernels, const ModelDefaults& defaults,
                                  Eigen::Index n, TrimBounds trim, bool estimate_sdr);

// ---------------------------------------------------------------------------
// Monte Carlo engine

struct McConfig {
  Model model = Model::Model1;
  Eigen::Index n = 500;
  std::uint64_t seed = 20240601;
  std::string combination = "(O,O)";
  std::vector<double> grid{-0.4, -0.2, 0.0, 0.2, 0.4};
  int reps = 500;
  BandwidthSchedule schedule;
  std::map<int, KernelSpec> kernels;
  TrimBounds trim;
  bool estimate_sdr = false;
  int threads = 1;
};

// Reference schedule and kernels for the model.
McConfig default_mc_config(Model model, Eigen::Index n, const std::string& combination);

struct McRecord {
  int replication = 0;
  double x1 = 0.0;
  double tau_hat = 0.0;
  double t_stat = 0.0;
};

struct McSummaryRow {
  double x1 = 0.0;
  double bias = 0.0;     // mean of tau_hat - tau
  double sam_sd = 0.0;   // sample SD of T
  double mse = 0.0;      // mean of T^2
  double p05 = 0.0;      // share of standardised T below the 5% normal quantile
  double p95 = 0.0;      // share above the 95% quantile
  double mean_t = 0.0;
  double sam_sd_se = 0.0;  // sam_sd / sqrt(2 (R - 1))
};

struct McReport {
  std::string combination;
  Model model = Model::Model1;
  Eigen::Index n = 0;
  int reps = 0;
  int successes = 0;
  int failures = 0;
  bool valid = false;  // failures <= 1% of reps
  std::map<std::string, int> failure_reasons;
  long long empty_windows = 0;
  double h1 = 0.0;
  std::vector<McSummaryRow> rows;
  std::vector<McRecord> records;  // successful replications, in replication order
  double runtime_seconds = 0.0;
};

// Throws ConfigError for reps < 2, an unknown combination or a bad schedule.
McReport run_mc(const McConfig& config);

// Runs fn(0..count-1) on `threads` workers; every index runs exactly once.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace drcate

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "drcate/bandwidth.hpp"
#include "drcate/kernels.hpp"
#include "drcate/nuisance.hpp"
#include "drcate/simulation.hpp"

namespace drcate {

// Settings for `estimate` on user data.
struct EstimateSettings {
  std::string data;                          // CSV path
  std::vector<std::string> x1_columns{"x1"};
  NuisanceMethod propensity = NuisanceMethod::Parametric;
  NuisanceMethod outcome = NuisanceMethod::Parametric;
  FeatureMap propensity_features = FeatureMap::InterceptAll;
  FeatureMap outcome_features = FeatureMap::InterceptAll;
  int propensity_sdr_dim = 1;
  int outcome_sdr_dim = 1;

  friend bool operator==(const EstimateSettings&, const EstimateSettings&) = default;
};

// Settings for `variance-curves`.
struct VarianceSettings {
  std::vector<double> p1{0.1, 0.3, 0.5, 0.7, 0.9};
  int points = 99;         // p2 = i / (points + 1), i = 1..points
  double xi_sq = 0.0625;   // homoscedastic outcome variance
  std::int64_t population_n = 200000;  // 0 skips the population curves
  std::string propensity_working = "intercept+x1";  // "" = correct propensity
  std::string outcome_working = "intercept+all";    // "" = correct outcome

  friend bool operator==(const VarianceSettings&, const VarianceSettings&) = default;
};

// Settings for `check-rates`; empty orders fall back to the model defaults.
struct RatesSettings {
  RateScenario scenario = RateScenario::AllCorrect;
  std::map<int, int> orders;
  int d = 0;  // 0 = model dimension
  int k = 1;

  friend bool operator==(const RatesSettings&, const RatesSettings&) = default;
};

// Every subcommand reads the same document; each uses the sections it needs.
// Bandwidth and kernel entries override the model defaults role by role.
struct RunConfig {
  Model model = Model::Model1;
  std::int64_t n = 500;
  std::uint64_t seed = 20240601;
  int reps = 500;
  int threads = 1;
  std::string out;  // output directory
  std::string combination = "(O,O)";
  std::vector<double> grid{-0.4, -0.2, 0.0, 0.2, 0.4};
  bool estimate_sdr = false;
  std::map<int, RateEntry> bandwidths;
  std::map<int, KernelSpec> kernels;  // family and order only; dim is set by use
  TrimBounds trim;
  EstimateSettings estimate;
  VarianceSettings variance;
  RatesSettings rates;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// JSON with // comments allowed. Unknown keys, wrong types and invalid
// values throw ConfigError. "eta" accepts a number or a fraction "1/9".
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical form: every field written, fixed key order.
std::string serialize_config(const RunConfig& config);

// FNV-1a 64 over the canonical form with `out` and `threads` cleared.
std::uint64_t config_hash(const RunConfig& config);
std::string hash_hex(std::uint64_t hash);

// Model defaults with the configured overrides applied.
BandwidthSchedule effective_schedule(const RunConfig& config);
std::map<int, KernelSpec> effective_kernels(const RunConfig& config);
McConfig to_mc_config(const RunConfig& config);

}  // namespace drcate

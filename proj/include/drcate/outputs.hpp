#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "drcate/asymptotics.hpp"
#include "drcate/config.hpp"
#include "drcate/csv_io.hpp"
#include "drcate/estimator.hpp"
#include "drcate/simulation.hpp"

namespace drcate {

// ---------------------------------------------------------------------------
// Tables

CsvTable fitted_table(const NuisanceFit& fit);                   // i,p_hat,m1_hat,m0_hat
CsvTable curve_table(const CateCurve& curve, double z = 1.96);   // x1,tau_hat,f_hat,v_hat,ci_lo,ci_hi,n_eff
CsvTable replications_table(const McReport& report);             // r,x1,tau_hat,T
CsvTable summary_table(const McReport& report);                  // x1,bias,sam_sd,mse,p05,p95,mean_t,sam_sd_se
CsvTable vd_table(const std::vector<double>& p1, int points, double xi_sq);  // p1,p2,vd,sigma2_minus_sigma1
CsvTable variance_curve_table(const std::vector<VarianceCurvePoint>& points);  // x1,v1,v2,v3,v4,bias

std::string mc_manifest(const McReport& report, const RunConfig& config);

// ---------------------------------------------------------------------------
// Subcommands. Each writes its files under `out_dir` (created if needed),
// logs the written paths to `log` and returns the process exit code.

struct EstimateResult {
  NuisanceFit fit;
  CateCurve curve;
};

// Fits the configured nuisances on the CSV dataset and smooths the
// pseudo-outcomes. Bands carry no bias correction (undersmoothing h1).
EstimateResult run_estimate(const RunConfig& config);
// Same on an in-memory dataset; `estimate.data` is ignored.
EstimateResult run_estimate(const RunConfig& config, const Dataset& data);

int cmd_estimate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_simulate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_variance_curves(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_check_rates(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_kernel_moments(std::ostream& log);

// Human-readable rate report.
std::string format_rate_report(const RateReport& report, RateScenario scenario);
RateReport check_config_rates(const RunConfig& config);

}  // namespace drcate

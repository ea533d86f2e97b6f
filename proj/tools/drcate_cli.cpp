// Command-line front end: estimate, simulate, variance-curves, check-rates,
// kernel-moments.
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "drcate/config.hpp"
#include "drcate/error.hpp"
#include "drcate/outputs.hpp"

namespace {

constexpr int kFullReps = 2500;

std::filesystem::path output_dir(const std::string& flag, const drcate::RunConfig& config) {
  if (!flag.empty()) return flag;
  if (!config.out.empty()) return config.out;
  if (const char* env = std::getenv("DRCATE_OUT_DIR"); env && *env) return env;
  return "drcate_out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doubly robust conditional average treatment effect estimation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_flag;
  std::uint64_t seed = 0;
  int threads = 0;
  int reps = 0;
  bool full = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out_flag, "Output directory (default: config 'out', $DRCATE_OUT_DIR, ./drcate_out)");
    sub->add_option("--seed", seed, "Override the seed");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));
  };

  auto* estimate = app.add_subcommand("estimate", "Estimate the CATE curve on a CSV dataset");
  auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo study for one combination");
  auto* curves = app.add_subcommand("variance-curves", "Write vd(p1, p2) and population variance curves");
  auto* rates = app.add_subcommand("check-rates", "Check a bandwidth schedule against the rate conditions");
  auto* moments = app.add_subcommand("kernel-moments", "Print the kernel moment table");
  for (auto* sub : {estimate, simulate, curves, rates}) add_common(sub);
  simulate->add_option("--reps", reps, "Replications")->check(CLI::Range(1, 10000000));
  simulate->add_flag("--full", full, "Use 2500 replications");

  CLI11_PARSE(app, argc, argv);

  try {
    if (moments->parsed()) return drcate::cmd_kernel_moments(std::cout);

    drcate::RunConfig config = config_path.empty() ? drcate::RunConfig{} : drcate::load_config(config_path);
    for (auto* sub : {estimate, simulate, curves, rates})
      if (sub->parsed() && sub->count("--seed")) config.seed = seed;
    if (threads > 0) config.threads = threads;
    if (reps > 0) config.reps = reps;
    if (full) config.reps = kFullReps;
    const auto out = output_dir(out_flag, config);

    if (estimate->parsed()) return drcate::cmd_estimate(config, out, std::cout);
    if (simulate->parsed()) return drcate::cmd_simulate(config, out, std::cout);
    if (curves->parsed()) return drcate::cmd_variance_curves(config, out, std::cout);
    if (rates->parsed()) return drcate::cmd_check_rates(config, out, std::cout);
  } catch (const drcate::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

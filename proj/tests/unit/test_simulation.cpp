#include <doctest.h>

#include <cmath>
#include <set>

#include "drcate/error.hpp"
#include "drcate/simulation.hpp"
#include "oracles.hpp"

using namespace drcate;

namespace {

Eigen::VectorXd rho_at(double x1, int dim) {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(dim);
  rho[0] = x1;
  return rho;
}

}  // namespace

TEST_CASE("Model 1 observation arithmetic at X1 = 0.2") {
  const auto obs = model_observation(Model::Model1, rho_at(0.2, 2), 0.0, 0.5);
  CHECK(obs.x[1] == doctest::Approx(1.2544).epsilon(1e-14));
  CHECK(obs.y1 == doctest::Approx(0.25088).epsilon(1e-14));
  CHECK(obs.p == doctest::Approx(oracle::expit(1.4544)).epsilon(1e-14));
  CHECK(obs.d == 1.0);
  CHECK(obs.y == obs.y1);
  const auto control = model_observation(Model::Model1, rho_at(0.2, 2), 0.3, 0.999);
  CHECK(control.d == 0.0);
  CHECK(control.y == 0.0);
  CHECK(control.y1 == doctest::Approx(0.25088 + 0.3).epsilon(1e-14));
  CHECK_THROWS_AS(model_observation(Model::Model1, rho_at(0.2, 4), 0.0, 0.5), ArgumentError);
}

TEST_CASE("Model 2 observation arithmetic at X1 = 0.2") {
  const auto obs = model_observation(Model::Model2, rho_at(0.2, 4), 0.0, 0.0);
  CHECK(obs.x[1] == doctest::Approx(1.4).epsilon(1e-14));
  CHECK(obs.x[2] == doctest::Approx(1.4).epsilon(1e-14));
  CHECK(obs.x[3] == doctest::Approx(0.64).epsilon(1e-14));
  CHECK(obs.y1 == doctest::Approx(0.25088).epsilon(1e-14));
  CHECK(obs.p == doctest::Approx(oracle::expit(0.5 * (0.2 + 1.4 + 1.4 + 0.64))).epsilon(1e-14));
}

TEST_CASE("generated samples respect the design") {
  for (auto model : {Model::Model1, Model::Model2}) {
    auto rng = replication_stream(3, 1);
    const Eigen::Index n = 20000;
    const auto s = generate(model, n, rng);
    CHECK(s.data.n() == n);
    CHECK(s.data.x().cols() == covariate_dim(model));
    double d_mean = 0, p_mean = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK(std::abs(s.data.x()(i, 0)) < 0.5);
      CHECK((s.data.d()[i] == 0.0 || s.data.d()[i] == 1.0));
      CHECK(s.truth.p[i] > 0.0);
      CHECK(s.truth.p[i] < 1.0);
      CHECK(s.truth.m0[i] == 0.0);
      CHECK(s.y0[i] == 0.0);
      CHECK(s.data.y()[i] == (s.data.d()[i] == 1.0 ? s.y1[i] : 0.0));
      d_mean += s.data.d()[i];
      p_mean += s.truth.p[i];
    }
    d_mean /= n;
    p_mean /= n;
    CHECK(std::abs(d_mean - p_mean) < 4 * std::sqrt(0.25 / n));
    // Outcome noise has SD 0.25.
    const Eigen::VectorXd eps = s.y1 - s.truth.m1;
    CHECK(std::sqrt(eps.squaredNorm() / n) == doctest::Approx(0.25).epsilon(0.02));
  }
}

TEST_CASE("the same stream reproduces the same sample") {
  auto a = replication_stream(11, 5);
  auto b = replication_stream(11, 5);
  const auto s1 = generate(Model::Model2, 300, a);
  const auto s2 = generate(Model::Model2, 300, b);
  CHECK(s1.data.x() == s2.data.x());
  CHECK(s1.data.y() == s2.data.y());
  CHECK(s1.data.d() == s2.data.d());
}

TEST_CASE("true tau") {
  CHECK(true_tau(0.2) == doctest::Approx(0.25088).epsilon(1e-14));
  CHECK(true_tau(1.0) == 0.0);
}

TEST_CASE("default schedules") {
  const auto m1 = default_schedule(Model::Model1);
  CHECK(m1.schedule.resolve(1, 500) == doctest::Approx(0.0501).epsilon(2e-3));
  CHECK(m1.d == 2);
  CHECK(m1.k == 1);
  CHECK(m1.orders.at(1) == 4);
  CHECK(m1.kernels.at(1).family == KernelFamily::Gaussian);
  CHECK(m1.kernels.at(2).family == KernelFamily::Epanechnikov);
  CHECK(m1.kernels.at(2).dim == 2);
  CHECK(m1.kernels.at(5).dim == 1);
  CHECK(m1.kernels.at(6).dim == 2);
  const auto m2 = default_schedule(Model::Model2);
  CHECK(m2.schedule.resolve(1, 500) == doctest::Approx(0.1 * std::pow(500.0, -1.0 / 13.0)).epsilon(1e-14));
  CHECK(m2.orders.at(1) == 6);
  CHECK(m2.orders.at(2) == 4);
  CHECK(m2.d == 4);
  CHECK(m2.propensity_basis.isApprox(Eigen::VectorXd::Ones(4)));
  CHECK(m2.outcome_basis.isApprox(Eigen::MatrixXd::Identity(4, 4)));
}

TEST_CASE("combination labels") {
  CHECK(combination_labels().size() == 10);
  std::set<std::string> seen;
  for (const auto& label : combination_labels()) {
    CHECK(parse_combination(label).label() == label);
    seen.insert(label);
  }
  CHECK(seen.size() == 10);
  CHECK(parse_combination(" ( mP , N ) ") == Combination{ComponentLabel::mP, ComponentLabel::N});
  CHECK_THROWS_AS(parse_combination("(O,N)"), ConfigError);
  CHECK_THROWS_AS(parse_combination("(X,Y)"), ConfigError);
  CHECK_THROWS_AS(parse_combination(""), ConfigError);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](int i) { ++hits[static_cast<std::size_t>(i)]; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](int i) { if (i == 7) throw ArgumentError("boom"); }), ArgumentError);
}

TEST_CASE("Monte Carlo: validation and a two-replication report") {
  auto config = default_mc_config(Model::Model1, 200, "(O,O)");
  config.reps = 1;
  CHECK_THROWS_AS(run_mc(config), ConfigError);
  config.reps = 2;
  config.combination = "(Q,Q)";
  CHECK_THROWS_AS(run_mc(config), ConfigError);
  config.combination = "(O,O)";
  config.grid.clear();
  CHECK_THROWS_AS(run_mc(config), ConfigError);
  config.grid = {0.0};
  const auto report = run_mc(config);
  CHECK(report.successes == 2);
  CHECK(report.failures == 0);
  CHECK(report.valid);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.records.size() == 2);
  const double b = 0.5 * (report.records[0].tau_hat + report.records[1].tau_hat) - true_tau(0.0);
  CHECK(report.rows[0].bias == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("Monte Carlo: results do not depend on the thread count") {
  auto config = default_mc_config(Model::Model1, 300, "(cP,mP)");
  config.reps = 40;
  config.threads = 1;
  const auto one = run_mc(config);
  config.threads = 4;
  const auto four = run_mc(config);
  REQUIRE(one.rows.size() == four.rows.size());
  for (std::size_t g = 0; g < one.rows.size(); ++g) {
    CHECK(one.rows[g].bias == four.rows[g].bias);
    CHECK(one.rows[g].sam_sd == four.rows[g].sam_sd);
    CHECK(one.rows[g].mse == four.rows[g].mse);
  }
  REQUIRE(one.records.size() == four.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) CHECK(one.records[i].tau_hat == four.records[i].tau_hat);
}

TEST_CASE("property: Monte Carlo summary invariants") {
  auto config = default_mc_config(Model::Model1, 500, "(O,O)");
  config.reps = 300;
  const auto report = run_mc(config);
  REQUIRE(report.valid);
  const double h1 = report.h1;
  for (std::size_t g = 0; g < report.rows.size(); ++g) {
    const auto& row = report.rows[g];
    CAPTURE(row.x1);
    // mean T^2 = var (biased) + mean^2.
    const double r = report.successes;
    CHECK(row.mse == doctest::Approx(row.sam_sd * row.sam_sd * (r - 1) / r + row.mean_t * row.mean_t).epsilon(1e-9));
    CHECK(row.p05 >= 0.0);
    CHECK(row.p95 <= 1.0);
    CHECK(row.sam_sd_se == doctest::Approx(row.sam_sd / std::sqrt(2.0 * (r - 1))).epsilon(1e-12));
    CHECK(row.mean_t == doctest::Approx(std::sqrt(500.0 * h1) * row.bias).epsilon(1e-9));
    // Oracle nuisances: bias within three Monte Carlo standard errors.
    CHECK(std::abs(row.bias) < 3 * row.sam_sd / std::sqrt(500.0 * h1) / std::sqrt(r));
  }
}

#include <doctest.h>

#include <cmath>

#include "drcate/error.hpp"
#include "drcate/estimator.hpp"
#include "drcate/simulation.hpp"
#include "oracles.hpp"

using namespace drcate;

namespace {

NuisanceFit oracle_fit(const SimSample& s) {
  NuisanceConfig config;
  config.propensity.method = NuisanceMethod::Oracle;
  config.outcome1.method = NuisanceMethod::Oracle;
  config.outcome0.method = NuisanceMethod::Oracle;
  return assemble_nuisance(s.data, config, &s.truth);
}

}  // namespace

TEST_CASE("pseudo-outcome arithmetic") {
  CHECK(pseudo_outcome(0.5, 0, 0, 1, 1) == 2.0);
  for (double p : {0.1, 0.5, 0.93}) CHECK(pseudo_outcome(p, 1.7, 0.4, 1.7, 1) == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(pseudo_outcome(0.25, 1, 0.5, 2, 0) == doctest::Approx(-1.5).epsilon(1e-15));
  CHECK_THROWS_AS(pseudo_outcome(0.0, 0, 0, 0, 1), ArgumentError);
  CHECK_THROWS_AS(pseudo_outcome(1.0, 0, 0, 0, 1), ArgumentError);
  CHECK_THROWS_AS(pseudo_outcome(0.5, 0, 0, 0, 0.5), ArgumentError);
}

TEST_CASE("standardized statistic") {
  CHECK(standardized_stat(0.3, 0.3, 10, 0.5, 1) == 0.0);
  CHECK(standardized_stat(0.1, 0.0, 100, 0.25, 1) == doctest::Approx(0.5).epsilon(1e-15));
  const double h1 = 0.1 * std::pow(5000.0, -1.0 / 9.0);
  CHECK(standardized_stat(0.01, 0.0, 5000, h1, 1) == doctest::Approx(std::sqrt(5000.0 * h1) * 0.01).epsilon(1e-15));
  CHECK(standardized_stat(0.1, 0.0, 100, 0.5, 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("true CATE values") {
  CHECK(true_tau(0.0) == 0.0);
  CHECK(true_tau(0.4) == doctest::Approx(0.46656).epsilon(1e-14));
  CHECK(true_tau(-0.5) == 0.0);
}

TEST_CASE("second-step smoother: weights, locality, constants and missing points") {
  auto rng = replication_stream(21, 1);
  const Eigen::Index n = 500;
  Eigen::MatrixXd x1(n, 1);
  Eigen::VectorXd psi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x1(i, 0) = rng.uniform(-0.5, 0.5);
    psi[i] = rng.normal();
  }
  const KernelSpec epa{KernelFamily::Epanechnikov, 2, 1};
  const double h1 = 0.1;
  for (double at : {-0.3, 0.0, 0.2}) {
    Eigen::VectorXd q(1);
    q << at;
    const auto w = cate_weights(x1, q, epa, h1);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(x1(i, 0) - at) > h1) CHECK(w[i] == 0.0);
    const auto curve = smooth_over_x1(x1, psi, {q}, epa, h1);
    CHECK(*curve.points[0].tau_hat == doctest::Approx(w.dot(psi)).epsilon(1e-12));
    const auto brute = oracle::nw(x1, psi, q, [](double u) { return oracle::epanechnikov(2, u); }, h1);
    CHECK(*curve.points[0].tau_hat == doctest::Approx(brute).epsilon(1e-10));
    double mass = 0;
    std::size_t support = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double k = oracle::epanechnikov(2, (x1(i, 0) - at) / h1);
      mass += k;
      support += k != 0.0;
    }
    CHECK(*curve.points[0].f_hat == doctest::Approx(mass / (n * h1)).epsilon(1e-12));
    CHECK(curve.points[0].n_eff == support);
  }

  const auto constant = smooth_over_x1(x1, Eigen::VectorXd::Constant(n, 2.5), scalar_grid({-0.4, 0.1}), epa, h1);
  for (const auto& p : constant.points) CHECK(*p.tau_hat == 2.5);

  const auto far = smooth_over_x1(x1, psi, scalar_grid({0.0, 3.0}), epa, h1);
  CHECK(far.missing_points == 1);
  CHECK(far.points[1].missing());
  CHECK_FALSE(far.points[1].f_hat.has_value());
  CHECK_FALSE(far.band(1).has_value());

  CHECK_THROWS_AS(smooth_over_x1(x1, psi, scalar_grid({0.0}), epa, 0.0), ArgumentError);
  CHECK_THROWS_AS(smooth_over_x1(x1, psi, scalar_grid({0.0}), KernelSpec{KernelFamily::Epanechnikov, 2, 2}, 0.1),
                  ArgumentError);
}

TEST_CASE("CATE with oracle nuisances") {
  auto rng = replication_stream(2024, 1);
  const auto s = generate(Model::Model1, 5000, rng);
  const auto fit = oracle_fit(s);
  const auto defaults = default_schedule(Model::Model1);
  const double h1 = defaults.schedule.resolve(1, 5000.0);
  const auto curve = estimate_cate(s.data, fit, scalar_grid({0.0, 0.4}), defaults.kernels.at(1), h1);
  // SD of T at x1 = 0 is about 0.2, so the SE of tau_hat is 0.2 / sqrt(n h1).
  const double se = 0.21 / std::sqrt(5000.0 * h1);
  CHECK(std::abs(*curve.points[0].tau_hat - true_tau(0.0)) < 3 * se);
  CHECK(std::abs(*curve.points[1].tau_hat - true_tau(0.4)) < 3 * se);
}

TEST_CASE("CATE is constant when the pseudo-outcome is") {
  auto rng = replication_stream(17, 1);
  auto s = generate(Model::Model1, 600, rng);
  // y equals the arm mean and m1 - m0 = c: every pseudo-outcome is c.
  const double c = 0.8;
  Eigen::VectorXd y(s.data.n());
  OracleValues truth = s.truth;
  truth.m1 = Eigen::VectorXd::Constant(s.data.n(), c);
  truth.m0 = Eigen::VectorXd::Zero(s.data.n());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = s.data.d()[i] == 1 ? c : 0.0;
  const Dataset data(s.data.x(), {0}, y, s.data.d());
  NuisanceConfig config;
  config.propensity.method = config.outcome1.method = config.outcome0.method = NuisanceMethod::Oracle;
  const auto fit = assemble_nuisance(data, config, &truth);
  const auto curve = estimate_cate(data, fit, scalar_grid({-0.4, -0.2, 0.0, 0.2, 0.4}),
                                   KernelSpec{KernelFamily::Gaussian, 4, 1}, 0.05);
  for (const auto& p : curve.points) CHECK(*p.tau_hat == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("property: shift equivariance") {
  auto rng = replication_stream(31, 1);
  const auto s = generate(Model::Model1, 800, rng);
  const auto fit = oracle_fit(s);
  const KernelSpec k1{KernelFamily::Epanechnikov, 2, 1};
  const auto grid = scalar_grid({-0.3, 0.0, 0.3});
  const auto base = estimate_cate(s.data, fit, grid, k1, 0.1);

  for (double c : {-2.0, 0.5, 7.25}) {
    const Dataset shifted(s.data.x(), {0}, (s.data.y().array() + c).matrix(), s.data.d());
    // Y, m1 and m0 shifted together: residuals and m1 - m0 are unchanged.
    NuisanceFit all = fit;
    all.m1_hat.array() += c;
    all.m0_hat.array() += c;
    const auto both = estimate_cate(shifted, all, grid, k1, 0.1);

    // Treated outcomes and m1 shifted together: every pseudo-outcome moves by c.
    Eigen::VectorXd y_treated = s.data.y();
    for (Eigen::Index i = 0; i < y_treated.size(); ++i)
      if (s.data.d()[i] == 1) y_treated[i] += c;
    const Dataset treated_shift(s.data.x(), {0}, y_treated, s.data.d());
    NuisanceFit m1_only = fit;
    m1_only.m1_hat.array() += c;
    const auto one = estimate_cate(treated_shift, m1_only, grid, k1, 0.1);

    for (std::size_t g = 0; g < grid.size(); ++g) {
      CHECK(*both.points[g].tau_hat == doctest::Approx(*base.points[g].tau_hat).epsilon(1e-10));
      CHECK(*one.points[g].tau_hat == doctest::Approx(*base.points[g].tau_hat + c).epsilon(1e-10));
    }
  }
}

TEST_CASE("normal band") {
  CateCurve curve;
  curve.n = 100;
  curve.h1 = 0.25;
  curve.kernel = KernelSpec{KernelFamily::Gaussian, 2, 1};
  CatePoint p;
  p.x1 = Eigen::VectorXd::Zero(1);
  p.tau_hat = 1.0;
  p.f_hat = 1.0;
  p.v_hat = 25.0;
  curve.points.push_back(p);
  const auto band = curve.band(0);
  REQUIRE(band);
  CHECK(band->first == doctest::Approx(1.0 - 1.96).epsilon(1e-14));
  CHECK(band->second == doctest::Approx(1.0 + 1.96).epsilon(1e-14));
}

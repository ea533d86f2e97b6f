#include <doctest.h>

#include <cmath>
#include <numbers>

#include "drcate/dataset.hpp"
#include "drcate/error.hpp"
#include "drcate/nuisance.hpp"
#include "drcate/simulation.hpp"
#include "drcate/smoother.hpp"
#include "oracles.hpp"

using namespace drcate;

namespace {

Dataset small_dataset() {
  Eigen::MatrixXd x(6, 2);
  x << 0.1, 1.0, -0.2, 0.5, 0.3, 1.5, 0.0, 0.2, -0.4, 0.9, 0.25, 1.1;
  Eigen::VectorXd y(6), d(6);
  y << 1, 2, 3, 4, 5, 6;
  d << 1, 0, 1, 0, 1, 0;
  return Dataset(x, {0}, y, d);
}

const SimSample& model1_draw() {
  static const SimSample sample = [] {
    auto rng = replication_stream(777, 1);
    return generate(Model::Model1, 5000, rng);
  }();
  return sample;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

TEST_CASE("dataset validates its invariants") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd d(4);
  d << 1, 0, 1, 0;
  CHECK_NOTHROW(Dataset(x, {1}, y, d));
  CHECK_THROWS_AS(Dataset(x, {0, 1}, y, d), ArgumentError);   // k must be < d
  CHECK_THROWS_AS(Dataset(x, {2}, y, d), ArgumentError);      // out of range
  CHECK_THROWS_AS(Dataset(x, {}, y, d), ArgumentError);
  CHECK_THROWS_AS(Dataset(x, {0}, Eigen::VectorXd::Zero(3), d), ArgumentError);
  Eigen::VectorXd bad = d;
  bad[0] = 2;
  CHECK_THROWS_AS(Dataset(x, {0}, y, bad), SchemaError);
  CHECK_THROWS_AS(Dataset(x, {0}, y, Eigen::VectorXd::Ones(4)), ArgumentError);
  CHECK_THROWS_AS(Dataset(x.topRows(1), {0}, y.head(1), d.head(1)), ArgumentError);
  Eigen::MatrixXd nan = x;
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(Dataset(nan, {0}, y, d), ArgumentError);
  const Dataset ok(x, {1}, y, d);
  CHECK(ok.x1().col(0) == x.col(1));
  CHECK(ok.arm_rows(1) == std::vector<Eigen::Index>{0, 2});
}

// ---------------------------------------------------------------------------
// Kernel smoothing

TEST_CASE("NW regression: reference cases") {
  const KernelSpec epa{KernelFamily::Epanechnikov, 2, 1};
  Eigen::MatrixXd z(2, 1);
  z << 0, 1;
  Eigen::VectorXd t(2);
  t << 0, 1;
  const double q = 0.0;
  CHECK(nw_regress(z, t, std::span<const double>(&q, 1), epa, 10.0) ==
        doctest::Approx(0.7425 / 1.4925).epsilon(1e-14));

  Eigen::MatrixXd single(1, 1);
  single << 0.3;
  const double at = 0.3;
  CHECK(nw_regress(single, Eigen::VectorXd::Constant(1, 4.2), std::span<const double>(&at, 1), epa, 0.1) == 4.2);

  const double far = 5.0;
  CHECK_THROWS_AS(nw_regress(z, t, std::span<const double>(&far, 1), epa, 0.5), EmptyWindowError);
}

TEST_CASE("NW regression agrees with a brute-force oracle") {
  auto rng = replication_stream(3, 3);
  const Eigen::Index m = 400;
  Eigen::MatrixXd z(m, 2);
  Eigen::VectorXd t(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    z(i, 0) = rng.uniform(-1, 1);
    z(i, 1) = rng.uniform(-1, 1);
    t[i] = std::sin(3 * z(i, 0)) + z(i, 1) * z(i, 1) + 100.0;
  }
  for (auto family : {KernelFamily::Gaussian, KernelFamily::Epanechnikov}) {
    for (int order : {2, 4}) {
      const KernelSpec spec{family, order, 2};
      const KernelSmoother smoother(z, t, spec, 0.4);
      for (double a : {-0.5, 0.0, 0.35}) {
        Eigen::VectorXd q(2);
        q << a, -a / 2;
        const auto k = [&](double u) {
          return family == KernelFamily::Gaussian ? oracle::gaussian(order, u) : oracle::epanechnikov(order, u);
        };
        const auto fitted = smoother.fit(std::span<const double>(q.data(), 2));
        REQUIRE(fitted);
        CHECK(*fitted == doctest::Approx(oracle::nw(z, t, q, k, 0.4)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("property: NW reproduces constants exactly") {
  auto rng = replication_stream(5, 1);
  Eigen::MatrixXd z(300, 1);
  for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, 0) = rng.uniform(-1, 1);
  for (double c : {-3.7, 0.1, 12345.678}) {
    const Eigen::VectorXd t = Eigen::VectorXd::Constant(z.rows(), c);
    for (auto family : {KernelFamily::Gaussian, KernelFamily::Epanechnikov})
      for (int order : {2, 4, 6}) {
        const KernelSmoother smoother(z, t, KernelSpec{family, order, 1}, 0.3);
        for (double q = -0.9; q <= 0.9; q += 0.15) {
          const auto fitted = smoother.fit(std::span<const double>(&q, 1));
          if (fitted) CHECK(*fitted == c);
        }
      }
  }
}

// ---------------------------------------------------------------------------
// Parametric fits

TEST_CASE("logistic MLE: intercept only gives the logit of the mean") {
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(8, 1);
  Eigen::VectorXd d(8);
  d << 1, 0, 0, 0, 1, 0, 0, 0;
  const auto beta = fit_logistic_mle(ones, d);
  CHECK(beta[0] == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-10));
  CHECK(beta[0] == doctest::Approx(-1.0986).epsilon(1e-4));
}

TEST_CASE("logistic MLE: failure modes") {
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(5, 1);
  CHECK_THROWS_AS(fit_logistic_mle(ones, Eigen::VectorXd::Ones(5)), ConvergenceError);
  CHECK_THROWS_AS(fit_logistic_mle(ones, Eigen::VectorXd::Zero(5)), ConvergenceError);

  Eigen::MatrixXd separated(6, 2);
  separated << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
  Eigen::VectorXd d(6);
  d << 0, 0, 0, 1, 1, 1;
  CHECK_THROWS_AS(fit_logistic_mle(separated, d), ConvergenceError);

  Eigen::MatrixXd collinear(6, 3);
  collinear.col(0).setOnes();
  collinear.col(1) << 1, 2, 3, 4, 5, 6;
  collinear.col(2) = 2.0 * collinear.col(1);
  d << 0, 1, 0, 1, 1, 0;
  CHECK_THROWS_AS(fit_logistic_mle(collinear, d), RankError);
  CHECK_THROWS_AS(fit_logistic_mle(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1)), ArgumentError);
}

TEST_CASE("logistic MLE on a Model 1 draw matches gradient ascent and the truth") {
  const auto& s = model1_draw();
  const auto features = build_features(s.data, FeatureMap::InterceptAll);
  const auto beta = fit_logistic_mle(features, s.data.d());
  const auto reference = oracle::logistic_gradient_ascent(features, s.data.d());
  Eigen::VectorXd p = (features * beta).unaryExpr([](double e) { return oracle::expit(e); });
  const Eigen::VectorXd w = p.array() * (1.0 - p.array());
  const Eigen::MatrixXd cov = (features.transpose() * w.asDiagonal() * features).inverse();
  for (int j = 0; j < 3; ++j) {
    CHECK(beta[j] == doctest::Approx(reference[j]).epsilon(1e-6));
    CHECK(std::abs(beta[j] - (j == 0 ? 0.0 : 1.0)) < 4 * std::sqrt(cov(j, j)));
  }
  // Score at the optimum.
  CHECK((features.transpose() * (s.data.d() - p)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("least squares: exact fits, oracle agreement and errors") {
  Eigen::MatrixXd f(5, 2);
  f << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
  const Eigen::VectorXd y = 2.0 + 3.0 * f.col(1).array();
  const auto coef = fit_linear_ls(f, y, {0, 1, 2, 3, 4});
  CHECK(coef[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(coef[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_linear_ls(f, y, {0, 1}), ArgumentError);
  CHECK_THROWS_AS(fit_linear_ls(f, y, {}), ArgumentError);
  Eigen::MatrixXd dup(5, 2);
  dup.col(0).setOnes();
  dup.col(1).setOnes();
  CHECK_THROWS_AS(fit_linear_ls(dup, y, {0, 1, 2, 3, 4}), RankError);

  const auto& s = model1_draw();
  const auto features = build_features(s.data, FeatureMap::InterceptAll);
  const auto treated = s.data.arm_rows(1);
  const auto gamma = fit_linear_ls(features, s.data.y(), treated);
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(treated.size()), 3);
  Eigen::VectorXd ysub(sub.rows());
  for (std::size_t i = 0; i < treated.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = features.row(treated[i]);
    ysub[static_cast<Eigen::Index>(i)] = s.data.y()[treated[i]];
  }
  const auto reference = oracle::normal_equations(sub, ysub);
  for (int j = 0; j < 3; ++j) CHECK(gamma[j] == doctest::Approx(reference[static_cast<std::size_t>(j)]).epsilon(1e-8));
}

TEST_CASE("feature maps") {
  const auto data = small_dataset();
  const auto all = build_features(data, FeatureMap::InterceptAll);
  CHECK(all.cols() == 3);
  CHECK(all(2, 2) == 1.5);
  const auto x1 = build_features(data, FeatureMap::InterceptX1);
  CHECK(x1.cols() == 2);
  CHECK(x1(4, 1) == -0.4);
  const auto product = build_features(data, FeatureMap::InterceptAllProduct);
  CHECK(product.cols() == 4);
  CHECK(product(0, 3) == doctest::Approx(0.1));
  for (auto map : {FeatureMap::InterceptAll, FeatureMap::InterceptX1, FeatureMap::InterceptAllProduct})
    CHECK(parse_feature_map(to_string(map)) == map);
  CHECK_THROWS(parse_feature_map("cubic"));
}

TEST_CASE("parametric spec links") {
  CHECK_NOTHROW(ParametricSpec{NuisanceRole::Propensity, FeatureMap::InterceptAll, Link::Logistic}.validate());
  CHECK_THROWS_AS(ParametricSpec({NuisanceRole::Propensity, FeatureMap::InterceptAll, Link::Identity}).validate(),
                  ArgumentError);
  CHECK_THROWS_AS(ParametricSpec({NuisanceRole::Outcome1, FeatureMap::InterceptAll, Link::Logistic}).validate(),
                  ArgumentError);
}

// ---------------------------------------------------------------------------
// Kernel nuisance fits

TEST_CASE("nonparametric propensity: trimming and self-inclusion") {
  Eigen::MatrixXd x(2, 2);
  x << 0, 0, 10, 10;
  Eigen::VectorXd y(2), d(2);
  y << 1, 2;
  d << 1, 0;
  const Dataset data(x, {0}, y, d);
  const auto fit = fit_propensity_np(data, KernelSpec{KernelFamily::Epanechnikov, 2, 2}, 1.0);
  CHECK(fit.values[0] == 0.995);
  CHECK(fit.values[1] == 0.005);
  CHECK_THROWS_AS(fit_propensity_np(data, KernelSpec{KernelFamily::Epanechnikov, 2, 1}, 1.0), ArgumentError);
}

TEST_CASE("nonparametric outcome: constants, empty windows and fallbacks") {
  const auto data = small_dataset();
  Eigen::VectorXd y = data.y();
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (data.d()[i] == 1) y[i] = 3.0;
  const Dataset shifted(data.x(), {0}, y, data.d());
  const auto wide = fit_outcome_np(shifted, 1, KernelSpec{KernelFamily::Epanechnikov, 2, 2}, 50.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(wide.values[i] == 3.0);

  const KernelSpec narrow{KernelFamily::Epanechnikov, 2, 2};
  CHECK_THROWS_AS(fit_outcome_np(shifted, 1, narrow, 0.05), EmptyWindowError);
  const auto fallback = fit_outcome_np(shifted, 1, narrow, 0.05, EmptyWindowPolicy::ArmMean);
  CHECK(fallback.empty_windows == 3);
  for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(fallback.values[i] == 3.0);
}

TEST_CASE("kernel nuisance fits track the Model 1 truth") {
  const auto& s = model1_draw();
  const auto defaults = default_schedule(Model::Model1);
  const double n = static_cast<double>(s.data.n());
  const auto p = fit_propensity_np(s.data, defaults.kernels.at(2), defaults.schedule.resolve(2, n));
  CHECK((p.values - s.truth.p).cwiseAbs().mean() < 0.05);
  const auto m1 = fit_outcome_np(s.data, 1, defaults.kernels.at(3), defaults.schedule.resolve(3, n),
                                 EmptyWindowPolicy::ArmMean);
  CHECK((m1.values - s.truth.m1).cwiseAbs().mean() < 0.05);
}

TEST_CASE("dimension reduction: oracle normalisation and identity projection") {
  const auto& s = model1_draw();
  SdrSpec spec;
  spec.target_dim = 1;
  spec.oracle = Eigen::MatrixXd::Ones(2, 1);
  const auto basis = estimate_sdr_matrix(s.data, SdrResponse::Treatment, spec);
  CHECK(basis(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(basis(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

  spec.target_dim = 2;
  spec.oracle = Eigen::MatrixXd::Identity(2, 2);
  const auto identity = estimate_sdr_matrix(s.data, SdrResponse::Treatment, spec);
  CHECK((identity - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-14);

  spec.oracle = Eigen::MatrixXd::Ones(2, 2);
  CHECK_THROWS_AS(estimate_sdr_matrix(s.data, SdrResponse::Treatment, spec), DegenerateStructureError);

  // Control outcomes are identically zero: coordinate axes are returned.
  SdrSpec control;
  control.target_dim = 1;
  CHECK(estimate_sdr_matrix(s.data, SdrResponse::ControlOutcome, control).isApprox(Eigen::Vector2d(1, 0)));
  spec.target_dim = 3;
  spec.oracle.reset();
  CHECK_THROWS_AS(estimate_sdr_matrix(s.data, SdrResponse::Treatment, spec), ArgumentError);

  const KernelSpec kernel{KernelFamily::Epanechnikov, 2, 2};
  const auto np = fit_propensity_np(s.data, kernel, 0.4);
  const auto sp = fit_semiparametric(s.data, NuisanceRole::Propensity, Eigen::MatrixXd::Identity(2, 2), kernel, 0.4);
  CHECK(np.values == sp.values);
  const auto np1 = fit_outcome_np(s.data, 1, kernel, 0.4, EmptyWindowPolicy::ArmMean);
  const auto sp1 = fit_semiparametric(s.data, NuisanceRole::Outcome1, Eigen::MatrixXd::Identity(2, 2), kernel, 0.4,
                                      {}, EmptyWindowPolicy::ArmMean);
  CHECK(np1.values == sp1.values);
  CHECK_THROWS_AS(fit_semiparametric(s.data, NuisanceRole::Propensity, Eigen::MatrixXd::Ones(2, 1), kernel, 0.4),
                  ArgumentError);
}

TEST_CASE("OPG recovers a single-index direction") {
  auto rng = replication_stream(99, 1);
  const Eigen::Index n = 5000;
  Eigen::Vector3d v(1.0, -2.0, 0.5);
  v.normalize();
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n), d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) x(i, c) = rng.uniform(-1, 1);
    const double index = x.row(i).dot(v);
    d[i] = rng.uniform() < oracle::expit(2.0 * index) ? 1.0 : 0.0;
    y[i] = std::sin(2.0 * index) + 0.1 * rng.normal();
  }
  const Dataset data(x, {0}, y, d);
  SdrSpec spec;
  spec.target_dim = 1;
  for (auto response : {SdrResponse::Treatment, SdrResponse::TreatedOutcome}) {
    const auto basis = estimate_sdr_matrix(data, response, spec);
    const double cosine = std::abs(basis.col(0).dot(v));
    CHECK(std::acos(std::min(cosine, 1.0)) * 180.0 / std::numbers::pi < 10.0);
  }
}

TEST_CASE("semiparametric Model 2 propensity with the oracle index") {
  auto rng = replication_stream(4242, 1);
  const auto s = generate(Model::Model2, 5000, rng);
  const auto defaults = default_schedule(Model::Model2);
  const auto fit = fit_semiparametric(s.data, NuisanceRole::Propensity, Eigen::MatrixXd::Constant(4, 1, 0.5),
                                      defaults.kernels.at(5), defaults.schedule.resolve(5, 5000.0), {},
                                      EmptyWindowPolicy::ArmMean);
  CHECK((fit.values - s.truth.p).cwiseAbs().mean() < 0.05);
}

// ---------------------------------------------------------------------------
// Assembly

TEST_CASE("assembly: oracle passthrough, trimming and tags") {
  const auto& s = model1_draw();
  NuisanceConfig config;
  config.propensity.method = NuisanceMethod::Oracle;
  config.outcome1.method = NuisanceMethod::Oracle;
  config.outcome0.method = NuisanceMethod::Oracle;
  const auto fit = assemble_nuisance(s.data, config, &s.truth);
  for (Eigen::Index i = 0; i < s.data.n(); ++i) {
    CHECK(fit.p_hat[i] ==
          doctest::Approx(std::clamp(oracle::expit(s.data.x()(i, 0) + s.data.x()(i, 1)), 0.005, 0.995)).epsilon(1e-14));
    CHECK(fit.m1_hat[i] == s.truth.m1[i]);
  }
  CHECK(fit.p_method == "O");
  CHECK_THROWS_AS(assemble_nuisance(s.data, config, nullptr), ArgumentError);
}

TEST_CASE("assembly: combination features follow the simulation design") {
  auto rng = replication_stream(8, 8);
  const auto s2 = generate(Model::Model2, 800, rng);
  const auto defaults = default_schedule(Model::Model2);
  const auto config = combination_config(Model::Model2, parse_combination("(cP,mP)"), defaults.schedule,
                                         defaults.kernels, defaults, 800, {}, false);
  const auto fit = assemble_nuisance(s2.data, config, &s2.truth);
  REQUIRE(fit.gamma1);
  CHECK(fit.gamma1->size() == 5);  // 1, X1..X4
  CHECK(fit.beta->size() == 5);
  CHECK(fit.m1_method == "mP");

  const auto& s1 = model1_draw();
  const auto d1 = default_schedule(Model::Model1);
  const auto mp = combination_config(Model::Model1, parse_combination("(mP,cP)"), d1.schedule, d1.kernels, d1, 5000,
                                     {}, false);
  const auto fit1 = assemble_nuisance(s1.data, mp, &s1.truth);
  CHECK(fit1.beta->size() == 2);    // 1, X1
  CHECK(fit1.gamma1->size() == 4);  // 1, X1, X2, X1 X2
  CHECK(fit1.p_hat.minCoeff() >= 0.005);
  CHECK(fit1.p_hat.maxCoeff() <= 0.995);
}

TEST_CASE("trim bounds validate") {
  CHECK_NOTHROW(TrimBounds{}.validate());
  CHECK_THROWS_AS(TrimBounds({0.0, 0.9}).validate(), ArgumentError);
  CHECK_THROWS_AS(TrimBounds({0.6, 0.4}).validate(), ArgumentError);
  CHECK(TrimBounds{}.apply(0.999) == 0.995);
  CHECK(TrimBounds{}.apply(0.0001) == 0.005);
  CHECK(TrimBounds{}.apply(0.3) == 0.3);
}

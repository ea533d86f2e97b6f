#include "drcate/nuisance.hpp"

#include <algorithm>
#include <cmath>

#include "drcate/error.hpp"
#include "drcate/smoother.hpp"

namespace drcate {

namespace {

constexpr int kMaxNewtonIterations = 100;
constexpr double kScoreTolerance = 1e-10;
constexpr double kDivergenceNorm = 1e6;
constexpr double kSeparationGap = 1e-6;

double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& d) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) total += d[i] * eta[i] - softplus(eta[i]);
  return total;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[rows[r]];
  return out;
}

// Fits `targets` on `train` and evaluates at every row of `queries`.
KernelFit kernel_fit(const Eigen::MatrixXd& train, const Eigen::VectorXd& targets,
                     const Eigen::MatrixXd& queries, const KernelSpec& kernel, double h,
                     EmptyWindowPolicy policy) {
  const KernelSmoother smoother(train, targets, kernel, h);
  KernelFit out;
  out.values.resize(queries.rows());
  std::optional<double> fallback;
  std::vector<double> query(static_cast<std::size_t>(queries.cols()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    for (Eigen::Index c = 0; c < queries.cols(); ++c) query[static_cast<std::size_t>(c)] = queries(i, c);
    const auto value = smoother.fit(query);
    if (value) {
      out.values[i] = *value;
      continue;
    }
    if (policy == EmptyWindowPolicy::Throw)
      throw EmptyWindowError("empty kernel window at observation " + std::to_string(i + 1));
    if (!fallback) fallback = targets.mean();
    out.values[i] = *fallback;
    ++out.empty_windows;
  }
  return out;
}

KernelFit propensity_in(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& d, const KernelSpec& kernel,
                        double h, TrimBounds trim, EmptyWindowPolicy policy) {
  trim.validate();
  auto fit = kernel_fit(inputs, d, inputs, kernel, h, policy);
  for (auto& p : fit.values) p = trim.apply(p);
  return fit;
}

KernelFit outcome_in(const Eigen::MatrixXd& inputs, const Dataset& data, int arm, const KernelSpec& kernel,
                     double h, EmptyWindowPolicy policy) {
  if (arm != 0 && arm != 1) throw ArgumentError("arm must be 0 or 1");
  const auto rows = data.arm_rows(arm);
  if (rows.empty()) throw ArgumentError("arm " + std::to_string(arm) + " has no observations");
  return kernel_fit(gather_rows(inputs, rows), gather(data.y(), rows), inputs, kernel, h, policy);
}

void check_kernel_dim(const KernelSpec& kernel, Eigen::Index dim) {
  kernel.validate();
  if (kernel.dim != dim)
    throw ArgumentError("kernel dimension " + std::to_string(kernel.dim) + " does not match " +
                        std::to_string(dim) + " input columns");
}

// Modified Gram-Schmidt with a rank check; column signs follow the input.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& basis) {
  Eigen::MatrixXd q = basis;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const double original = q.col(j).norm();
    for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    const double remaining = q.col(j).norm();
    if (!(original > 0.0) || remaining <= 1e-10 * original)
      throw DegenerateStructureError("projection basis does not have full column rank");
    q.col(j) /= remaining;
  }
  return q;
}

void fix_signs(Eigen::MatrixXd& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;
  }
}

Eigen::MatrixXd opg_basis(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, int target_dim) {
  const Eigen::Index m = x.rows();
  const Eigen::Index d = x.cols();
  if (m <= d + 1) throw DegenerateStructureError("too few observations for gradient estimation");

  Eigen::VectorXd inv_h(d);
  const double rate = std::pow(static_cast<double>(m), -1.0 / (static_cast<double>(d) + 4.0));
  for (Eigen::Index c = 0; c < d; ++c) {
    const double mean = x.col(c).mean();
    const double sd = std::sqrt((x.col(c).array() - mean).square().sum() / static_cast<double>(m - 1));
    if (!(sd > 0.0)) throw DegenerateStructureError("covariate column has zero variance");
    inv_h[c] = 1.0 / (1.5 * sd * rate);
  }

  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd gram(d + 1, d + 1);
  Eigen::VectorXd moment(d + 1);
  Eigen::VectorXd z(d + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    gram.setZero();
    moment.setZero();
    for (Eigen::Index j = 0; j < m; ++j) {
      double exponent = 0.0;
      z[0] = 1.0;
      for (Eigen::Index c = 0; c < d; ++c) {
        const double delta = x(j, c) - x(i, c);
        const double u = delta * inv_h[c];
        exponent += u * u;
        z[c + 1] = delta;
      }
      if (exponent > 72.0) continue;  // weight below e^-36
      const double w = std::exp(-0.5 * exponent);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(z, w);
      moment.noalias() += (w * t[j]) * z;
    }
    Eigen::MatrixXd full = gram.selfadjointView<Eigen::Lower>();
    full.diagonal().array() += 1e-12 * full.diagonal().maxCoeff();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(full);
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::VectorXd coef = ldlt.solve(moment);
    const Eigen::VectorXd slope = coef.tail(d);
    if (!slope.allFinite()) continue;
    outer.noalias() += slope * slope.transpose();
  }
  outer /= static_cast<double>(m);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(outer);
  if (eig.info() != Eigen::Success) throw DegenerateStructureError("eigen-decomposition failed");
  const auto& values = eig.eigenvalues();  // ascending
  if (!(values[d - 1] >= 1e-10)) throw DegenerateStructureError("gradient outer product is ~0");
  Eigen::MatrixXd basis(d, target_dim);
  for (int c = 0; c < target_dim; ++c) basis.col(c) = eig.eigenvectors().col(d - 1 - c);
  fix_signs(basis);
  return basis;
}

std::string default_tag(NuisanceMethod method) {
  switch (method) {
    case NuisanceMethod::Oracle: return "O";
    case NuisanceMethod::Parametric: return "P";
    case NuisanceMethod::Nonparametric: return "N";
    case NuisanceMethod::Semiparametric: return "S";
  }
  return "?";
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::VectorXd fit_logistic_mle(const Eigen::MatrixXd& features, const Eigen::VectorXd& d) {
  const Eigen::Index n = features.rows();
  const Eigen::Index q = features.cols();
  if (q < 1) throw ArgumentError("logistic fit needs at least one feature");
  if (d.size() != n) throw ArgumentError("features and response differ in length");
  if (n <= q) throw ArgumentError("logistic fit needs more observations than features");
  const double treated = d.sum();
  if (treated <= 0.0 || treated >= static_cast<double>(n))
    throw ConvergenceError("response has a single class; the MLE does not exist (separation)");
  if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(features).rank() < q)
    throw RankError("logistic design matrix is rank deficient");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd eta = features * beta;
  double loglik = log_likelihood(eta, d);
  for (int iteration = 0; iteration <= kMaxNewtonIterations; ++iteration) {
    Eigen::VectorXd p(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = expit(eta[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
    const Eigen::VectorXd score = features.transpose() * (d - p);
    if (score.cwiseAbs().maxCoeff() / static_cast<double>(n) < kScoreTolerance) {
      // A vanishing score with fitted probabilities at 0/1 is separation, not an optimum.
      if ((d - p).cwiseAbs().maxCoeff() < kSeparationGap)
        throw ConvergenceError("fitted probabilities reach 0 or 1 (separation)");
      return beta;
    }
    if (iteration == kMaxNewtonIterations) break;

    const Eigen::MatrixXd hessian = features.transpose() * w.asDiagonal() * features;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff())
      throw RankError("logistic Hessian is singular");
    Eigen::VectorXd step = ldlt.solve(score);

    // Step halving keeps the log-likelihood monotone up to rounding noise.
    const double slack = 1e-12 * (1.0 + std::abs(loglik));
    Eigen::VectorXd candidate = beta + step;
    Eigen::VectorXd candidate_eta = features * candidate;
    double candidate_loglik = log_likelihood(candidate_eta, d);
    for (int halving = 0; halving < 30 && candidate_loglik < loglik - slack; ++halving) {
      step *= 0.5;
      candidate = beta + step;
      candidate_eta = features * candidate;
      candidate_loglik = log_likelihood(candidate_eta, d);
    }
    beta = candidate;
    eta = candidate_eta;
    loglik = candidate_loglik;
    if (!beta.allFinite() || beta.norm() > kDivergenceNorm)
      throw ConvergenceError("logistic coefficients diverge (separation)");
  }
  throw ConvergenceError("logistic Newton-Raphson did not converge in 100 iterations");
}

Eigen::VectorXd fit_linear_ls(const Eigen::MatrixXd& features, const Eigen::VectorXd& y,
                              const std::vector<Eigen::Index>& subset) {
  const Eigen::Index q = features.cols();
  if (y.size() != features.rows()) throw ArgumentError("features and response differ in length");
  if (subset.empty()) throw ArgumentError("least-squares subset is empty");
  if (static_cast<Eigen::Index>(subset.size()) <= q)
    throw ArgumentError("least-squares subset must be larger than the number of features");
  for (auto row : subset)
    if (row < 0 || row >= features.rows()) throw ArgumentError("subset index out of range");

  const Eigen::MatrixXd design = gather_rows(features, subset);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < q) throw RankError("least-squares design is rank deficient");
  return qr.solve(gather(y, subset));
}

std::string to_string(FeatureMap map) {
  switch (map) {
    case FeatureMap::InterceptAll: return "intercept+all";
    case FeatureMap::InterceptX1: return "intercept+x1";
    case FeatureMap::InterceptAllProduct: return "intercept+all+product";
  }
  return "unknown";
}

FeatureMap parse_feature_map(const std::string& text) {
  for (auto map : {FeatureMap::InterceptAll, FeatureMap::InterceptX1, FeatureMap::InterceptAllProduct})
    if (to_string(map) == text) return map;
  throw ArgumentError("unknown feature map '" + text + "'");
}

Eigen::MatrixXd build_features(const Dataset& data, FeatureMap map) {
  const Eigen::Index n = data.n();
  const Eigen::MatrixXd& covariates = map == FeatureMap::InterceptX1 ? data.x1() : data.x();
  const Eigen::Index extra = map == FeatureMap::InterceptAllProduct ? 1 : 0;
  Eigen::MatrixXd out(n, 1 + covariates.cols() + extra);
  out.col(0).setOnes();
  out.middleCols(1, covariates.cols()) = covariates;
  if (extra) out.col(out.cols() - 1) = data.x().rowwise().prod();
  return out;
}

void ParametricSpec::validate() const {
  if (role == NuisanceRole::Propensity && link != Link::Logistic)
    throw ArgumentError("propensity models use the logistic link");
  if (role != NuisanceRole::Propensity && link != Link::Identity)
    throw ArgumentError("outcome models use the identity link");
}

void TrimBounds::validate() const {
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) throw ArgumentError("trim bounds must satisfy 0 < lo < hi < 1");
}

KernelFit fit_propensity_np(const Dataset& data, const KernelSpec& kernel, double h, TrimBounds trim,
                            EmptyWindowPolicy policy) {
  check_kernel_dim(kernel, data.covariate_dim());
  return propensity_in(data.x(), data.d(), kernel, h, trim, policy);
}

KernelFit fit_outcome_np(const Dataset& data, int arm, const KernelSpec& kernel, double h,
                         EmptyWindowPolicy policy) {
  check_kernel_dim(kernel, data.covariate_dim());
  return outcome_in(data.x(), data, arm, kernel, h, policy);
}

void SdrSpec::validate(int d) const {
  if (target_dim < 1 || target_dim > d)
    throw ArgumentError("reduced dimension must lie in 1.." + std::to_string(d));
  if (oracle && (oracle->rows() != d || oracle->cols() != target_dim))
    throw ArgumentError("oracle basis must be " + std::to_string(d) + " x " + std::to_string(target_dim));
}

Eigen::MatrixXd estimate_sdr_matrix(const Dataset& data, SdrResponse response, const SdrSpec& spec) {
  spec.validate(data.covariate_dim());
  if (spec.oracle) return orthonormalize(*spec.oracle);

  if (response == SdrResponse::Treatment) return opg_basis(data.x(), data.d(), spec.target_dim);
  const auto rows = data.arm_rows(response == SdrResponse::TreatedOutcome ? 1 : 0);
  const Eigen::VectorXd t = gather(data.y(), rows);
  // A constant arm response has no informative direction; any basis fits it exactly.
  if (t.size() > 0 && (t.array() == t[0]).all())
    return Eigen::MatrixXd::Identity(data.covariate_dim(), spec.target_dim);
  return opg_basis(gather_rows(data.x(), rows), t, spec.target_dim);
}

KernelFit fit_semiparametric(const Dataset& data, NuisanceRole component, const Eigen::MatrixXd& basis,
                             const KernelSpec& kernel, double h, TrimBounds trim, EmptyWindowPolicy policy) {
  if (basis.rows() != data.covariate_dim())
    throw ArgumentError("projection basis must have one row per covariate");
  check_kernel_dim(kernel, basis.cols());
  const Eigen::MatrixXd projected = data.x() * basis;
  switch (component) {
    case NuisanceRole::Propensity: return propensity_in(projected, data.d(), kernel, h, trim, policy);
    case NuisanceRole::Outcome1: return outcome_in(projected, data, 1, kernel, h, policy);
    case NuisanceRole::Outcome0: return outcome_in(projected, data, 0, kernel, h, policy);
  }
  throw ArgumentError("unknown nuisance component");
}

std::string to_string(NuisanceMethod method) {
  switch (method) {
    case NuisanceMethod::Oracle: return "oracle";
    case NuisanceMethod::Parametric: return "parametric";
    case NuisanceMethod::Nonparametric: return "nonparametric";
    case NuisanceMethod::Semiparametric: return "semiparametric";
  }
  return "unknown";
}

NuisanceFit assemble_nuisance(const Dataset& data, const NuisanceConfig& config, const OracleValues* oracle) {
  config.trim.validate();
  const auto n = data.n();
  const auto need_oracle = [&](Eigen::VectorXd OracleValues::*member) -> const Eigen::VectorXd& {
    if (oracle == nullptr) throw ArgumentError("oracle nuisance requested without true values");
    const Eigen::VectorXd& values = oracle->*member;
    if (values.size() != n) throw ArgumentError("oracle values do not match the sample size");
    return values;
  };
  const auto tag_of = [](const ComponentConfig& c) { return c.tag.empty() ? default_tag(c.method) : c.tag; };

  NuisanceFit fit;
  fit.trim = config.trim;

  const auto& ps = config.propensity;
  fit.p_method = tag_of(ps);
  switch (ps.method) {
    case NuisanceMethod::Oracle:
      fit.p_hat = need_oracle(&OracleValues::p).unaryExpr([&](double p) { return config.trim.apply(p); });
      break;
    case NuisanceMethod::Parametric: {
      const Eigen::MatrixXd features = build_features(data, ps.features);
      fit.beta = fit_logistic_mle(features, data.d());
      const Eigen::VectorXd eta = features * *fit.beta;
      fit.p_hat = eta.unaryExpr([&](double e) { return config.trim.apply(expit(e)); });
      break;
    }
    case NuisanceMethod::Nonparametric: {
      auto k = fit_propensity_np(data, ps.kernel, ps.bandwidth, config.trim, EmptyWindowPolicy::ArmMean);
      fit.p_hat = std::move(k.values);
      fit.empty_windows += k.empty_windows;
      break;
    }
    case NuisanceMethod::Semiparametric: {
      fit.propensity_basis = estimate_sdr_matrix(data, SdrResponse::Treatment, ps.sdr);
      auto k = fit_semiparametric(data, NuisanceRole::Propensity, *fit.propensity_basis, ps.kernel,
                                  ps.bandwidth, config.trim, EmptyWindowPolicy::ArmMean);
      fit.p_hat = std::move(k.values);
      fit.empty_windows += k.empty_windows;
      break;
    }
  }

  for (int arm : {1, 0}) {
    const auto& oc = arm == 1 ? config.outcome1 : config.outcome0;
    const auto role = arm == 1 ? NuisanceRole::Outcome1 : NuisanceRole::Outcome0;
    Eigen::VectorXd values;
    std::optional<Eigen::VectorXd> gamma;
    std::optional<Eigen::MatrixXd> basis;
    switch (oc.method) {
      case NuisanceMethod::Oracle:
        values = need_oracle(arm == 1 ? &OracleValues::m1 : &OracleValues::m0);
        break;
      case NuisanceMethod::Parametric: {
        const Eigen::MatrixXd features = build_features(data, oc.features);
        gamma = fit_linear_ls(features, data.y(), data.arm_rows(arm));
        values = features * *gamma;
        break;
      }
      case NuisanceMethod::Nonparametric: {
        auto k = fit_outcome_np(data, arm, oc.kernel, oc.bandwidth, EmptyWindowPolicy::ArmMean);
        values = std::move(k.values);
        fit.empty_windows += k.empty_windows;
        break;
      }
      case NuisanceMethod::Semiparametric: {
        basis = estimate_sdr_matrix(
            data, arm == 1 ? SdrResponse::TreatedOutcome : SdrResponse::ControlOutcome, oc.sdr);
        auto k = fit_semiparametric(data, role, *basis, oc.kernel, oc.bandwidth, config.trim,
                                    EmptyWindowPolicy::ArmMean);
        values = std::move(k.values);
        fit.empty_windows += k.empty_windows;
        break;
      }
    }
    if (arm == 1) {
      fit.m1_hat = std::move(values);
      fit.m1_method = tag_of(oc);
      fit.gamma1 = std::move(gamma);
      fit.outcome1_basis = std::move(basis);
    } else {
      fit.m0_hat = std::move(values);
      fit.m0_method = tag_of(oc);
      fit.gamma0 = std::move(gamma);
      fit.outcome0_basis = std::move(basis);
    }
  }
  return fit;
}

}  // namespace drcate

#include "drcate/asymptotics.hpp"

#include <cmath>

#include "drcate/error.hpp"

namespace drcate {

namespace {

void check_open_unit(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError(std::string(name) + " must lie strictly inside (0, 1)");
}

// Raw kernel weights K1((X1_i - at)/h1).
Eigen::VectorXd raw_weights(const Eigen::MatrixXd& x1, const Eigen::VectorXd& at, const KernelSpec& k1,
                            double h1) {
  k1.validate();
  if (k1.dim != x1.cols() || at.size() != x1.cols()) throw ArgumentError("dimension mismatch");
  if (!(h1 > 0.0)) throw ArgumentError("h1 must be positive");
  Eigen::VectorXd w(x1.rows());
  const double inv_h = 1.0 / h1;
  for (Eigen::Index i = 0; i < x1.rows(); ++i) {
    double k = 1.0;
    for (Eigen::Index c = 0; c < x1.cols(); ++c)
      k *= kernel_univariate(k1.family, k1.order, (x1(i, c) - at[c]) * inv_h);
    w[i] = k;
  }
  return w;
}

}  // namespace

std::optional<double> sigma_sq_plugin(const Eigen::MatrixXd& x1, const Eigen::VectorXd& psi, double tau_at,
                                      const Eigen::VectorXd& at, const KernelSpec& k1, double h1) {
  if (psi.size() != x1.rows()) throw ArgumentError("pseudo-outcomes do not match X1");
  const Eigen::VectorXd w = raw_weights(x1, at, k1, h1);
  const double mass = w.sum();
  if (!(mass > 0.0)) return std::nullopt;
  const double smoothed = w.dot((psi.array() - tau_at).square().matrix()) / mass;
  return std::max(smoothed, 0.0);
}

double v_of(double sigma_sq, double f_hat, const KernelSpec& k1) {
  if (!(f_hat > 0.0)) throw ArgumentError("density estimate must be positive");
  if (!(sigma_sq >= 0.0)) throw ArgumentError("conditional variance must be non-negative");
  return sigma_sq * kernel_roughness(k1) / f_hat;
}

void attach_plugin_variance(CateCurve& curve, const Eigen::MatrixXd& x1, const Eigen::VectorXd& psi) {
  for (auto& point : curve.points) {
    if (point.missing()) continue;
    const auto sigma_sq = sigma_sq_plugin(x1, psi, *point.tau_hat, point.x1, curve.kernel, curve.h1);
    if (sigma_sq) point.v_hat = v_of(*sigma_sq, *point.f_hat, curve.kernel);
  }
}

double vd(double p1, double p2) {
  check_open_unit(p1, "p1");
  check_open_unit(p2, "p2");
  const double q1 = 1.0 - p1;
  const double q2 = 1.0 - p2;
  return (p1 * p1 - p2 * p2) / (p1 * p2 * p2) + (q1 * q1 - q2 * q2) / (q1 * q2 * q2);
}

double sigma2_minus_sigma1_homoscedastic(double p1, double p2, double xi_sq) {
  if (!(xi_sq > 0.0)) throw ArgumentError("xi^2 must be positive");
  return xi_sq * vd(p1, p2);
}

// ---------------------------------------------------------------------------

double MisspecificationSpec::p(const Eigen::VectorXd& x) const {
  const double base = base_p(x);
  return c_n == 0.0 ? base : base * (1.0 + c_n * a(x));
}

double MisspecificationSpec::m1(const Eigen::VectorXd& x) const {
  const double base = base_m1(x);
  return d1_n == 0.0 ? base : base + d1_n * b1(x);
}

double MisspecificationSpec::m0(const Eigen::VectorXd& x) const {
  const double base = base_m0(x);
  return d0_n == 0.0 ? base : base + d0_n * b0(x);
}

Eigen::VectorXd psi_values(PsiKind kind, const PopulationSample& sample, const LimitingModels& limits) {
  const auto n = sample.y.size();
  const bool working_p = kind == PsiKind::Psi2 || kind == PsiKind::Psi4;
  const bool working_m = kind == PsiKind::Psi3 || kind == PsiKind::Psi4;
  if (working_p && limits.p_tilde.size() != n) throw ArgumentError("limiting propensity missing");
  if (working_m && (limits.m1_tilde.size() != n || limits.m0_tilde.size() != n))
    throw ArgumentError("limiting outcome models missing");

  Eigen::VectorXd psi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = working_p ? limits.p_tilde[i] : sample.p[i];
    const double m1 = working_m ? limits.m1_tilde[i] : sample.m1[i];
    const double m0 = working_m ? limits.m0_tilde[i] : sample.m0[i];
    psi[i] = pseudo_outcome(p, m1, m0, sample.y[i], sample.d[i]);
  }
  return psi;
}

std::optional<McEstimate> conditional_mean(const Eigen::MatrixXd& x1, const Eigen::VectorXd& values,
                                           const Eigen::VectorXd& at, const KernelSpec& k1, double h1) {
  if (values.size() != x1.rows()) throw ArgumentError("values do not match X1");
  const Eigen::VectorXd w = raw_weights(x1, at, k1, h1);
  const double mass = w.sum();
  if (!(mass > 0.0)) return std::nullopt;
  const Eigen::VectorXd omega = w / mass;
  McEstimate out;
  out.value = omega.dot(values);
  out.se = std::sqrt((omega.array().square() * (values.array() - out.value).square()).sum());
  return out;
}

std::optional<McEstimate> bias_formula(const PopulationSample& sample, const LimitingModels& limits,
                                       const Eigen::VectorXd& at, const KernelSpec& k1, double h1) {
  const auto n = sample.y.size();
  if (limits.p_tilde.size() != n || limits.m1_tilde.size() != n || limits.m0_tilde.size() != n)
    throw ArgumentError("limiting models do not match the sample");
  Eigen::VectorXd integrand(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pt = limits.p_tilde[i];
    check_open_unit(pt, "limiting propensity");
    integrand[i] = (sample.m1[i] - limits.m1_tilde[i]) * (sample.p[i] - pt) / pt -
                   (sample.m0[i] - limits.m0_tilde[i]) * (pt - sample.p[i]) / (1.0 - pt);
  }
  return conditional_mean(sample.x1, integrand, at, k1, h1);
}

std::optional<McEstimate> tau_tilde(const PopulationSample& sample, const LimitingModels& limits,
                                    const Eigen::VectorXd& at, const KernelSpec& k1, double h1) {
  return conditional_mean(sample.x1, psi_values(PsiKind::Psi4, sample, limits), at, k1, h1);
}

std::optional<McEstimate> population_sigma_sq(PsiKind kind, const PopulationSample& sample,
                                              const LimitingModels& limits, const Eigen::VectorXd& at,
                                              const KernelSpec& k1, double h1) {
  const PsiKind centre_kind = kind == PsiKind::Psi4 ? PsiKind::Psi4 : PsiKind::Psi1;
  const auto centre = conditional_mean(sample.x1, psi_values(centre_kind, sample, limits), at, k1, h1);
  if (!centre) return std::nullopt;
  const Eigen::VectorXd psi = psi_values(kind, sample, limits);
  return conditional_mean(sample.x1, (psi.array() - centre->value).square().matrix(), at, k1, h1);
}

std::vector<VarianceCurvePoint> variance_curves(const PopulationSample& sample, const LimitingModels& limits,
                                                const std::vector<Eigen::VectorXd>& grid,
                                                const KernelSpec& k1, double h1) {
  const double scale = static_cast<double>(sample.x1.rows()) * std::pow(h1, k1.dim);
  std::vector<VarianceCurvePoint> out;
  for (const auto& at : grid) {
    VarianceCurvePoint point;
    point.x1 = at;
    const double f_hat = raw_weights(sample.x1, at, k1, h1).sum() / scale;
    if (f_hat > 0.0) {
      const auto v = [&](PsiKind kind) -> std::optional<double> {
        const auto s = population_sigma_sq(kind, sample, limits, at, k1, h1);
        if (!s) return std::nullopt;
        return v_of(std::max(s->value, 0.0), f_hat, k1);
      };
      point.v1 = v(PsiKind::Psi1);
      point.v2 = v(PsiKind::Psi2);
      point.v3 = v(PsiKind::Psi3);
      point.v4 = v(PsiKind::Psi4);
      if (const auto b = bias_formula(sample, limits, at, k1, h1)) point.bias = b->value;
    }
    out.push_back(std::move(point));
  }
  return out;
}

}  // namespace drcate

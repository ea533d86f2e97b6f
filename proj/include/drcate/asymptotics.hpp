#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "drcate/estimator.hpp"
#include "drcate/kernels.hpp"

namespace drcate {

// ---------------------------------------------------------------------------
// Plug-in variance of the CATE estimator

// Kernel-smoothed (psi_i - tau_at)^2 over X1 at `at`, clamped at zero
// (higher-order kernels can produce negative smooths). nullopt on an empty
// window.
std::optional<double> sigma_sq_plugin(const Eigen::MatrixXd& x1, const Eigen::VectorXd& psi, double tau_at,
                                      const Eigen::VectorXd& at, const KernelSpec& k1, double h1);

// sigma_sq * int K1^2 / f_hat. Throws ArgumentError if f_hat <= 0 or
// sigma_sq < 0.
double v_of(double sigma_sq, double f_hat, const KernelSpec& k1);

// Fills v_hat for every non-missing point of `curve` (computed on the same
// X1 and pseudo-outcomes that produced it).
void attach_plugin_variance(CateCurve& curve, const Eigen::MatrixXd& x1, const Eigen::VectorXd& psi);

// ---------------------------------------------------------------------------
// Constant-propensity variance difference

// Variance change factor when the true propensity p1 is replaced by a
// constant working value p2. Negative values mean the variance shrinks.
// Throws ArgumentError unless both arguments lie in (0, 1).
double vd(double p1, double p2);

// xi^2 vd(p1, p2) for homoscedastic outcomes with variance xi^2.
double sigma2_minus_sigma1_homoscedastic(double p1, double p2, double xi_sq);

// ---------------------------------------------------------------------------
// Population quantities by large-sample Monte Carlo

// Truth p = p~(x; beta0) (1 + c_n a(x)), m_j = m~_j(x; gamma_j0) + d_jn b_j(x).
struct MisspecificationSpec {
  using Function = std::function<double(const Eigen::VectorXd&)>;

  double c_n = 0.0;
  double d1_n = 0.0;
  double d0_n = 0.0;
  Function a;
  Function b1;
  Function b0;
  Function base_p;
  Function base_m1;
  Function base_m0;

  bool propensity_correct() const noexcept { return c_n == 0.0; }
  bool outcome_correct() const noexcept { return d1_n == 0.0 && d0_n == 0.0; }

  double p(const Eigen::VectorXd& x) const;
  double m1(const Eigen::VectorXd& x) const;
  double m0(const Eigen::VectorXd& x) const;
};

// A large draw with its true nuisance values.
struct PopulationSample {
  Eigen::MatrixXd x;
  Eigen::MatrixXd x1;
  Eigen::VectorXd y;
  Eigen::VectorXd d;
  Eigen::VectorXd p;
  Eigen::VectorXd m1;
  Eigen::VectorXd m0;
};

// Limiting working models p~(.; beta*), m~_j(.; gamma_j*) at each sample row.
struct LimitingModels {
  Eigen::VectorXd p_tilde;
  Eigen::VectorXd m1_tilde;
  Eigen::VectorXd m0_tilde;
};

// Psi1 (p, m1, m0), Psi2 (p~, m1, m0), Psi3 (p, m~1, m~0), Psi4 (p~, m~1, m~0).
enum class PsiKind { Psi1, Psi2, Psi3, Psi4 };

Eigen::VectorXd psi_values(PsiKind kind, const PopulationSample& sample, const LimitingModels& limits);

struct McEstimate {
  double value = 0.0;
  double se = 0.0;  // Monte Carlo standard error of the kernel-weighted mean
};

// Kernel-weighted conditional mean of `values` at `at` with its standard
// error sqrt(sum w_i^2 (z_i - mean)^2), w normalised. nullopt on zero mass.
std::optional<McEstimate> conditional_mean(const Eigen::MatrixXd& x1, const Eigen::VectorXd& values,
                                           const Eigen::VectorXd& at, const KernelSpec& k1, double h1);

// E{ (m1 - m~1)(p - p~)/p~ - (m0 - m~0)(p~ - p)/(1 - p~) | X1 = at }.
std::optional<McEstimate> bias_formula(const PopulationSample& sample, const LimitingModels& limits,
                                       const Eigen::VectorXd& at, const KernelSpec& k1, double h1);

// E{ Psi4 | X1 = at }.
std::optional<McEstimate> tau_tilde(const PopulationSample& sample, const LimitingModels& limits,
                                    const Eigen::VectorXd& at, const KernelSpec& k1, double h1);

// E{ (Psi_kind - c)^2 | X1 = at } where c is the conditional mean of Psi1
// (of Psi4 for kind Psi4).
std::optional<McEstimate> population_sigma_sq(PsiKind kind, const PopulationSample& sample,
                                              const LimitingModels& limits, const Eigen::VectorXd& at,
                                              const KernelSpec& k1, double h1);

struct VarianceCurvePoint {
  Eigen::VectorXd x1;
  std::optional<double> v1, v2, v3, v4, bias;
};

// V1..V4 and bias at each grid point, with f(x1) estimated from the sample.
std::vector<VarianceCurvePoint> variance_curves(const PopulationSample& sample, const LimitingModels& limits,
                                                const std::vector<Eigen::VectorXd>& grid,
                                                const KernelSpec& k1, double h1);

}  // namespace drcate

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcate/dataset.hpp"
#include "drcate/kernels.hpp"

namespace drcate {

// ---------------------------------------------------------------------------
// Parametric fits

// Newton-Raphson logistic MLE. Stops when the max-norm of the mean score is
// below 1e-10 (at most 100 iterations).
// Throws ConvergenceError for a single-class response, a coefficient norm
// above 1e6, or no convergence; RankError for a singular Hessian.
Eigen::VectorXd fit_logistic_mle(const Eigen::MatrixXd& features, const Eigen::VectorXd& d);

// Least-squares coefficients on the rows listed in `subset`.
// Throws ArgumentError when subset.size() <= q, RankError when the subset
// design is rank deficient.
Eigen::VectorXd fit_linear_ls(const Eigen::MatrixXd& features, const Eigen::VectorXd& y,
                              const std::vector<Eigen::Index>& subset);

enum class NuisanceRole { Propensity, Outcome1, Outcome0 };
enum class Link { Logistic, Identity };

// Named regressor layouts:
//   intercept+all          (1, X)
//   intercept+x1           (1, X1)
//   intercept+all+product  (1, X, prod_j X_j)
enum class FeatureMap { InterceptAll, InterceptX1, InterceptAllProduct };

std::string to_string(FeatureMap map);
FeatureMap parse_feature_map(const std::string& text);
Eigen::MatrixXd build_features(const Dataset& data, FeatureMap map);

struct ParametricSpec {
  NuisanceRole role = NuisanceRole::Propensity;
  FeatureMap features = FeatureMap::InterceptAll;
  Link link = Link::Logistic;

  // Propensity needs the logistic link, outcomes the identity link.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Trimming

struct TrimBounds {
  double lo = 0.005;
  double hi = 0.995;

  void validate() const;
  double apply(double p) const noexcept { return p < lo ? lo : (p > hi ? hi : p); }

  friend bool operator==(const TrimBounds&, const TrimBounds&) = default;
};

// ---------------------------------------------------------------------------
// Kernel fits

enum class EmptyWindowPolicy {
  Throw,    // EmptyWindowError
  ArmMean,  // substitute the sample mean of the targets and count the event
};

struct KernelFit {
  Eigen::VectorXd values;
  int empty_windows = 0;
};

// Kernel propensity fit at every X_i (self-inclusive), trimmed.
KernelFit fit_propensity_np(const Dataset& data, const KernelSpec& kernel, double h, TrimBounds trim = {},
                            EmptyWindowPolicy policy = EmptyWindowPolicy::Throw);

// Kernel regression of Y on X within one arm, evaluated at every X_i.
KernelFit fit_outcome_np(const Dataset& data, int arm, const KernelSpec& kernel, double h,
                         EmptyWindowPolicy policy = EmptyWindowPolicy::Throw);

// ---------------------------------------------------------------------------
// Dimension reduction

enum class SdrResponse { Treatment, TreatedOutcome, ControlOutcome };

struct SdrSpec {
  int target_dim = 1;
  // Oracle basis (d x target_dim); empty optional means estimate by OPG.
  std::optional<Eigen::MatrixXd> oracle;

  void validate(int d) const;
};

// Returns a d x target_dim matrix with orthonormal columns. Oracle input is
// orthonormalised; otherwise the outer-product-of-gradients estimate is used
// (local-linear slopes with a Gaussian product kernel, per-coordinate
// bandwidth 1.5 sd_c n^(-1/(d+4))).
// Throws DegenerateStructureError when the slope spectrum is ~0 or the
// oracle basis is rank deficient.
Eigen::MatrixXd estimate_sdr_matrix(const Dataset& data, SdrResponse response, const SdrSpec& spec);

// Kernel fit in the projected space X B. `basis` must be d x kernel.dim.
KernelFit fit_semiparametric(const Dataset& data, NuisanceRole component, const Eigen::MatrixXd& basis,
                             const KernelSpec& kernel, double h, TrimBounds trim = {},
                             EmptyWindowPolicy policy = EmptyWindowPolicy::Throw);

// ---------------------------------------------------------------------------
// Assembly

enum class NuisanceMethod { Oracle, Parametric, Nonparametric, Semiparametric };

std::string to_string(NuisanceMethod method);

struct ComponentConfig {
  NuisanceMethod method = NuisanceMethod::Parametric;
  std::string tag;  // provenance label such as "cP", "mP", "N", "S", "O"
  FeatureMap features = FeatureMap::InterceptAll;
  KernelSpec kernel;
  double bandwidth = 1.0;
  SdrSpec sdr;
};

struct NuisanceConfig {
  ComponentConfig propensity;
  ComponentConfig outcome1;
  ComponentConfig outcome0;
  TrimBounds trim;
};

// True nuisance values at the sample points (simulation only).
struct OracleValues {
  Eigen::VectorXd p;
  Eigen::VectorXd m1;
  Eigen::VectorXd m0;
};

struct NuisanceFit {
  Eigen::VectorXd p_hat;
  Eigen::VectorXd m1_hat;
  Eigen::VectorXd m0_hat;

  std::string p_method;
  std::string m1_method;
  std::string m0_method;

  std::optional<Eigen::VectorXd> beta;
  std::optional<Eigen::VectorXd> gamma1;
  std::optional<Eigen::VectorXd> gamma0;
  std::optional<Eigen::MatrixXd> propensity_basis;
  std::optional<Eigen::MatrixXd> outcome1_basis;
  std::optional<Eigen::MatrixXd> outcome0_basis;

  TrimBounds trim;
  int empty_windows = 0;  // queries that fell back to the arm mean
};

// Fits all three nuisance components. Empty kernel windows fall back to the
// arm mean and are counted. Oracle components need `oracle`.
NuisanceFit assemble_nuisance(const Dataset& data, const NuisanceConfig& config,
                              const OracleValues* oracle = nullptr);

}  // namespace drcate

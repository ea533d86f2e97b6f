#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "drcate/dataset.hpp"
#include "drcate/kernels.hpp"
#include "drcate/nuisance.hpp"

namespace drcate {

// d (y - m1) / p - (1 - d)(y - m0) / (1 - p) + m1 - m0.
// Throws ArgumentError unless 0 < p < 1 and d is 0 or 1.
double pseudo_outcome(double p, double m1, double m0, double y, double d);

// Pseudo-outcome for every observation of `data` under `fit`.
Eigen::VectorXd pseudo_outcomes(const Dataset& data, const NuisanceFit& fit);

struct CatePoint {
  Eigen::VectorXd x1;
  // Empty when the kernel mass at x1 is not positive.
  std::optional<double> tau_hat;
  std::optional<double> f_hat;
  std::optional<double> v_hat;  // plug-in asymptotic variance, filled later
  std::size_t n_eff = 0;        // observations with nonzero kernel weight

  bool missing() const noexcept { return !tau_hat.has_value(); }
};

struct CateCurve {
  std::vector<CatePoint> points;
  Eigen::Index n = 0;
  double h1 = 0.0;
  KernelSpec kernel;
  int missing_points = 0;

  // Normal band tau_hat +- z sqrt(v_hat / (n h1^k)); nullopt when v_hat is unset.
  std::optional<std::pair<double, double>> band(std::size_t index, double z = 1.96) const;
};

// Second-step kernel smoothing of `psi` over X1 at each grid point.
// Throws ArgumentError if K1.dim != k, h1 <= 0 or a grid point has the wrong
// length.
CateCurve smooth_over_x1(const Eigen::MatrixXd& x1, const Eigen::VectorXd& psi,
                         const std::vector<Eigen::VectorXd>& grid, const KernelSpec& k1, double h1);

CateCurve estimate_cate(const Dataset& data, const NuisanceFit& fit, const std::vector<Eigen::VectorXd>& grid,
                        const KernelSpec& k1, double h1);

// Normalised second-step weights K1((X1_i - x1)/h1) / sum_t K1(...).
// Throws EmptyWindowError when the kernel mass is zero.
Eigen::VectorXd cate_weights(const Eigen::MatrixXd& x1, const Eigen::VectorXd& at, const KernelSpec& k1,
                             double h1);

// sqrt(n h1^k) (tau_hat - tau_true).
double standardized_stat(double tau_hat, double tau_true, Eigen::Index n, double h1, int k);

// Convenience for scalar grids.
std::vector<Eigen::VectorXd> scalar_grid(const std::vector<double>& values);

}  // namespace drcate

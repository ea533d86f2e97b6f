#include "drcate/estimator.hpp"

#include <cmath>

#include "drcate/error.hpp"
#include "drcate/smoother.hpp"

namespace drcate {

double pseudo_outcome(double p, double m1, double m0, double y, double d) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("propensity must lie strictly inside (0, 1)");
  if (d != 0.0 && d != 1.0) throw ArgumentError("treatment indicator must be 0 or 1");
  return d * (y - m1) / p - (1.0 - d) * (y - m0) / (1.0 - p) + m1 - m0;
}

Eigen::VectorXd pseudo_outcomes(const Dataset& data, const NuisanceFit& fit) {
  const auto n = data.n();
  if (fit.p_hat.size() != n || fit.m1_hat.size() != n || fit.m0_hat.size() != n)
    throw ArgumentError("nuisance fit does not match the dataset");
  Eigen::VectorXd psi(n);
  for (Eigen::Index i = 0; i < n; ++i)
    psi[i] = pseudo_outcome(fit.p_hat[i], fit.m1_hat[i], fit.m0_hat[i], data.y()[i], data.d()[i]);
  return psi;
}

std::optional<std::pair<double, double>> CateCurve::band(std::size_t index, double z) const {
  const auto& point = points.at(index);
  if (!point.tau_hat || !point.v_hat) return std::nullopt;
  const double scale = static_cast<double>(n) * std::pow(h1, kernel.dim);
  const double half = z * std::sqrt(*point.v_hat / scale);
  return std::make_pair(*point.tau_hat - half, *point.tau_hat + half);
}

CateCurve smooth_over_x1(const Eigen::MatrixXd& x1, const Eigen::VectorXd& psi,
                         const std::vector<Eigen::VectorXd>& grid, const KernelSpec& k1, double h1) {
  k1.validate();
  if (k1.dim != x1.cols()) throw ArgumentError("K1 dimension must equal the conditioning dimension");
  if (!(h1 > 0.0)) throw ArgumentError("h1 must be positive");
  if (psi.size() != x1.rows()) throw ArgumentError("pseudo-outcomes do not match X1");

  const KernelSmoother smoother(x1, psi, k1, h1);
  CateCurve curve;
  curve.n = x1.rows();
  curve.h1 = h1;
  curve.kernel = k1;
  const double scale = static_cast<double>(curve.n) * std::pow(h1, k1.dim);
  for (const auto& at : grid) {
    if (at.size() != k1.dim) throw ArgumentError("grid point has the wrong dimension");
    CatePoint point;
    point.x1 = at;
    const auto sums = smoother.sums(std::span<const double>(at.data(), static_cast<std::size_t>(at.size())));
    point.n_eff = sums.support;
    if (sums.mass > 0.0) {
      point.tau_hat = smoother.reference() + sums.weighted / sums.mass;
      point.f_hat = sums.mass / scale;
    } else {
      ++curve.missing_points;
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

CateCurve estimate_cate(const Dataset& data, const NuisanceFit& fit, const std::vector<Eigen::VectorXd>& grid,
                        const KernelSpec& k1, double h1) {
  return smooth_over_x1(data.x1(), pseudo_outcomes(data, fit), grid, k1, h1);
}

Eigen::VectorXd cate_weights(const Eigen::MatrixXd& x1, const Eigen::VectorXd& at, const KernelSpec& k1,
                             double h1) {
  k1.validate();
  if (k1.dim != x1.cols() || at.size() != x1.cols()) throw ArgumentError("dimension mismatch");
  if (!(h1 > 0.0)) throw ArgumentError("h1 must be positive");
  Eigen::VectorXd w(x1.rows());
  std::vector<double> u(static_cast<std::size_t>(x1.cols()));
  for (Eigen::Index i = 0; i < x1.rows(); ++i) {
    for (Eigen::Index c = 0; c < x1.cols(); ++c) u[static_cast<std::size_t>(c)] = (x1(i, c) - at[c]) / h1;
    w[i] = kernel_eval(k1, u);
  }
  const double mass = w.sum();
  if (mass == 0.0) throw EmptyWindowError("no observation carries kernel weight at the grid point");
  return w / mass;
}

double standardized_stat(double tau_hat, double tau_true, Eigen::Index n, double h1, int k) {
  if (n < 1) throw ArgumentError("sample size must be positive");
  if (!(h1 > 0.0)) throw ArgumentError("h1 must be positive");
  return std::sqrt(static_cast<double>(n) * std::pow(h1, k)) * (tau_hat - tau_true);
}

std::vector<Eigen::VectorXd> scalar_grid(const std::vector<double>& values) {
  std::vector<Eigen::VectorXd> grid;
  grid.reserve(values.size());
  for (double v : values) grid.push_back(Eigen::VectorXd::Constant(1, v));
  return grid;
}

}  // namespace drcate

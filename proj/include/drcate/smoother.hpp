#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "drcate/kernels.hpp"

namespace drcate {

// Nadaraya-Watson smoother over a fixed training set.
//
// For compact kernels the rows are sorted on the first coordinate so a query
// only visits rows inside [q0 - h, q0 + h]; summation follows that sorted
// order, so results do not depend on the caller's row order beyond ties.
// Targets are centred on the first training target before summation, which
// makes the fit of a constant target exact.
class KernelSmoother {
 public:
  // `inputs` is m x r with r == kernel.dim; `targets` has length m.
  KernelSmoother(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, KernelSpec kernel,
                 double bandwidth);

  struct Sums {
    double weighted = 0.0;  // sum K_j (t_j - t_ref)
    double mass = 0.0;      // sum K_j
    std::size_t support = 0;  // rows with K_j != 0
  };

  Sums sums(std::span<const double> query) const;

  // Fitted value; std::nullopt when the kernel mass at the query is zero.
  std::optional<double> fit(std::span<const double> query) const;

  double reference() const noexcept { return reference_; }
  Eigen::Index size() const noexcept { return rows_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  double bandwidth() const noexcept { return bandwidth_; }

 private:
  KernelSpec kernel_;
  double bandwidth_;
  Eigen::Index rows_;
  int dim_;
  std::vector<double> points_;   // row-major, sorted by first coordinate
  std::vector<double> centred_;  // t_j - reference_
  std::vector<double> first_;    // first coordinate, sorted
  double reference_ = 0.0;
};

// Single-query Nadaraya-Watson fit; throws EmptyWindowError on zero mass.
double nw_regress(const Eigen::MatrixXd& train_inputs, const Eigen::VectorXd& train_targets,
                  std::span<const double> query, const KernelSpec& kernel, double h);

}  // namespace drcate

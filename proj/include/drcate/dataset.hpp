#pragma once

#include <vector>

#include <Eigen/Dense>

namespace drcate {

// Observed sample (X, Y, D) with the columns of X that form the conditioning
// subvector X1.
class Dataset {
 public:
  // Throws ArgumentError / SchemaError when the invariants fail:
  // matching lengths, n >= 2, 0 < k < d, distinct in-range x1 columns,
  // D binary with both arms present.
  Dataset(Eigen::MatrixXd x, std::vector<int> x1_columns, Eigen::VectorXd y, Eigen::VectorXd d);

  Eigen::Index n() const noexcept { return x_.rows(); }
  int covariate_dim() const noexcept { return static_cast<int>(x_.cols()); }
  int conditioning_dim() const noexcept { return static_cast<int>(x1_columns_.size()); }

  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const Eigen::VectorXd& y() const noexcept { return y_; }
  const Eigen::VectorXd& d() const noexcept { return d_; }
  const std::vector<int>& x1_columns() const noexcept { return x1_columns_; }

  // n x k matrix of the conditioning columns.
  const Eigen::MatrixXd& x1() const noexcept { return x1_; }

  // Row indices with D == arm.
  std::vector<Eigen::Index> arm_rows(int arm) const;

 private:
  Eigen::MatrixXd x_;
  std::vector<int> x1_columns_;
  Eigen::VectorXd y_;
  Eigen::VectorXd d_;
  Eigen::MatrixXd x1_;
};

}  // namespace drcate

#include "drcate/dataset.hpp"

#include <set>
#include <string>

#include "drcate/error.hpp"

namespace drcate {

Dataset::Dataset(Eigen::MatrixXd x, std::vector<int> x1_columns, Eigen::VectorXd y, Eigen::VectorXd d)
    : x_(std::move(x)), x1_columns_(std::move(x1_columns)), y_(std::move(y)), d_(std::move(d)) {
  const auto n = x_.rows();
  if (n < 2) throw ArgumentError("dataset needs at least two observations");
  if (y_.size() != n || d_.size() != n)
    throw ArgumentError("X, Y and D must have the same number of rows");
  const int dim = static_cast<int>(x_.cols());
  const int k = static_cast<int>(x1_columns_.size());
  if (k < 1) throw ArgumentError("at least one conditioning column is required");
  if (k >= dim) throw ArgumentError("conditioning dimension must be smaller than covariate dimension");
  std::set<int> seen;
  for (int column : x1_columns_) {
    if (column < 0 || column >= dim)
      throw ArgumentError("conditioning column " + std::to_string(column) + " out of range");
    if (!seen.insert(column).second)
      throw ArgumentError("conditioning column " + std::to_string(column) + " listed twice");
  }
  if (!x_.allFinite() || !y_.allFinite()) throw ArgumentError("X and Y must be finite");

  bool treated = false;
  bool control = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d_[i] == 1.0) {
      treated = true;
    } else if (d_[i] == 0.0) {
      control = true;
    } else {
      throw SchemaError("treatment indicator must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    }
  }
  if (!treated || !control) throw ArgumentError("both treatment arms must be present");

  x1_.resize(n, k);
  for (int c = 0; c < k; ++c) x1_.col(c) = x_.col(x1_columns_[c]);
}

std::vector<Eigen::Index> Dataset::arm_rows(int arm) const {
  std::vector<Eigen::Index> rows;
  const double value = arm == 1 ? 1.0 : 0.0;
  for (Eigen::Index i = 0; i < n(); ++i)
    if (d_[i] == value) rows.push_back(i);
  return rows;
}

}  // namespace drcate

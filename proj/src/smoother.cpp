#include "drcate/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drcate/error.hpp"

namespace drcate {

KernelSmoother::KernelSmoother(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                               KernelSpec kernel, double bandwidth)
    : kernel_(kernel), bandwidth_(bandwidth), rows_(inputs.rows()), dim_(static_cast<int>(inputs.cols())) {
  kernel_.validate();
  if (kernel_.dim != dim_)
    throw ArgumentError("kernel dimension " + std::to_string(kernel_.dim) +
                        " does not match input dimension " + std::to_string(dim_));
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ArgumentError("bandwidth must be positive");
  if (rows_ < 1) throw ArgumentError("smoother needs at least one training row");
  if (targets.size() != rows_) throw ArgumentError("targets and inputs differ in length");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows_));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (kernel_.compact()) {
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return inputs(a, 0) < inputs(b, 0); });
  }

  reference_ = targets[0];
  points_.resize(static_cast<std::size_t>(rows_) * dim_);
  centred_.resize(static_cast<std::size_t>(rows_));
  first_.resize(static_cast<std::size_t>(rows_));
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto src = order[r];
    for (int c = 0; c < dim_; ++c) points_[r * dim_ + c] = inputs(src, c);
    centred_[r] = targets[src] - reference_;
    first_[r] = inputs(src, 0);
  }
}

KernelSmoother::Sums KernelSmoother::sums(std::span<const double> query) const {
  if (query.size() != static_cast<std::size_t>(dim_))
    throw ArgumentError("query dimension does not match the smoother");

  std::size_t begin = 0;
  std::size_t end = centred_.size();
  if (kernel_.compact()) {
    begin = static_cast<std::size_t>(
        std::lower_bound(first_.begin(), first_.end(), query[0] - bandwidth_) - first_.begin());
    end = static_cast<std::size_t>(
        std::upper_bound(first_.begin(), first_.end(), query[0] + bandwidth_) - first_.begin());
  }

  const double inv_h = 1.0 / bandwidth_;
  Sums out;
  for (std::size_t r = begin; r < end; ++r) {
    const double* row = points_.data() + r * dim_;
    double weight = 1.0;
    for (int c = 0; c < dim_ && weight != 0.0; ++c)
      weight *= kernel_univariate(kernel_.family, kernel_.order, (row[c] - query[c]) * inv_h);
    if (weight == 0.0) continue;
    out.weighted += weight * centred_[r];
    out.mass += weight;
    ++out.support;
  }
  return out;
}

std::optional<double> KernelSmoother::fit(std::span<const double> query) const {
  const auto s = sums(query);
  if (s.mass == 0.0) return std::nullopt;
  return reference_ + s.weighted / s.mass;
}

double nw_regress(const Eigen::MatrixXd& train_inputs, const Eigen::VectorXd& train_targets,
                  std::span<const double> query, const KernelSpec& kernel, double h) {
  const KernelSmoother smoother(train_inputs, train_targets, kernel, h);
  const auto value = smoother.fit(query);
  if (!value) throw EmptyWindowError("no training point carries kernel weight at the query");
  return *value;
}

}  // namespace drcate

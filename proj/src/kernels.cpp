#include "drcate/kernels.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "drcate/error.hpp"

namespace drcate {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934381868;
constexpr double kGaussianCutoff = 12.0;

double integrate(auto&& f, double lo, double hi) {
  double error = 0.0;
  // Tolerance is relative to the L1 norm; all integrands here are O(1).
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, lo, hi, 15, 1e-13, &error);
  return value;
}

double support_bound(KernelFamily family) {
  return family == KernelFamily::Gaussian ? kGaussianCutoff : 1.0;
}

}  // namespace

void KernelSpec::validate() const {
  if (order != 2 && order != 4 && order != 6)
    throw ArgumentError("kernel order must be 2, 4 or 6, got " + std::to_string(order));
  if (dim < 1) throw ArgumentError("kernel dimension must be positive");
}

std::string_view to_string(KernelFamily family) {
  return family == KernelFamily::Gaussian ? "gaussian" : "epanechnikov";
}

std::string to_string(const KernelSpec& spec) {
  return std::string(to_string(spec.family)) + ":" + std::to_string(spec.order);
}

KernelSpec parse_kernel(std::string_view text, int dim) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ArgumentError("kernel must look like family:order, got '" + std::string(text) + "'");
  const auto name = text.substr(0, colon);
  const auto order_text = std::string(text.substr(colon + 1));

  KernelSpec spec;
  if (name == "gaussian") {
    spec.family = KernelFamily::Gaussian;
  } else if (name == "epanechnikov") {
    spec.family = KernelFamily::Epanechnikov;
  } else {
    throw ArgumentError("unknown kernel family '" + std::string(name) + "'");
  }
  std::size_t used = 0;
  try {
    spec.order = std::stoi(order_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != order_text.size())
    throw ArgumentError("bad kernel order '" + order_text + "'");
  spec.dim = dim;
  spec.validate();
  return spec;
}

double kernel_univariate(KernelFamily family, int order, double u) noexcept {
  const double u2 = u * u;
  if (family == KernelFamily::Gaussian) {
    const double phi = kInvSqrt2Pi * std::exp(-0.5 * u2);
    switch (order) {
      case 2: return phi;
      case 4: return 0.5 * (3.0 - u2) * phi;
      default: return 0.125 * (15.0 - 10.0 * u2 + u2 * u2) * phi;
    }
  }
  if (std::abs(u) > 1.0) return 0.0;
  const double base = 1.0 - u2;
  switch (order) {
    case 2: return 0.75 * base;
    case 4: return (15.0 / 32.0) * base * (3.0 - 7.0 * u2);
    default: return (105.0 / 256.0) * base * (5.0 - 30.0 * u2 + 33.0 * u2 * u2);
  }
}

double kernel_eval(const KernelSpec& spec, std::span<const double> u) {
  spec.validate();
  if (u.size() != static_cast<std::size_t>(spec.dim))
    throw ArgumentError("kernel argument has length " + std::to_string(u.size()) +
                        ", kernel dimension is " + std::to_string(spec.dim));
  double value = 1.0;
  for (double ui : u) value *= kernel_univariate(spec.family, spec.order, ui);
  return value;
}

double kernel_moment(const KernelSpec& spec, int j) {
  spec.validate();
  if (spec.dim != 1) throw ArgumentError("kernel_moment needs a one-dimensional kernel");
  if (j < 0) throw ArgumentError("moment index must be non-negative");
  const double bound = support_bound(spec.family);
  auto integrand = [&](double u) {
    return std::pow(u, j) * kernel_univariate(spec.family, spec.order, u);
  };
  // Split at zero so odd moments cancel exactly between the halves.
  return integrate(integrand, -bound, 0.0) + integrate(integrand, 0.0, bound);
}

double kernel_roughness(const KernelSpec& spec) {
  spec.validate();
  double one_dim = 0.0;
  if (spec.order == 2) {
    one_dim = spec.family == KernelFamily::Epanechnikov ? 0.6 : 0.5 / std::sqrt(std::numbers::pi);
  } else {
    const double bound = support_bound(spec.family);
    auto integrand = [&](double u) {
      const double k = kernel_univariate(spec.family, spec.order, u);
      return k * k;
    };
    one_dim = 2.0 * integrate(integrand, 0.0, bound);
  }
  return std::pow(one_dim, spec.dim);
}

}  // namespace drcate

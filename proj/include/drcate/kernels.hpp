#pragma once

#include <span>
#include <string>
#include <string_view>

namespace drcate {

enum class KernelFamily { Gaussian, Epanechnikov };

// A symmetric product kernel of a given order (2, 4 or 6) in `dim` dimensions.
//
// Gaussian members are Hermite-polynomial corrections of the standard normal
// density; Epanechnikov members are the Gegenbauer corrections of
// (3/4)(1 - u^2) and vanish outside [-1, 1]^dim.
struct KernelSpec {
  KernelFamily family = KernelFamily::Epanechnikov;
  int order = 2;
  int dim = 1;

  // Throws ArgumentError unless order is 2, 4 or 6 and dim >= 1.
  void validate() const;

  bool compact() const noexcept { return family == KernelFamily::Epanechnikov; }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

// "gaussian:4" / "epanechnikov:2"; the dimension is supplied separately.
KernelSpec parse_kernel(std::string_view text, int dim);
std::string to_string(const KernelSpec& spec);  // family:order, no dimension
std::string_view to_string(KernelFamily family);

// Univariate member k(u) of the family. No validation; callers go through
// kernel_eval or KernelSpec::validate first.
double kernel_univariate(KernelFamily family, int order, double u) noexcept;

// prod_i k(u_i). Throws ArgumentError if u.size() != spec.dim.
double kernel_eval(const KernelSpec& spec, std::span<const double> u);

// int u^j k(u) du for a one-dimensional kernel, by adaptive Gauss-Kronrod.
// Epanechnikov integrates over [-1, 1], Gaussian over [-12, 12].
double kernel_moment(const KernelSpec& spec, int j);

// int K(u)^2 du over R^dim. Order-2 members use their closed forms.
double kernel_roughness(const KernelSpec& spec);

}  // namespace drcate

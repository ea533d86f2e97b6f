#pragma once

#include <map>
#include <string>
#include <vector>

namespace drcate {

// Bandwidth roles h1..h7:
//   h1 second-step smoother over X1,
//   h2/h3/h4 nonparametric propensity / treated / control fits,
//   h5/h6/h7 the same three fits in the reduced (projected) space.
inline constexpr int kFirstRole = 1;
inline constexpr int kLastRole = 7;

struct RateEntry {
  double scale = 1.0;     // a_j
  double exponent = 0.2;  // eta_j

  friend bool operator==(const RateEntry&, const RateEntry&) = default;
};

// h_j(n) = a_j * n^(-eta_j) for each configured role.
class BandwidthSchedule {
 public:
  BandwidthSchedule() = default;

  // Throws ArgumentError for a role outside 1..7 or a non-positive a/eta.
  void set(int role, RateEntry entry);
  bool has(int role) const { return entries_.count(role) != 0; }
  const RateEntry& at(int role) const;
  double resolve(int role, double n) const;

  const std::map<int, RateEntry>& entries() const noexcept { return entries_; }

  friend bool operator==(const BandwidthSchedule&, const BandwidthSchedule&) = default;

 private:
  std::map<int, RateEntry> entries_;
};

// Which group of asymptotic results the schedule must support.
enum class RateScenario {
  ParametricOnly,          // only the second-step smoother
  AllCorrect,              // every nuisance route
  PropensityMisspecified,  // outcome fits nonparametric or reduced
  OutcomeMisspecified,     // propensity fit nonparametric or reduced
  LocalMisspecification,   // same set as AllCorrect
};

std::string to_string(RateScenario scenario);
RateScenario parse_rate_scenario(const std::string& text);

// One rate requirement expressed on the exponents: holds iff lhs > rhs
// (or lhs >= rhs when `closed`).
struct RateCondition {
  std::string statement;  // asymptotic form, e.g. "n h1^k -> inf"
  std::string inequality; // exponent form, e.g. "1 - k eta1 > 0"
  double lhs = 0.0;
  double rhs = 0.0;
  bool closed = false;
};

struct RateReport {
  std::vector<RateCondition> violated;
  // Conditions met only with equality; accepted (see check_rate_conditions).
  std::vector<RateCondition> boundary;

  bool satisfied() const noexcept { return violated.empty(); }
};

// Roles each scenario needs in the schedule.
std::vector<int> required_roles(RateScenario scenario);

// Evaluates the bandwidth-rate system on the exponents. `orders` maps role ->
// kernel order s_j; `d` is the covariate dimension and `k` the conditioning
// dimension.
//
// h_j -> 0 and n h1^k -> inf are strict. Every other requirement is checked on
// the closure of its half-space (equality accepted and reported as boundary),
// since the reference schedules sit exactly on those faces.
//
// Throws ArgumentError for a missing role/order, eta <= 0, or bad dimensions.
RateReport check_rate_conditions(const BandwidthSchedule& schedule, const std::map<int, int>& orders,
                                 int d, int k, RateScenario scenario);

}  // namespace drcate

#include "drcate/bandwidth.hpp"

#include <algorithm>
#include <cmath>

#include "drcate/error.hpp"

namespace drcate {

namespace {

constexpr double kBoundaryTolerance = 1e-9;

std::string h(int role) { return "h" + std::to_string(role); }
std::string s(int role) { return "s" + std::to_string(role); }
std::string eta(int role) { return "eta" + std::to_string(role); }

class Evaluator {
 public:
  explicit Evaluator(RateReport& report) : report_(report) {}

  void require(std::string statement, std::string inequality, double lhs, double rhs, bool closed) {
    RateCondition condition{std::move(statement), std::move(inequality), lhs, rhs, closed};
    const double slack = lhs - rhs;
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    const bool on_face = std::abs(slack) <= kBoundaryTolerance * scale;
    if (on_face) {
      (closed ? report_.boundary : report_.violated).push_back(std::move(condition));
    } else if (slack < 0.0) {
      report_.violated.push_back(std::move(condition));
    }
  }

 private:
  RateReport& report_;
};

}  // namespace

void BandwidthSchedule::set(int role, RateEntry entry) {
  if (role < kFirstRole || role > kLastRole)
    throw ArgumentError("bandwidth role must be in 1..7, got " + std::to_string(role));
  if (!(entry.scale > 0.0) || !std::isfinite(entry.scale))
    throw ArgumentError("bandwidth scale a" + std::to_string(role) + " must be positive");
  if (!(entry.exponent > 0.0) || !std::isfinite(entry.exponent))
    throw ArgumentError("bandwidth exponent eta" + std::to_string(role) + " must be positive");
  entries_[role] = entry;
}

const RateEntry& BandwidthSchedule::at(int role) const {
  const auto it = entries_.find(role);
  if (it == entries_.end()) throw ArgumentError("bandwidth schedule has no entry for " + h(role));
  return it->second;
}

double BandwidthSchedule::resolve(int role, double n) const {
  if (!(n >= 1.0)) throw ArgumentError("sample size must be at least 1");
  const auto& entry = at(role);
  return entry.scale * std::pow(n, -entry.exponent);
}

std::string to_string(RateScenario scenario) {
  switch (scenario) {
    case RateScenario::ParametricOnly: return "parametric-only";
    case RateScenario::AllCorrect: return "all-correct";
    case RateScenario::PropensityMisspecified: return "propensity-misspecified";
    case RateScenario::OutcomeMisspecified: return "outcome-misspecified";
    case RateScenario::LocalMisspecification: return "local-misspecification";
  }
  return "unknown";
}

RateScenario parse_rate_scenario(const std::string& text) {
  for (auto scenario : {RateScenario::ParametricOnly, RateScenario::AllCorrect,
                        RateScenario::PropensityMisspecified, RateScenario::OutcomeMisspecified,
                        RateScenario::LocalMisspecification}) {
    if (to_string(scenario) == text) return scenario;
  }
  throw ArgumentError("unknown rate scenario '" + text + "'");
}

std::vector<int> required_roles(RateScenario scenario) {
  switch (scenario) {
    case RateScenario::ParametricOnly: return {1};
    case RateScenario::PropensityMisspecified: return {1, 3, 4, 6, 7};
    case RateScenario::OutcomeMisspecified: return {1, 2, 5};
    case RateScenario::AllCorrect:
    case RateScenario::LocalMisspecification: return {1, 2, 3, 4, 5, 6, 7};
  }
  return {};
}

RateReport check_rate_conditions(const BandwidthSchedule& schedule, const std::map<int, int>& orders,
                                 int d, int k, RateScenario scenario) {
  if (k < 1) throw ArgumentError("conditioning dimension k must be positive");
  if (d <= k) throw ArgumentError("covariate dimension d must exceed k");

  const auto roles = required_roles(scenario);
  std::map<int, double> eta_of;
  std::map<int, double> order_of;
  for (int role : roles) {
    if (!schedule.has(role))
      throw ArgumentError("scenario " + to_string(scenario) + " needs bandwidth " + h(role));
    const auto it = orders.find(role);
    if (it == orders.end())
      throw ArgumentError("scenario " + to_string(scenario) + " needs kernel order " + s(role));
    if (it->second < 1) throw ArgumentError("kernel order " + s(role) + " must be positive");
    eta_of[role] = schedule.at(role).exponent;
    order_of[role] = it->second;
  }
  const auto present = [&](int role) { return eta_of.count(role) != 0; };

  RateReport report;
  Evaluator check(report);
  const double e1 = eta_of.at(1);
  const double s1 = order_of.at(1);

  check.require("h1 -> 0", "eta1 > 0", e1, 0.0, false);
  check.require("n h1^k -> inf", "1 > k eta1", 1.0, k * e1, false);
  check.require("n h1^(2 s1 + k) -> 0", "(2 s1 + k) eta1 > 1", (2.0 * s1 + k) * e1, 1.0, true);

  for (int j = 2; j <= kLastRole; ++j) {
    if (!present(j)) continue;
    const double ej = eta_of.at(j);
    const double sj = order_of.at(j);
    check.require(h(j) + " -> 0", eta(j) + " > 0", ej, 0.0, false);
    check.require("ln n / (n " + h(j) + "^(d + " + s(j) + ")) -> 0",
                  "1 > (d + " + s(j) + ") " + eta(j), 1.0, (d + sj) * ej, true);
  }
  for (int j = 2; j <= kLastRole; ++j) {
    if (!present(j)) continue;
    const double ej = eta_of.at(j);
    const double sj = order_of.at(j);
    check.require(h(j) + "^(2 " + s(j) + ") h1^(-2 " + s(j) + " - k) -> 0",
                  "2 " + s(j) + " " + eta(j) + " > (2 " + s(j) + " + k) eta1", 2.0 * sj * ej,
                  (2.0 * sj + k) * e1, true);
    check.require("n h1^k " + h(j) + "^(2 " + s(j) + ") -> 0",
                  "2 " + s(j) + " " + eta(j) + " > 1 - k eta1", 2.0 * sj * ej, 1.0 - k * e1, true);
  }
  for (int first : {2, 5}) {
    for (int second : {3, 4, 6, 7}) {
      if (!present(first) || !present(second)) continue;
      check.require("n h1^k " + h(first) + "^" + s(first) + " " + h(second) + "^" + s(second) + " -> 0",
                    s(first) + " " + eta(first) + " + " + s(second) + " " + eta(second) + " > 1 - k eta1",
                    order_of.at(first) * eta_of.at(first) + order_of.at(second) * eta_of.at(second),
                    1.0 - k * e1, true);
    }
  }
  return report;
}

}  // namespace drcate

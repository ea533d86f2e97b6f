#include "drcate/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drcate/error.hpp"

namespace drcate {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

void reject_unknown(const Json& object, const std::string& path, const std::set<std::string>& allowed) {
  if (!object.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : object.items())
    if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double get_number(const Json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double out = v.get<double>();
  if (!std::isfinite(out)) fail(path, "must be finite");
  return out;
}

std::int64_t get_integer(const Json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9.0e15) return static_cast<std::int64_t>(x);
  }
  fail(path, "expected an integer");
}

std::string get_string(const Json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

bool get_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

std::vector<double> get_numbers(const Json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// Number, or "a/b" / decimal string.
double get_exponent(const Json& v, const std::string& path) {
  if (v.is_number()) return get_number(v, path);
  const auto text = get_string(v, path);
  const auto parse = [&](std::string_view part) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc() || ptr != part.data() + part.size()) fail(path, "bad exponent '" + text + "'");
    return out;
  };
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse(text);
  const double den = parse(std::string_view(text).substr(slash + 1));
  if (den == 0.0) fail(path, "zero denominator");
  return parse(std::string_view(text).substr(0, slash)) / den;
}

// "h3" / "k3" / "s3" -> 3.
int role_of(const std::string& key, char prefix, const std::string& path) {
  if (key.size() == 2 && key[0] == prefix && key[1] >= '1' && key[1] <= '7') return key[1] - '0';
  fail(join(path, key), std::string("expected a role name ") + prefix + "1.." + prefix + "7");
}

NuisanceMethod parse_method(const std::string& text, const std::string& path) {
  for (auto m : {NuisanceMethod::Parametric, NuisanceMethod::Nonparametric, NuisanceMethod::Semiparametric})
    if (to_string(m) == text) return m;
  if (text == to_string(NuisanceMethod::Oracle)) fail(path, "oracle nuisances need simulated data");
  fail(path, "unknown method '" + text + "'");
}

template <typename Fn>
auto guarded(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

void read_estimate(const Json& j, EstimateSettings& out) {
  const std::string path = "estimate";
  reject_unknown(j, path,
                 {"data", "x1_columns", "propensity", "outcome", "propensity_features", "outcome_features",
                  "propensity_sdr_dim", "outcome_sdr_dim"});
  if (j.contains("data")) out.data = get_string(j["data"], join(path, "data"));
  if (j.contains("x1_columns")) {
    const auto& cols = j["x1_columns"];
    if (!cols.is_array() || cols.empty()) fail(join(path, "x1_columns"), "expected a non-empty array of names");
    out.x1_columns.clear();
    for (const auto& c : cols) out.x1_columns.push_back(get_string(c, join(path, "x1_columns")));
  }
  if (j.contains("propensity"))
    out.propensity = parse_method(get_string(j["propensity"], join(path, "propensity")), join(path, "propensity"));
  if (j.contains("outcome"))
    out.outcome = parse_method(get_string(j["outcome"], join(path, "outcome")), join(path, "outcome"));
  for (auto [key, target] : {std::pair{"propensity_features", &out.propensity_features},
                             std::pair{"outcome_features", &out.outcome_features}}) {
    if (!j.contains(key)) continue;
    const auto p = join(path, key);
    *target = guarded(p, [&] { return parse_feature_map(get_string(j[key], p)); });
  }
  for (auto [key, target] : {std::pair{"propensity_sdr_dim", &out.propensity_sdr_dim},
                             std::pair{"outcome_sdr_dim", &out.outcome_sdr_dim}}) {
    if (!j.contains(key)) continue;
    const auto value = get_integer(j[key], join(path, key));
    if (value < 1) fail(join(path, key), "must be at least 1");
    *target = static_cast<int>(value);
  }
}

void read_variance(const Json& j, VarianceSettings& out) {
  const std::string path = "variance";
  reject_unknown(j, path, {"p1", "points", "xi_sq", "population_n", "propensity_working", "outcome_working"});
  if (j.contains("p1")) {
    out.p1 = get_numbers(j["p1"], join(path, "p1"));
    for (double p : out.p1)
      if (!(p > 0.0 && p < 1.0)) fail(join(path, "p1"), "values must lie in (0, 1)");
  }
  if (j.contains("points")) {
    const auto points = get_integer(j["points"], join(path, "points"));
    if (points < 1 || points > 100000) fail(join(path, "points"), "must lie in 1..100000");
    out.points = static_cast<int>(points);
  }
  if (j.contains("xi_sq")) {
    out.xi_sq = get_number(j["xi_sq"], join(path, "xi_sq"));
    if (!(out.xi_sq > 0.0)) fail(join(path, "xi_sq"), "must be positive");
  }
  if (j.contains("population_n")) {
    out.population_n = get_integer(j["population_n"], join(path, "population_n"));
    if (out.population_n < 0 || out.population_n == 1) fail(join(path, "population_n"), "must be 0 or at least 2");
  }
  for (auto [key, target] : {std::pair{"propensity_working", &out.propensity_working},
                             std::pair{"outcome_working", &out.outcome_working}}) {
    if (!j.contains(key)) continue;
    const auto p = join(path, key);
    *target = get_string(j[key], p);
    if (!target->empty()) guarded(p, [&] { return parse_feature_map(*target); });
  }
}

void read_rates(const Json& j, RatesSettings& out) {
  const std::string path = "rates";
  reject_unknown(j, path, {"scenario", "orders", "d", "k"});
  if (j.contains("scenario")) {
    const auto p = join(path, "scenario");
    out.scenario = guarded(p, [&] { return parse_rate_scenario(get_string(j["scenario"], p)); });
  }
  if (j.contains("orders")) {
    const auto p = join(path, "orders");
    if (!j["orders"].is_object()) fail(p, "expected an object such as {\"s1\": 4}");
    out.orders.clear();
    for (const auto& [key, value] : j["orders"].items()) {
      const auto order = get_integer(value, join(p, key));
      if (order < 1) fail(join(p, key), "must be positive");
      out.orders[role_of(key, 's', p)] = static_cast<int>(order);
    }
  }
  if (j.contains("d")) {
    const auto d = get_integer(j["d"], join(path, "d"));
    if (d < 0) fail(join(path, "d"), "must be non-negative");
    out.d = static_cast<int>(d);
  }
  if (j.contains("k")) {
    const auto k = get_integer(j["k"], join(path, "k"));
    if (k < 1) fail(join(path, "k"), "must be positive");
    out.k = static_cast<int>(k);
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "",
                 {"model", "n", "seed", "reps", "threads", "out", "combination", "grid", "estimate_sdr",
                  "bandwidths", "kernels", "trim", "estimate", "variance", "rates"});

  RunConfig config;
  if (root.contains("model")) config.model = guarded("model", [&] { return parse_model(get_string(root["model"], "model")); });
  if (root.contains("n")) {
    config.n = get_integer(root["n"], "n");
    if (config.n < 2) fail("n", "must be at least 2");
  }
  if (root.contains("seed")) {
    const auto& s = root["seed"];
    if (s.is_number_unsigned()) config.seed = s.get<std::uint64_t>();
    else config.seed = static_cast<std::uint64_t>(get_integer(s, "seed"));
    if (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0) fail("seed", "must be non-negative");
  }
  if (root.contains("reps")) {
    const auto reps = get_integer(root["reps"], "reps");
    if (reps < 1 || reps > 10000000) fail("reps", "must lie in 1..10^7");
    config.reps = static_cast<int>(reps);
  }
  if (root.contains("threads")) {
    const auto threads = get_integer(root["threads"], "threads");
    if (threads < 1 || threads > 1024) fail("threads", "must lie in 1..1024");
    config.threads = static_cast<int>(threads);
  }
  if (root.contains("out")) config.out = get_string(root["out"], "out");
  if (root.contains("combination")) {
    config.combination = get_string(root["combination"], "combination");
    parse_combination(config.combination);
  }
  if (root.contains("grid")) {
    config.grid = get_numbers(root["grid"], "grid");
    if (config.grid.empty()) fail("grid", "must not be empty");
  }
  if (root.contains("estimate_sdr")) config.estimate_sdr = get_bool(root["estimate_sdr"], "estimate_sdr");

  if (root.contains("bandwidths")) {
    const auto& bw = root["bandwidths"];
    if (!bw.is_object()) fail("bandwidths", "expected an object");
    for (const auto& [key, value] : bw.items()) {
      const auto p = join("bandwidths", key);
      const int role = role_of(key, 'h', "bandwidths");
      reject_unknown(value, p, {"scale", "eta"});
      if (!value.contains("scale") || !value.contains("eta")) fail(p, "needs both scale and eta");
      const RateEntry entry{get_number(value["scale"], join(p, "scale")), get_exponent(value["eta"], join(p, "eta"))};
      guarded(p, [&] {
        BandwidthSchedule probe;
        probe.set(role, entry);
        return 0;
      });
      config.bandwidths[role] = entry;
    }
  }
  if (root.contains("kernels")) {
    const auto& ks = root["kernels"];
    if (!ks.is_object()) fail("kernels", "expected an object");
    for (const auto& [key, value] : ks.items()) {
      const auto p = join("kernels", key);
      const int role = role_of(key, 'k', "kernels");
      config.kernels[role] = guarded(p, [&] { return parse_kernel(get_string(value, p), 1); });
    }
  }
  if (root.contains("trim")) {
    reject_unknown(root["trim"], "trim", {"lo", "hi"});
    if (root["trim"].contains("lo")) config.trim.lo = get_number(root["trim"]["lo"], "trim.lo");
    if (root["trim"].contains("hi")) config.trim.hi = get_number(root["trim"]["hi"], "trim.hi");
    guarded("trim", [&] {
      config.trim.validate();
      return 0;
    });
  }
  if (root.contains("estimate")) read_estimate(root["estimate"], config.estimate);
  if (root.contains("variance")) read_variance(root["variance"], config.variance);
  if (root.contains("rates")) read_rates(root["rates"], config.rates);
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const RunConfig& c) {
  OrderedJson root;
  root["model"] = to_string(c.model);
  root["n"] = c.n;
  root["seed"] = c.seed;
  root["reps"] = c.reps;
  root["threads"] = c.threads;
  root["out"] = c.out;
  root["combination"] = c.combination;
  root["grid"] = c.grid;
  root["estimate_sdr"] = c.estimate_sdr;
  root["bandwidths"] = OrderedJson::object();
  for (const auto& [role, entry] : c.bandwidths)
    root["bandwidths"]["h" + std::to_string(role)] = {{"scale", entry.scale}, {"eta", entry.exponent}};
  root["kernels"] = OrderedJson::object();
  for (const auto& [role, spec] : c.kernels) root["kernels"]["k" + std::to_string(role)] = to_string(spec);
  root["trim"] = {{"lo", c.trim.lo}, {"hi", c.trim.hi}};

  const auto& e = c.estimate;
  root["estimate"] = {{"data", e.data},
                      {"x1_columns", e.x1_columns},
                      {"propensity", to_string(e.propensity)},
                      {"outcome", to_string(e.outcome)},
                      {"propensity_features", to_string(e.propensity_features)},
                      {"outcome_features", to_string(e.outcome_features)},
                      {"propensity_sdr_dim", e.propensity_sdr_dim},
                      {"outcome_sdr_dim", e.outcome_sdr_dim}};
  const auto& v = c.variance;
  root["variance"] = {{"p1", v.p1},
                      {"points", v.points},
                      {"xi_sq", v.xi_sq},
                      {"population_n", v.population_n},
                      {"propensity_working", v.propensity_working},
                      {"outcome_working", v.outcome_working}};
  OrderedJson orders = OrderedJson::object();
  for (const auto& [role, s] : c.rates.orders) orders["s" + std::to_string(role)] = s;
  root["rates"] = {{"scenario", to_string(c.rates.scenario)}, {"orders", orders}, {"d", c.rates.d}, {"k", c.rates.k}};
  return root.dump(2) + "\n";
}

std::uint64_t config_hash(const RunConfig& config) {
  RunConfig semantic = config;
  semantic.out.clear();
  semantic.threads = 1;
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char ch : serialize_config(semantic)) {
    hash ^= ch;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string hash_hex(std::uint64_t hash) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, hash >>= 4) out[static_cast<std::size_t>(i)] = kDigits[hash & 0xF];
  return out;
}

BandwidthSchedule effective_schedule(const RunConfig& config) {
  auto schedule = default_schedule(config.model).schedule;
  for (const auto& [role, entry] : config.bandwidths) schedule.set(role, entry);
  return schedule;
}

std::map<int, KernelSpec> effective_kernels(const RunConfig& config) {
  auto kernels = default_schedule(config.model).kernels;
  for (const auto& [role, spec] : config.kernels) {
    auto& target = kernels[role];
    target.family = spec.family;
    target.order = spec.order;
  }
  return kernels;
}

McConfig to_mc_config(const RunConfig& config) {
  McConfig mc = default_mc_config(config.model, config.n, config.combination);
  mc.seed = config.seed;
  mc.grid = config.grid;
  mc.reps = config.reps;
  mc.schedule = effective_schedule(config);
  mc.kernels = effective_kernels(config);
  mc.trim = config.trim;
  mc.estimate_sdr = config.estimate_sdr;
  mc.threads = config.threads;
  return mc;
}

}  // namespace drcate

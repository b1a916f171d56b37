#include "relarb/scenario_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "relarb/error.hpp"

namespace relarb {

using detail::json;

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing required key " + child(key));
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(child(key) + " must be a number");
    return v.get<double>();
  }
  double number(const std::string& key, double def) { return has(key) ? number(key) : def; }

  std::uint64_t unsigned_int(const std::string& key) {
    const json& v = at(key);
    return as_unsigned(v, child(key));
  }
  std::size_t count(const std::string& key, std::size_t def) {
    return has(key) ? static_cast<std::size_t>(unsigned_int(key)) : def;
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(child(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(child(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = at(key);
    return as_numbers(v, child(key));
  }

  Mat matrix(const std::string& key) {
    const json& v = at(key);
    const std::string p = child(key);
    if (!v.is_array() || v.empty()) throw ConfigError(p + " must be a non-empty array of rows");
    const std::size_t cols = v.front().is_array() ? v.front().size() : 0;
    Mat m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto row = as_numbers(v[i], p + "[" + std::to_string(i) + "]");
      if (row.size() != cols) throw ConfigError(p + " rows must have equal length");
      for (std::size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    return m;
  }

  Reader object(const std::string& key) { return Reader(at(key), child(key)); }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "scenario" : path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + child(it.key()));
  }

  static std::uint64_t as_unsigned(const json& v, const std::string& p) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(p + " must be a nonnegative integer");
  }

  static std::vector<double> as_numbers(const json& v, const std::string& p) {
    if (!v.is_array()) throw ConfigError(p + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(p + " must contain numbers only");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

PopulationLaw read_law(const json& v, const std::string& p) {
  if (v.is_number()) return PopulationLaw::point(v.get<double>());
  if (v.is_array()) return PopulationLaw::list(Reader::as_numbers(v, p));
  Reader r(v, p);
  const std::string law = r.text("law");
  PopulationLaw out;
  if (law == "point") {
    out = PopulationLaw::point(r.number("value"));
  } else if (law == "uniform") {
    out = PopulationLaw::uniform(r.number("low"), r.number("high"));
    if (!(out.b > out.a)) throw ConfigError(p + ": uniform law needs low < high");
  } else if (law == "normal") {
    out = PopulationLaw::normal(r.number("mean"), r.number("sd"));
    if (!(out.b >= 0.0)) throw ConfigError(p + ": sd must be nonnegative");
  } else if (law == "lognormal") {
    out = PopulationLaw::lognormal(r.number("log_mean"), r.number("log_sd"));
    if (!(out.b >= 0.0)) throw ConfigError(p + ": log_sd must be nonnegative");
  } else {
    throw ConfigError(p + ".law must be one of point, uniform, normal, lognormal");
  }
  r.finish();
  return out;
}

json write_law(const PopulationLaw& law) {
  switch (law.kind) {
    case PopulationLaw::Kind::list:
      return law.values;
    case PopulationLaw::Kind::point:
      return {{"law", "point"}, {"value", law.a}};
    case PopulationLaw::Kind::uniform:
      return {{"law", "uniform"}, {"low", law.a}, {"high", law.b}};
    case PopulationLaw::Kind::normal:
      return {{"law", "normal"}, {"mean", law.a}, {"sd", law.b}};
    case PopulationLaw::Kind::lognormal:
      return {{"law", "lognormal"}, {"log_mean", law.a}, {"log_sd", law.b}};
  }
  return nullptr;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

MarketParams read_market(Reader r) {
  MarketParams m;
  const std::string kind = r.text("kind");
  if (kind == "constant") {
    m.kind = MarketKind::constant;
    m.beta = to_vec(r.numbers("beta"));
    m.sigma = r.matrix("sigma");
    if (r.has("gamma")) m.gamma = to_vec(r.numbers("gamma"));
    if (r.has("tau")) m.tau = r.matrix("tau");
  } else if (kind == "volatility_stabilized") {
    m.kind = MarketKind::volatility_stabilized;
    m.zeta = r.number("zeta");
    if (!(m.zeta >= 0.0)) throw ConfigError("market.zeta must be nonnegative");
  } else {
    throw ConfigError("market.kind must be constant or volatility_stabilized");
  }
  r.finish();
  return m;
}

StrategySpec read_strategy(Reader r) {
  StrategySpec s;
  const std::string kind = r.text("kind");
  if (kind == "market") {
    s.kind = StrategyKind::market;
  } else if (kind == "equal_weight") {
    s.kind = StrategyKind::equal_weight;
  } else if (kind == "fixed") {
    s.kind = StrategyKind::fixed;
    s.weights = r.numbers("weights");
  } else {
    throw ConfigError("strategy.kind must be market, equal_weight or fixed");
  }
  r.finish();
  return s;
}

SolverSettings read_solver(Reader r) {
  SolverSettings s;
  s.paths = r.count("paths", s.paths);
  s.damping = r.number("damping", s.damping);
  s.tol = r.number("tol", s.tol);
  s.max_iters = r.count("max_iters", s.max_iters);
  s.tol_simplex = r.number("tol_simplex", s.tol_simplex);
  s.k_inner = r.count("k_inner", s.k_inner);
  s.outer_paths = r.count("outer_paths", s.outer_paths);
  s.eval_nodes = r.count("eval_nodes", s.eval_nodes);
  s.sub_paths = r.count("sub_paths", s.sub_paths);
  s.bump_abs = r.number("bump_abs", s.bump_abs);
  s.bump_rel = r.number("bump_rel", s.bump_rel);
  s.threads = r.count("threads", s.threads);
  if (r.has("measure")) {
    const std::string m = r.text("measure");
    if (m == "deflated") {
      s.measure = SamplingMeasure::deflated;
    } else if (m == "physical") {
      s.measure = SamplingMeasure::physical;
    } else {
      throw ConfigError("solver.measure must be deflated or physical");
    }
  }
  r.finish();
  return s;
}

ScenarioFlags read_flags(Reader r) {
  ScenarioFlags f;
  f.ccond_literal = r.boolean("ccond_literal", f.ccond_literal);
  f.cdf_std_normalized = r.boolean("cdf_std_normalized", f.cdf_std_normalized);
  f.strict_simplex = r.boolean("strict_simplex", f.strict_simplex);
  r.finish();
  return f;
}

FdSettings read_fd(Reader r) {
  FdSettings f;
  f.nodes = r.count("nodes", f.nodes);
  f.box_factor = r.number("box_factor", f.box_factor);
  f.cfl = r.number("cfl", f.cfl);
  r.finish();
  return f;
}

FicheraSettings read_fichera(Reader r) {
  FicheraSettings f;
  if (r.has("x_upper")) f.x_upper = r.numbers("x_upper");
  if (r.has("y_upper")) f.y_upper = r.numbers("y_upper");
  f.samples_per_face = r.count("samples_per_face", f.samples_per_face);
  r.finish();
  return f;
}

ConvergenceSettings read_convergence(Reader r) {
  ConvergenceSettings c;
  if (r.has("n_values")) {
    c.n_values.clear();
    for (const auto& v : r.at("n_values")) c.n_values.push_back(Reader::as_unsigned(v, r.child("n_values")));
  }
  if (r.has("seeds")) {
    c.seeds.clear();
    for (const auto& v : r.at("seeds")) c.seeds.push_back(Reader::as_unsigned(v, r.child("seeds")));
  }
  if (r.has("node_times")) c.node_times = r.numbers("node_times");
  c.reference_k = r.count("reference_k", c.reference_k);
  c.random_deviations = r.count("random_deviations", c.random_deviations);
  r.finish();
  return c;
}

ScenarioConfig read_scenario(const json& doc) {
  Reader r(doc, "");
  ScenarioConfig cfg;
  cfg.schema_version = static_cast<int>(r.unsigned_int("schema_version"));
  if (cfg.schema_version != 1) throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
  cfg.n = static_cast<std::size_t>(r.unsigned_int("n"));
  cfg.N = static_cast<std::size_t>(r.unsigned_int("N"));
  cfg.T = r.number("T");
  cfg.steps = static_cast<std::size_t>(r.unsigned_int("steps"));
  cfg.delta = r.number("delta");
  if (r.has("c")) cfg.c_law = read_law(r.at("c"), "c");
  if (r.has("v0")) cfg.v0_law = read_law(r.at("v0"), "v0");
  cfg.x0 = r.numbers("x0");
  if (r.has("y0")) cfg.y0 = r.numbers("y0");
  if (r.has("seed")) cfg.seed = r.unsigned_int("seed");
  if (r.has("y_mode")) {
    const std::string m = r.text("y_mode");
    if (m == "endogenous") {
      cfg.y_mode = YMode::endogenous;
    } else if (m == "exogenous") {
      cfg.y_mode = YMode::exogenous;
    } else {
      throw ConfigError("y_mode must be endogenous or exogenous");
    }
  }
  cfg.market = read_market(r.object("market"));
  if (r.has("strategy")) cfg.strategy = read_strategy(r.object("strategy"));
  if (r.has("solver")) cfg.solver = read_solver(r.object("solver"));
  if (r.has("flags")) cfg.flags = read_flags(r.object("flags"));
  if (r.has("fd")) cfg.fd = read_fd(r.object("fd"));
  if (r.has("fichera")) cfg.fichera = read_fichera(r.object("fichera"));
  if (r.has("convergence")) cfg.convergence = read_convergence(r.object("convergence"));
  cfg.memory_budget_mb = r.number("memory_budget_mb", cfg.memory_budget_mb);
  r.finish();
  check_structure(cfg);
  return cfg;
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return read_scenario(doc);
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string resolved_config_json(const ScenarioConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["n"] = cfg.n;
  j["N"] = cfg.N;
  j["T"] = cfg.T;
  j["steps"] = cfg.steps;
  j["delta"] = cfg.delta;
  j["c"] = write_law(cfg.c_law);
  j["v0"] = write_law(cfg.v0_law);
  j["x0"] = cfg.x0;
  if (!cfg.y0.empty()) j["y0"] = cfg.y0;
  j["seed"] = cfg.seed;
  j["y_mode"] = cfg.y_mode == YMode::endogenous ? "endogenous" : "exogenous";
  json m;
  if (cfg.market.kind == MarketKind::constant) {
    m["kind"] = "constant";
    m["beta"] = detail::to_json(cfg.market.beta);
    m["sigma"] = detail::to_json(cfg.market.sigma);
    if (cfg.market.gamma.size() > 0) m["gamma"] = detail::to_json(cfg.market.gamma);
    if (cfg.market.tau.size() > 0) m["tau"] = detail::to_json(cfg.market.tau);
  } else {
    m["kind"] = "volatility_stabilized";
    m["zeta"] = cfg.market.zeta;
  }
  j["market"] = m;
  json s;
  switch (cfg.strategy.kind) {
    case StrategyKind::market:
      s["kind"] = "market";
      break;
    case StrategyKind::equal_weight:
      s["kind"] = "equal_weight";
      break;
    case StrategyKind::fixed:
      s["kind"] = "fixed";
      s["weights"] = cfg.strategy.weights;
      break;
  }
  j["strategy"] = s;
  const SolverSettings& so = cfg.solver;
  j["solver"] = {{"paths", so.paths},         {"damping", so.damping},         {"tol", so.tol},
                 {"max_iters", so.max_iters}, {"tol_simplex", so.tol_simplex}, {"k_inner", so.k_inner},
                 {"outer_paths", so.outer_paths}, {"eval_nodes", so.eval_nodes}, {"sub_paths", so.sub_paths},
                 {"bump_abs", so.bump_abs},   {"bump_rel", so.bump_rel},       {"threads", so.threads},
                 {"measure", so.measure == SamplingMeasure::deflated ? "deflated" : "physical"}};
  j["flags"] = {{"ccond_literal", cfg.flags.ccond_literal},
                {"cdf_std_normalized", cfg.flags.cdf_std_normalized},
                {"strict_simplex", cfg.flags.strict_simplex}};
  j["fd"] = {{"nodes", cfg.fd.nodes}, {"box_factor", cfg.fd.box_factor}, {"cfl", cfg.fd.cfl}};
  json f = {{"samples_per_face", cfg.fichera.samples_per_face}};
  if (!cfg.fichera.x_upper.empty()) f["x_upper"] = cfg.fichera.x_upper;
  if (!cfg.fichera.y_upper.empty()) f["y_upper"] = cfg.fichera.y_upper;
  j["fichera"] = f;
  json c = {{"n_values", cfg.convergence.n_values},
            {"seeds", cfg.convergence.seeds},
            {"reference_k", cfg.convergence.reference_k},
            {"random_deviations", cfg.convergence.random_deviations}};
  if (!cfg.convergence.node_times.empty()) c["node_times"] = cfg.convergence.node_times;
  j["convergence"] = c;
  j["memory_budget_mb"] = cfg.memory_budget_mb;
  return detail::dump(j);
}

std::string canonical_json(std::string_view text) {
  try {
    return detail::dump(json::parse(text.begin(), text.end()));
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace relarb

// relarb command-line driver.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "relarb/arbitrage.hpp"
#include "relarb/convergence.hpp"
#include "relarb/engine.hpp"
#include "relarb/error.hpp"
#include "relarb/mfg.hpp"
#include "relarb/model.hpp"
#include "relarb/nash.hpp"
#include "relarb/report.hpp"
#include "relarb/scenario_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relarb;

namespace {

constexpr const char* kToolVersion = "0.3.0";

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, data.data(), data.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

struct Stage {
  std::string name;
  std::string status;
  std::string message;
};

class Run {
 public:
  Run(std::string subcommand, std::string config_path, fs::path out)
      : subcommand_(std::move(subcommand)), config_path_(std::move(config_path)), out_(std::move(out)) {
    fs::create_directories(out_);
  }

  void write(const std::string& name, const std::string& text) {
    std::ofstream f(out_ / name, std::ios::binary);
    f << text;
    outputs_.push_back(name);
  }

  void stage(std::string name, std::string status, std::string message = {}) {
    stages_.push_back({std::move(name), std::move(status), std::move(message)});
  }

  void set_config(const std::string& resolved, std::uint64_t seed) {
    hash_ = sha256_hex(resolved);
    seed_ = seed;
    write("resolved_config.json", resolved);
  }

  int finish(int code) {
    json stages = json::array();
    for (const auto& s : stages_) stages.push_back({{"name", s.name}, {"status", s.status}, {"message", s.message}});
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m = {{"subcommand", subcommand_},
              {"config_path", config_path_},
              {"config_sha256", hash_},
              {"seed", seed_ ? json(*seed_) : json(nullptr)},
              {"tool_version", kToolVersion},
              {"outputs", outputs_},
              {"wall_clock_seconds", wall},
              {"stages", stages},
              {"exit_code", code}};
    std::ofstream f(out_ / "manifest.json", std::ios::binary);
    f << canonical_json(m.dump());
    return code;
  }

 private:
  std::string subcommand_;
  std::string config_path_;
  fs::path out_;
  std::string hash_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> outputs_;
  std::vector<Stage> stages_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Wraps a body JSON with the subcommand name and the seed used.
std::string summary(const std::string& subcommand, std::uint64_t seed, const std::string& body) {
  json j = json::parse(body);
  json s = {{"subcommand", subcommand}, {"seed", seed}, {"result", j}};
  return canonical_json(s.dump());
}

int run_validate(Run& run, const ScenarioConfig& cfg) {
  const ValidationReport rep = validate_scenario(cfg);
  run.write("summary.json", summary("validate", cfg.seed, report_json(rep)));
  run.stage("validate", rep.feasible ? "ok" : "infeasible");
  if (!rep.feasible) {
    for (const auto& m : rep.messages) std::cerr << m << "\n";
    return 2;
  }
  return 0;
}

int run_simulate(Run& run, const ScenarioConfig& cfg, const MarketCoefficientOracle& oracle) {
  const StrategyPtr rule = make_strategy(cfg.strategy, cfg.n);
  const ParticlePathSet p = simulate_n_particle(oracle, cfg, *rule, cfg.seed);
  const DeflatorPath d = simulate_deflator(p, oracle, cfg.y_mode);
  const BenchmarkPath b = benchmark_path(p, cfg);
  run.write("summary.json", summary("simulate", cfg.seed, simulation_json(p, d, b)));
  run.write("paths_X.csv", paths_csv(p.grid, p.X, "X"));
  run.write("paths_V.csv", paths_csv(p.grid, p.V, "V"));
  run.write("paths_Y.csv", paths_csv(p.grid, p.Y, "Y"));
  return 0;
}

int run_fichera(Run& run, const ScenarioConfig& cfg, const MarketCoefficientOracle& oracle) {
  const FicheraReport r = fichera_check(oracle, fichera_box(cfg), cfg.fichera.samples_per_face);
  run.write("summary.json", summary("fichera", cfg.seed, report_json(r)));
  return 0;
}

int run_arbitrage(Run& run, const ScenarioConfig& cfg, const MarketCoefficientOracle& oracle) {
  const std::vector<double> c = cfg.c();
  json investors = json::array();
  for (std::size_t l = 0; l < cfg.N; ++l) {
    ArbitrageEstimate e = estimate_u_mc(oracle, cfg, l, cfg.solver.paths, cfg.seed);
    json j = json::parse(report_json(e));
    j["investor"] = l;
    investors.push_back(j);
  }
  const BumpSpec bump{cfg.solver.bump_abs, cfg.solver.bump_rel};
  const GradientBlock g = grad_log_u(oracle, cfg, bump, cfg.seed, cfg.solver.paths);
  json grad = {{"dx", std::vector<double>(g.dx.data(), g.dx.data() + g.dx.size())},
               {"dx_se", std::vector<double>(g.dx_se.data(), g.dx_se.data() + g.dx_se.size())},
               {"dm", g.dm},
               {"dm_se", g.dm_se},
               {"y_available", g.y_available}};
  if (g.y_available) {
    grad["dy"] = std::vector<double>(g.dy.data(), g.dy.data() + g.dy.size());
    grad["dy_se"] = std::vector<double>(g.dy_se.data(), g.dy_se.data() + g.dy_se.size());
  }
  json body = {{"investors", investors}, {"grad_log_u", grad}};
  if (cfg.n == 1 && oracle.time_homogeneous()) {
    CauchyGridSpec spec;
    spec.nodes_x = spec.nodes_y = cfg.fd.nodes;
    spec.box_factor = cfg.fd.box_factor;
    spec.cfl = cfg.fd.cfl;
    const CauchyGrid grid = solve_cauchy_fd(oracle, cfg, spec, c.front());
    body["finite_difference"] = json::parse(report_json(grid));
    run.write("fd_grid.csv", fd_slice_csv(grid, grid.values));
  }
  run.write("summary.json", summary("arbitrage", cfg.seed, body.dump()));
  return 0;
}

int run_nash(Run& run, const ScenarioConfig& cfg, const MarketCoefficientOracle& oracle) {
  const EquilibriumResult r = solve_nash(oracle, cfg, cfg.seed);
  run.write("summary.json", summary("nash", cfg.seed, report_json(r)));
  run.write("strategies.csv", strategy_csv(r));
  return 0;
}

int run_mfg(Run& run, const ScenarioConfig& cfg, const MarketCoefficientOracle& oracle) {
  const MfeOptions opt = mfe_options(cfg);
  const MeanFieldEquilibrium r = solve_mfe(oracle, cfg, opt, cfg.seed);
  const ConsistencyCheck check = check_consistency(oracle, cfg, r, opt, cfg.seed);
  run.write("summary.json", summary("mfg", cfg.seed, report_json(r, &check)));
  run.write("mean_field_paths.csv", mean_field_csv(r));
  return 0;
}

int run_converge(Run& run, const ScenarioConfig& cfg, const MarketCoefficientOracle& oracle) {
  const ConvergenceReport r = sweep_n(oracle, cfg, cfg.convergence.n_values, cfg.convergence.seeds);
  const IidDecay iid = iid_lognormal_decay({64, 256, 1024, 4096}, 0.25, 32, cfg.seed);
  run.write("summary.json", summary("converge", cfg.seed, report_json(r, &iid)));
  run.write("convergence.csv", convergence_csv(r));
  run.write("w2_decay.csv", decay_csv(r));
  return r.partial ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative-arbitrage portfolio game solvers"};
  std::string subcommand, config_path, out_dir = "relarb_out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads, paths;
  bool ccond_literal = false, cdf_std = false, strict_simplex = false;
  app.add_option("subcommand", subcommand, "validate | simulate | fichera | arbitrage | nash | mfg | converge")
      ->required()
      ->check(CLI::IsMember({"validate", "simulate", "fichera", "arbitrage", "nash", "mfg", "converge"}));
  app.add_option("config", config_path, "Scenario JSON file")->required();
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--paths", paths, "Override the Monte-Carlo path count");
  app.add_flag("--ccond-literal", ccond_literal, "Preference condition without the 1/N factor");
  app.add_flag("--cdf-std-normalized", cdf_std, "Uniqueness CDF divided by the standard deviation");
  app.add_flag("--strict-simplex", strict_simplex, "Raise on strategies outside the simplex");
  CLI11_PARSE(app, argc, argv);

  Run run(subcommand, config_path, out_dir);
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.solver.threads = std::max<std::size_t>(1, *threads);
    if (paths) cfg.solver.paths = *paths;
    cfg.flags.ccond_literal = cfg.flags.ccond_literal || ccond_literal;
    cfg.flags.cdf_std_normalized = cfg.flags.cdf_std_normalized || cdf_std;
    cfg.flags.strict_simplex = cfg.flags.strict_simplex || strict_simplex;
    // Thread count is an execution detail; keep it out of the hashed copy.
    ScenarioConfig hashed = cfg;
    hashed.solver.threads = 1;
    run.set_config(resolved_config_json(hashed), cfg.seed);
    run.stage("load", "ok");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    run.stage("load", "error", e.what());
    return run.finish(1);
  }

  try {
    if (subcommand == "validate") return run.finish(run_validate(run, cfg));
    const ValidationReport rep = validate_scenario(cfg);
    if (!rep.feasible) {
      for (const auto& m : rep.messages) std::cerr << m << "\n";
      run.write("summary.json", summary(subcommand, cfg.seed, report_json(rep)));
      run.stage("validate", "infeasible");
      return run.finish(2);
    }
    run.stage("validate", "ok");
    const OraclePtr oracle = builtin_market(cfg.market, cfg.n);
    int code = 0;
    if (subcommand == "simulate") code = run_simulate(run, cfg, *oracle);
    if (subcommand == "fichera") code = run_fichera(run, cfg, *oracle);
    if (subcommand == "arbitrage") code = run_arbitrage(run, cfg, *oracle);
    if (subcommand == "nash") code = run_nash(run, cfg, *oracle);
    if (subcommand == "mfg") code = run_mfg(run, cfg, *oracle);
    if (subcommand == "converge") code = run_converge(run, cfg, *oracle);
    run.stage(subcommand, code == 0 ? "ok" : "partial");
    return run.finish(code);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    run.stage(subcommand, "infeasible", e.what());
    return run.finish(2);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    run.stage(subcommand, "error", e.what());
    return run.finish(1);
  }
}

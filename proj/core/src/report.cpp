#include "relarb/report.hpp"

#include <cstdio>

#include "json_util.hpp"

namespace relarb {

using detail::json;
using detail::to_json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json stats_json(const std::vector<std::string>& warnings) { return warnings; }

json uniqueness_json(const UniquenessProbability& u) {
  return {{"probability", u.probability},
          {"cdf_argument", u.cdf_argument},
          {"std_normalized", u.std_normalized},
          {"empirical_in_K", u.empirical_in_K},
          {"empirical_in_K_se", u.empirical_in_K_se},
          {"empirical_stay", u.empirical_stay},
          {"paths", u.paths}};
}

json diagnostics_json(const StrategyDiagnostics& d) {
  return {{"sum", d.sum}, {"min", d.min}, {"in_simplex", d.in_simplex}};
}

json fit_json(const LinearFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"slope_se", f.slope_se},
          {"slope_ci", {f.slope_ci_low, f.slope_ci_high}}};
}

json trend_json(const TrendStatistic& t) {
  return {{"increases", t.increases},
          {"significant_increases", t.significant_increases},
          {"non_increasing", t.non_increasing(1)}};
}

}  // namespace

std::string report_json(const ValidationReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"hard", c.hard}, {"passed", c.passed}, {"value", c.value}, {"message", c.message}});
  return detail::dump({{"feasible", r.feasible}, {"checks", checks}, {"messages", r.messages}});
}

std::string report_json(const ArbitrageEstimate& e) {
  json j = {{"c", e.c},
            {"u_hat", e.u_hat},
            {"u_hat_se", e.std_err},
            {"u_normalized", e.u_normalized},
            {"u_normalized_se", e.std_err_normalized},
            {"paths", e.n_paths},
            {"floor_hits", e.floor_hits},
            {"warnings", stats_json(e.warnings)}};
  if (e.has_gradients) {
    j["grad_log_u"] = {{"x", to_json(e.grad_x)},
                       {"x_se", to_json(e.grad_x_se)},
                       {"y", to_json(e.grad_y)},
                       {"y_se", to_json(e.grad_y_se)},
                       {"m", e.grad_m},
                       {"m_se", e.grad_m_se}};
  }
  return detail::dump(j);
}

std::string report_json(const CauchyGrid& g) {
  return detail::dump({{"x0", g.x0},
                       {"y0", g.y0},
                       {"c", g.c},
                       {"tau_final", g.tau_final},
                       {"u_at_x0", g.value_at(g.x0, g.y0)},
                       {"nodes", {g.log_x.size(), g.log_y.size()}},
                       {"boundary", g.boundary},
                       {"cfl", g.cfl},
                       {"dtau", g.dtau},
                       {"substeps", g.substeps},
                       {"min_value", g.min_value},
                       {"nonnegative", g.nonnegative},
                       {"max_non_increasing", g.max_non_increasing},
                       {"box_warning", g.box_warning},
                       {"sentinel_gap", g.sentinel_gap}});
}

std::string report_json(const FicheraReport& r) {
  json faces = json::array();
  for (const auto& f : r.faces)
    faces.push_back({{"face", f.face},
                     {"axis", f.y_face ? "y" : "x"},
                     {"coordinate", f.coordinate},
                     {"f_min", f.f_min},
                     {"f_max", f.f_max},
                     {"verdict", to_string(f.verdict)},
                     {"diagnostic", f.diagnostic}});
  return detail::dump(
      {{"verdict", to_string(r.verdict)}, {"analytic_derivatives", r.analytic_derivatives}, {"faces", faces}});
}

std::string report_json(const EquilibriumResult& r) {
  json strategies = json::array();
  for (const auto& inv : r.strategies) strategies.push_back(to_json(inv));
  json diag = json::array();
  for (const auto& d : r.strategy_diagnostics) diag.push_back(diagnostics_json(d));
  return detail::dump({{"schema_version", 1},
                       {"node_times", r.node_times},
                       {"node_steps", r.node_steps},
                       {"market_total", r.market_total},
                       {"m_path", r.m_path},
                       {"m_initial", r.m_initial},
                       {"u_node", r.u_node},
                       {"u_node_se", r.u_node_se},
                       {"u_per_investor", r.u_per_investor},
                       {"u_per_investor_se", r.u_per_investor_se},
                       {"strategies", strategies},
                       {"strategy_se", to_json(r.strategy_se)},
                       {"strategy_diagnostics", diag},
                       {"residual", r.residual},
                       {"residual_trace", r.residual_trace},
                       {"certificate_residual", r.certificate_residual},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"A", r.A_path},
                       {"D", r.D_path},
                       {"K_upper", r.K_upper},
                       {"tau_K_mean", r.tau_K_mean},
                       {"tau_K_stay_fraction", r.tau_K_stay_fraction},
                       {"tau_K_paths", r.tau_K_paths},
                       {"uniqueness", uniqueness_json(r.uniqueness)},
                       {"warnings", r.warnings}});
}

std::string report_json(const MeanFieldEquilibrium& r, const ConsistencyCheck* check) {
  json j = {{"schema_version", 1},
            {"u", r.u},
            {"u_se", r.u_se},
            {"u_normalized", r.u_normalized},
            {"u_normalized_se", r.u_normalized_se},
            {"residual_m", r.residual_m},
            {"residual_phi", r.residual_phi},
            {"residual_m_trace", r.residual_m_trace},
            {"residual_phi_trace", r.residual_phi_trace},
            {"inner_se", r.inner_se},
            {"iterations", r.iterations},
            {"converged_m", r.converged_m},
            {"converged_phi", r.converged_phi},
            {"converged", r.converged},
            {"outer_paths", r.m_path.size()},
            {"node_steps", r.node_steps},
            {"A_tilde", r.A_tilde},
            {"D_tilde", r.D_tilde},
            {"K_tilde_upper", r.K_tilde_upper},
            {"exit_stay_fraction", r.exit_stay_fraction},
            {"uniqueness", uniqueness_json(r.uniqueness)},
            {"warnings", r.warnings}};
  json states = json::array();
  for (const auto& s : r.states)
    states.push_back({{"path", s.path},
                      {"node", s.node},
                      {"t", s.t},
                      {"m", s.m},
                      {"u_normalized", s.u_normalized},
                      {"u_se", s.u_se},
                      {"v_star", s.v_star},
                      {"pi", to_json(s.pi)},
                      {"diagnostics", diagnostics_json(s.diagnostics)}});
  j["states"] = states;
  if (check) j["consistency"] = {{"deviation", check->deviation}, {"bound", check->bound}, {"passed", check->passed}};
  return detail::dump(j);
}

std::string report_json(const ConvergenceReport& r, const IidDecay* iid) {
  json un = json::array();
  for (const auto& s : r.u_N)
    un.push_back({{"N", s.N}, {"mean", s.mean}, {"se", s.std_err}, {"solves", s.solves}, {"failed", s.failed},
                  {"failure", s.failure}});
  json eps = json::array();
  for (const auto& e : r.epsilon_N)
    eps.push_back({{"N", e.N},
                   {"epsilon", e.epsilon},
                   {"se", e.std_err},
                   {"J_mfe", e.J_mfe},
                   {"gaps", e.gaps},
                   {"gap_se", e.gap_se},
                   {"deviations", e.deviations}});
  json w2 = json::array();
  for (const auto& d : r.w2_decay) w2.push_back({{"t", d.t}, {"N", d.N}, {"w2", d.w2}, {"se", d.w2_se}});
  json j = {{"schema_version", 1},
            {"N_values", r.N_values},
            {"u_N", un},
            {"u_mf", r.u_mf},
            {"u_mf_se", r.u_mf_se},
            {"gaps", r.gaps},
            {"gap_se", r.gap_se},
            {"gap_trend", trend_json(r.gap_trend)},
            {"epsilon_N", eps},
            {"epsilon_trend", trend_json(r.epsilon_trend)},
            {"w2_decay", w2},
            {"w2_fit", fit_json(r.w2_fit)},
            {"partial", r.partial},
            {"warnings", r.warnings}};
  if (iid)
    j["iid_lognormal"] = {{"sizes", iid->sizes}, {"w2", iid->w2}, {"se", iid->w2_se}, {"fit", fit_json(iid->fit)}};
  return detail::dump(j);
}

std::string simulation_json(const ParticlePathSet& p, const DeflatorPath& d, const BenchmarkPath& b) {
  const auto last = static_cast<Eigen::Index>(p.steps());
  return detail::dump({{"steps", p.steps()},
                       {"n", p.n()},
                       {"N", p.N()},
                       {"x_T", to_json(Vec(p.X.row(last).transpose()))},
                       {"wealth_T", to_json(Vec(p.V.row(last).transpose()))},
                       {"y_T", to_json(Vec(p.Y.row(last).transpose()))},
                       {"peer_average_T", p.peer_average(p.steps())},
                       {"L_T", d.L.empty() ? 1.0 : d.L.back()},
                       {"benchmark_T", b.Vbench.back()},
                       {"relative_log_performance", b.relative_log_performance},
                       {"floor_hits", p.floor_hits},
                       {"y_clamps", p.y_clamps}});
}

std::string strategy_csv(const EquilibriumResult& r) {
  std::string out = "investor,node,t,m";
  const std::size_t n = r.strategies.empty() || r.strategies[0].empty() ? 0 : r.strategies[0][0].size();
  for (std::size_t i = 0; i < n; ++i) out += ",pi" + std::to_string(i);
  out += "\n";
  for (std::size_t l = 0; l < r.strategies.size(); ++l)
    for (std::size_t j = 0; j < r.strategies[l].size(); ++j) {
      out += std::to_string(l) + "," + std::to_string(j) + "," + num(r.node_times[j]) + "," + num(r.m_path[j]);
      for (Eigen::Index i = 0; i < r.strategies[l][j].size(); ++i) out += "," + num(r.strategies[l][j](i));
      out += "\n";
    }
  return out;
}

std::string mean_field_csv(const MeanFieldEquilibrium& r) {
  std::string out = "path,step,t,m,m_simulated";
  const std::size_t n = r.Z_path.empty() ? 0 : static_cast<std::size_t>(r.Z_path[0].cols());
  for (std::size_t i = 0; i < n; ++i) out += ",Z" + std::to_string(i);
  for (std::size_t i = 0; i < n; ++i) out += ",pi" + std::to_string(i);
  out += "\n";
  for (std::size_t p = 0; p < r.m_path.size(); ++p)
    for (std::size_t k = 0; k < r.m_path[p].size(); ++k) {
      out += std::to_string(p) + "," + std::to_string(k) + "," + num(r.grid[k]) + "," + num(r.m_path[p][k]) + "," +
             num(r.m_simulated[p][k]);
      for (std::size_t i = 0; i < n; ++i)
        out += "," + num(r.Z_path[p](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
      for (std::size_t i = 0; i < n; ++i) out += "," + num(r.strategy_path[p][k](static_cast<Eigen::Index>(i)));
      out += "\n";
    }
  return out;
}

std::string convergence_csv(const ConvergenceReport& r) {
  std::string out = "N,u_N,u_N_se,gap,gap_se,epsilon,epsilon_se\n";
  for (std::size_t i = 0; i < r.N_values.size(); ++i) {
    const double eps = i < r.epsilon_N.size() ? r.epsilon_N[i].epsilon : 0.0;
    const double eps_se = i < r.epsilon_N.size() ? r.epsilon_N[i].std_err : 0.0;
    out += std::to_string(r.N_values[i]) + "," + num(r.u_N[i].mean) + "," + num(r.u_N[i].std_err) + "," +
           num(r.gaps[i]) + "," + num(r.gap_se[i]) + "," + num(eps) + "," + num(eps_se) + "\n";
  }
  return out;
}

std::string decay_csv(const ConvergenceReport& r) {
  std::string out = "t,N,w2,w2_se\n";
  for (const auto& d : r.w2_decay) out += num(d.t) + "," + std::to_string(d.N) + "," + num(d.w2) + "," + num(d.w2_se) + "\n";
  return out;
}

std::string fd_slice_csv(const CauchyGrid& g, const Mat& values) {
  std::string out = "x,y,u\n";
  for (std::size_t i = 0; i < g.log_x.size(); ++i)
    for (std::size_t j = 0; j < g.log_y.size(); ++j)
      out += num(std::exp(g.log_x[i])) + "," + num(std::exp(g.log_y[j])) + "," +
             num(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + "\n";
  return out;
}

}  // namespace relarb

#pragma once

#include <string>

#include "relarb/arbitrage.hpp"
#include "relarb/convergence.hpp"
#include "relarb/engine.hpp"
#include "relarb/mfg.hpp"
#include "relarb/model.hpp"
#include "relarb/nash.hpp"

namespace relarb {

// JSON serializers. Output is canonical: sorted keys, 17 significant digits.
std::string report_json(const ValidationReport& r);
std::string report_json(const ArbitrageEstimate& e);
std::string report_json(const CauchyGrid& g);
std::string report_json(const FicheraReport& r);
std::string report_json(const EquilibriumResult& r);
std::string report_json(const MeanFieldEquilibrium& r, const ConsistencyCheck* check = nullptr);
std::string report_json(const ConvergenceReport& r, const IidDecay* iid = nullptr);
std::string simulation_json(const ParticlePathSet& paths, const DeflatorPath& deflator, const BenchmarkPath& bench);

// CSV tables.
std::string strategy_csv(const EquilibriumResult& r);          // node, t, m, then pi per stock
std::string mean_field_csv(const MeanFieldEquilibrium& r);     // path, step, t, m, Z, pi
std::string convergence_csv(const ConvergenceReport& r);       // N, u_N, se, gap, epsilon
std::string decay_csv(const ConvergenceReport& r);             // t, N, w2, se
std::string fd_slice_csv(const CauchyGrid& g, const Mat& values);

}  // namespace relarb

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>

#include "amod/common.hpp"
#include "amod/gp/forecast.hpp"
#include "amod/opt/lp_format.hpp"
#include "amod/opt/rebalance.hpp"
#include "amod/sim/trips.hpp"

namespace amod::sim {

enum class Controller { GBM, Oracle, CCMPC, FixedDemand };

inline const char* to_string(Controller c) {
  switch (c) {
    case Controller::GBM: return "gbm";
    case Controller::Oracle: return "oracle";
    case Controller::CCMPC: return "ccmpc";
    case Controller::FixedDemand: return "fixed";
  }
  return "unknown";
}

inline Controller parse_controller(std::string_view s) {
  if (s == "gbm") return Controller::GBM;
  if (s == "oracle") return Controller::Oracle;
  if (s == "ccmpc") return Controller::CCMPC;
  if (s == "fixed") return Controller::FixedDemand;
  throw InvalidInput("unknown controller `" + std::string(s) + "` (gbm, oracle, ccmpc, fixed)");
}

/// Controller settings of one run. Cadences are whole seconds: dispatch
/// must divide the model step, the MPC and GP cadences must be multiples of it.
struct RunConfig {
  Controller controller = Controller::CCMPC;
  double epsilon = 0.5;
  int horizon = 12;
  long step_seconds = 900;
  long dispatch_seconds = 30;
  long mpc_seconds = 900;
  long gp_seconds = 86400;
  std::uint64_t seed = 0;  // scatters initial vehicle positions within their stations
  opt::WeightParams weights;
  opt::QuantileRows quantile_rows = opt::QuantileRows::Exact;
  gp::FlowTrainingConfig training;
  double time_limit_seconds = 10.0;
  double absolute_gap = 0.0;
  double relative_gap = 0.0;
  long iteration_budget = 20000;  // pivots per solve; binds before the time limit so runs repeat exactly
  std::string external_solver;  // command with {lp} and {sol}; empty: bundled solver

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("epsilon must lie in (0, 1)");
    if (horizon < 1) throw InvalidInput("horizon must be >= 1");
    if (step_seconds <= 0 || dispatch_seconds <= 0 || mpc_seconds <= 0 || gp_seconds <= 0)
      throw InvalidInput("cadences must be positive");
    if (step_seconds % dispatch_seconds != 0) throw InvalidInput("dispatch interval must divide the model step");
    if (mpc_seconds % step_seconds != 0 || gp_seconds % step_seconds != 0)
      throw InvalidInput("MPC and GP cadences must be multiples of the model step");
    if (!(time_limit_seconds > 0.0) || absolute_gap < 0.0 || relative_gap < 0.0 || iteration_budget < 0)
      throw InvalidInput("solver limits must be positive and gaps >= 0");
    if (!(weights.per_km >= 0.0) || !(weights.imbalance > 0.0) || !(weights.pickup_per_step >= 0.0))
      throw InvalidInput("cost weights must be >= 0 (imbalance > 0)");
    if (!(training.window_days > 0.0) || training.optimizer.max_iters < 0)
      throw InvalidInput("training window must be positive");
  }

  opt::SolverConfig solver() const {
    opt::SolverConfig c;
    c.time_limit_seconds = time_limit_seconds;
    c.absolute_gap = absolute_gap;
    c.relative_gap = relative_gap;
    c.iteration_budget = iteration_budget;
    if (!external_solver.empty()) c.backend = std::make_shared<opt::ExternalSolverBackend>(external_solver);
    return c;
  }
};

// ---- key-value format ------------------------------------------------------
//
// One `key = value` per line, `#` starts a comment. Keys:
//   controller         gbm | oracle | ccmpc | fixed
//   epsilon            (0, 1)
//   horizon            steps T
//   step_seconds       model step (must match the scenario)
//   dispatch_seconds   matching cadence
//   mpc_seconds        rebalancing cadence
//   gp_seconds         retraining cadence
//   seed
//   cost.per_km        rebalance cost per km
//   cost.imbalance     cost per unserved request and step
//   cost.pickup_step   pickup-delay cost growth per step
//   quantile_rows      exact | at_least
//   gp.window_days, gp.max_iters, gp.threads
//   gp.long_range_start  true | false
//   solver.time_limit, solver.absolute_gap, solver.relative_gap,
//   solver.iteration_budget, solver.external

namespace detail {

template <typename T>
T parse_num(std::string_view key, std::string_view v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw InvalidInput("bad value for " + std::string(key) + ": `" + std::string(v) + "`");
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Applies one setting; unknown keys are an error.
inline void set_option(RunConfig& c, std::string_view key, std::string_view value) {
  using detail::parse_num;
  key = detail::trim(key);
  value = detail::trim(value);
  if (key == "controller") c.controller = parse_controller(value);
  else if (key == "epsilon") c.epsilon = parse_num<double>(key, value);
  else if (key == "horizon") c.horizon = parse_num<int>(key, value);
  else if (key == "step_seconds") c.step_seconds = parse_num<long>(key, value);
  else if (key == "dispatch_seconds") c.dispatch_seconds = parse_num<long>(key, value);
  else if (key == "mpc_seconds") c.mpc_seconds = parse_num<long>(key, value);
  else if (key == "gp_seconds") c.gp_seconds = parse_num<long>(key, value);
  else if (key == "seed") c.seed = parse_num<std::uint64_t>(key, value);
  else if (key == "cost.per_km") c.weights.per_km = parse_num<double>(key, value);
  else if (key == "cost.imbalance") c.weights.imbalance = parse_num<double>(key, value);
  else if (key == "cost.pickup_step") c.weights.pickup_per_step = parse_num<double>(key, value);
  else if (key == "quantile_rows") {
    if (value == "exact") c.quantile_rows = opt::QuantileRows::Exact;
    else if (value == "at_least") c.quantile_rows = opt::QuantileRows::AtLeast;
    else throw InvalidInput("quantile_rows must be exact or at_least");
  }
  else if (key == "gp.window_days") c.training.window_days = parse_num<double>(key, value);
  else if (key == "gp.max_iters") c.training.optimizer.max_iters = parse_num<int>(key, value);
  else if (key == "gp.threads") c.training.threads = parse_num<unsigned>(key, value);
  else if (key == "gp.long_range_start") {
    if (value == "true") c.training.long_range_start = true;
    else if (value == "false") c.training.long_range_start = false;
    else throw InvalidInput("gp.long_range_start must be true or false");
  }
  else if (key == "solver.time_limit") c.time_limit_seconds = parse_num<double>(key, value);
  else if (key == "solver.absolute_gap") c.absolute_gap = parse_num<double>(key, value);
  else if (key == "solver.relative_gap") c.relative_gap = parse_num<double>(key, value);
  else if (key == "solver.iteration_budget") c.iteration_budget = parse_num<long>(key, value);
  else if (key == "solver.external") c.external_solver = std::string(value);
  else throw InvalidInput("unknown setting `" + std::string(key) + "`");
}

/// `key=value` form used by command-line overrides.
inline void set_option(RunConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw InvalidInput("expected key=value, got `" + std::string(assignment) + "`");
  set_option(c, assignment.substr(0, eq), assignment.substr(eq + 1));
}

inline RunConfig read_config(std::istream& is, RunConfig base = {}, const std::string& source = "<stream>") {
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    std::string_view v(line);
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    if (detail::trim(v).empty()) continue;
    try {
      set_option(base, v);
    } catch (const InvalidInput& e) {
      throw InvalidInput(source + ":" + std::to_string(no) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_config(is, std::move(base), path);
}

}  // namespace amod::sim

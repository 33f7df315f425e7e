#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "amod/common.hpp"
#include "amod/gp/gp.hpp"
#include "amod/gp/quantile.hpp"
#include "amod/network.hpp"
#include "amod/opt/branch_bound.hpp"
#include "amod/opt/linear_program.hpp"

namespace amod::opt {

using gp::Forecast;

/// Objective weights over the horizon steps k = 0..T.
struct CostWeights {
  Tensor3<double> rebalance;  // c_r
  std::vector<double> imbalance;  // c_lambda
  Tensor3<double> pickup;  // c_w

  void validate(std::size_t n, int horizon) const {
    const auto steps = static_cast<std::size_t>(horizon) + 1;
    if (rebalance.stations() != n || rebalance.steps() != steps || pickup.stations() != n ||
        pickup.steps() != steps || imbalance.size() != steps)
      throw InvalidInput("cost weights do not match the network and horizon");
    for (double c : rebalance.data())
      if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidInput("rebalance cost must be finite and >= 0");
    for (double c : imbalance)
      if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInput("imbalance cost must be finite and > 0");
    for (std::size_t k = 0; k < steps; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double c = pickup(i, j, k);
          if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidInput("pickup cost must be finite and >= 0");
          if (k > 0 && c < pickup(i, j, k - 1)) throw InvalidInput("pickup cost must be non-decreasing in time");
        }
  }
};

struct WeightParams {
  double per_km = 1.0;
  double imbalance = 10.0;
  double pickup_per_step = 0.1;
};

/// c_r = distance in km, c_lambda constant, c_w growing linearly with the step.
inline CostWeights default_weights(const StationNetwork& net, int horizon, const WeightParams& p = {}) {
  const std::size_t n = net.size();
  const auto steps = static_cast<std::size_t>(horizon) + 1;
  CostWeights w{Tensor3<double>(n, steps), std::vector<double>(steps, p.imbalance), Tensor3<double>(n, steps)};
  for (std::size_t k = 0; k < steps; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        w.rebalance(i, j, k) = p.per_km * net.travel_distance()(i, j) / 1000.0;
        w.pickup(i, j, k) = p.pickup_per_step * static_cast<double>(k);
      }
  return w;
}

enum class DemandMode { Deterministic, Quantile };

/// Form of the quantile imbalance rows for k >= 1. AtLeast lets x^c exceed
/// the quantile, which the planner can use as free repositioning; Exact pins
/// it like the deterministic rows.
enum class QuantileRows { Exact, AtLeast };

/// lambda(k) for k >= 1 (slot 0 is ignored) plus the outstanding lambda(t0).
struct DemandInput {
  DemandMode mode = DemandMode::Deterministic;
  Tensor3<int> demand;  // Deterministic: lambda; Quantile: ceiled quantiles
  double epsilon = 0.5;
  Grid<int> outstanding;
  QuantileRows rows = QuantileRows::Exact;

  static DemandInput deterministic(Tensor3<int> lambda, Grid<int> outstanding) {
    return {DemandMode::Deterministic, std::move(lambda), 0.5, std::move(outstanding), QuantileRows::Exact};
  }
  static DemandInput quantile(const Tensor3<Forecast>& forecasts, double epsilon, Grid<int> outstanding,
                              QuantileRows rows = QuantileRows::Exact);
};

/// max(0, ceil(F^-1(1 - eps; mu, sigma))) per entry; diagonal flows are 0.
inline Tensor3<int> quantile_demand(const Tensor3<Forecast>& f, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("epsilon must lie in (0, 1)");
  const std::size_t n = f.stations();
  Tensor3<int> q(n, f.steps(), 0);
  for (std::size_t k = 0; k < f.steps(); ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const Forecast& x = f(i, j, k);
        const double v = std::ceil(gp::gaussian_quantile(1.0 - epsilon, x.mean, x.std));
        q(i, j, k) = v > 0.0 ? static_cast<int>(v) : 0;
      }
  return q;
}

inline DemandInput DemandInput::quantile(const Tensor3<Forecast>& forecasts, double epsilon,
                                         Grid<int> outstanding, QuantileRows rows) {
  return {DemandMode::Quantile, quantile_demand(forecasts, epsilon), epsilon, std::move(outstanding), rows};
}

enum class VarKind { Rebalance = 0, Customer = 1, Slack = 2, Pickup = 3 };

/// Column index of (kind, i, j, k): four contiguous blocks of N*N*(T+1).
struct VarIndex {
  std::size_t n = 0;
  int horizon = 0;

  std::size_t block() const { return n * n * (static_cast<std::size_t>(horizon) + 1); }
  std::size_t size() const { return 4 * block(); }
  std::size_t operator()(VarKind kind, std::size_t i, std::size_t j, std::size_t k) const {
    return static_cast<std::size_t>(kind) * block() + (k * n + i) * n + j;
  }
};

struct IlpProblem {
  VarIndex index;
  LinearProgram lp;
  Basis crash;  // primal feasible starting basis: every vehicle holds, unmet demand carried by s
  // Model data kept for the rounding heuristic.
  std::vector<std::vector<int>> supply;  // phi_i(k)
  Grid<int> kappa;
  DemandInput demand;
};

inline const char* var_prefix(VarKind k) {
  switch (k) {
    case VarKind::Rebalance: return "xr";
    case VarKind::Customer: return "xc";
    case VarKind::Slack: return "s";
    case VarKind::Pickup: return "w";
  }
  return "v";
}

/// Emits the receding-horizon rebalancing ILP.
///
/// Rows, for all flows (i, j) and steps k = 0..T:
///   imb_i_j_0 : w - xc - s = 0
///   imb_i_j_k : xc + s(k) - s(k-1) - w = lambda(k)   (>= for QuantileRows::AtLeast)
///   out_i_j   : sum_k w = lambda(t0)
///   veh_i_k   : sum_j x_ij(k) - sum_{j != i} x_ji(k - kappa_ji) - xr_ii(k-1) = phi_i(k)
/// with x = xr + xc, phi_i(0) the idle count and phi_i(k) the in-transit
/// arrivals. xr_ii(k) holds idle vehicles at i from step k to k+1, at no cost,
/// so the rows form a time-expanded flow network. Trips inside one station
/// take no model time and are left to in-station dispatch: xc_ii, w_ii and
/// the diagonal demand are fixed at 0.
inline IlpProblem build_problem(const FleetState& state, const StationNetwork& net, const DemandInput& demand,
                                const CostWeights& weights, int horizon) {
  if (horizon < 1) throw InvalidInput("horizon must be at least one step");
  const std::size_t n = net.size();
  const auto steps = static_cast<std::size_t>(horizon) + 1;
  if (state.idle.size() != n) throw InvalidInput("idle vector does not match the station count");
  for (int v : state.idle)
    if (v < 0) throw InvalidInput("idle counts must be non-negative");
  for (const auto& t : state.in_transit)
    if (t.destination >= n || t.arrival_step < 1) throw InvalidInput("in-transit vehicle is malformed");
  if (demand.demand.stations() != n || demand.demand.steps() != steps)
    throw InvalidInput("demand tensor does not match the network and horizon");
  if (demand.outstanding.rows() != n || demand.outstanding.cols() != n)
    throw InvalidInput("outstanding demand does not match the station count");
  for (int v : demand.demand.data())
    if (v < 0) throw InvalidInput("demand must be non-negative");
  for (int v : demand.outstanding.data())
    if (v < 0) throw InvalidInput("outstanding demand must be non-negative");
  if (demand.mode == DemandMode::Quantile && !(demand.epsilon > 0.0 && demand.epsilon < 1.0))
    throw InvalidInput("epsilon must lie in (0, 1)");
  weights.validate(n, horizon);

  IlpProblem p{VarIndex{n, horizon}, {}, {}, state.availability(n, horizon), net.kappa(), demand};
  LinearProgram& lp = p.lp;
  const VarIndex& at = p.index;
  lp.names.reserve(at.size());
  for (VarKind kind : {VarKind::Rebalance, VarKind::Customer, VarKind::Slack, VarKind::Pickup})
    for (std::size_t k = 0; k < steps; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double c = 0.0;
          if (kind == VarKind::Rebalance) c = weights.rebalance(i, j, k);
          if (kind == VarKind::Slack) c = weights.imbalance[k];
          if (kind == VarKind::Pickup) c = weights.pickup(i, j, k);
          const bool fixed = i == j && (kind == VarKind::Customer || kind == VarKind::Pickup);
          lp.add_var(std::string(var_prefix(kind)) + "_" + std::to_string(i) + "_" + std::to_string(j) + "_" +
                         std::to_string(k),
                     c, 0.0, fixed ? 0.0 : kInf);
        }

  const auto tag = [](const char* base, std::size_t a, std::size_t b) {
    return std::string(base) + "_" + std::to_string(a) + "_" + std::to_string(b);
  };
  std::vector<std::size_t>& head = p.crash.head;
  const RowSense future_sense = demand.mode == DemandMode::Quantile && demand.rows == QuantileRows::AtLeast
                                    ? RowSense::GreaterEqual
                                    : RowSense::Equal;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::string flow = tag("imb", i, j);
      lp.add_row({flow + "_0",
                  {at(VarKind::Pickup, i, j, 0), at(VarKind::Customer, i, j, 0), at(VarKind::Slack, i, j, 0)},
                  {1.0, -1.0, -1.0},
                  RowSense::Equal,
                  0.0});
      head.push_back(at(VarKind::Slack, i, j, 0));
      for (std::size_t k = 1; k < steps; ++k) {
        const double lambda = i == j ? 0.0 : demand.demand(i, j, k);
        lp.add_row({flow + "_" + std::to_string(k),
                    {at(VarKind::Customer, i, j, k), at(VarKind::Slack, i, j, k), at(VarKind::Slack, i, j, k - 1),
                     at(VarKind::Pickup, i, j, k)},
                    {1.0, 1.0, -1.0, -1.0},
                    future_sense,
                    lambda});
        head.push_back(at(VarKind::Slack, i, j, k));
      }
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Row r{tag("out", i, j), {}, {}, RowSense::Equal, i == j ? 0.0 : demand.outstanding(i, j)};
      for (std::size_t k = 0; k < steps; ++k) {
        r.index.push_back(at(VarKind::Pickup, i, j, k));
        r.coef.push_back(1.0);
      }
      lp.add_row(std::move(r));
      head.push_back(at(VarKind::Pickup, i, j, 0));
    }

  const auto& phi = p.supply;
  const Grid<int>& kappa = p.kappa;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < steps; ++k) {
      Row r{tag("veh", i, k), {}, {}, RowSense::Equal, static_cast<double>(phi[i][k])};
      for (std::size_t j = 0; j < n; ++j)
        for (VarKind kind : {VarKind::Rebalance, VarKind::Customer}) {
          r.index.push_back(at(kind, i, j, k));
          r.coef.push_back(1.0);
        }
      if (k > 0) {
        r.index.push_back(at(VarKind::Rebalance, i, i, k - 1));
        r.coef.push_back(-1.0);
      }
      for (std::size_t j = 0; j < n; ++j) {
        const auto delay = static_cast<std::size_t>(kappa(j, i));
        if (j == i || delay > k) continue;
        for (VarKind kind : {VarKind::Rebalance, VarKind::Customer}) {
          r.index.push_back(at(kind, j, i, k - delay));
          r.coef.push_back(-1.0);
        }
      }
      lp.add_row(std::move(r));
      head.push_back(at(VarKind::Rebalance, i, i, k));
    }
  p.crash.at_upper.assign(lp.num_vars() + lp.rows.size(), 0);
  return p;
}

/// Integer plan near a relaxation point x. Pickups w are rounded along their
/// cumulative sum, then steps are swept in order: each station keeps the
/// floored departures of x that its vehicles can cover (rebalancing is cut
/// first), spends leftover vehicles on unserved demand and holds the rest.
/// The result satisfies every row by construction.
inline std::vector<double> round_plan(const IlpProblem& p, const std::vector<double>& x) {
  const VarIndex& at = p.index;
  const std::size_t n = at.n;
  const auto steps = static_cast<std::size_t>(at.horizon) + 1;
  const auto down = [](double v) { return std::max(0.0, std::floor(v + 1e-7)); };
  std::vector<double> out(at.size(), 0.0);

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double total = p.demand.outstanding(i, j);
      double cum = 0.0, taken = 0.0;
      for (std::size_t k = 0; k < steps; ++k) {
        cum += x[at(VarKind::Pickup, i, j, k)];
        const double upto = k + 1 == steps ? total : std::clamp(down(cum), taken, total);
        out[at(VarKind::Pickup, i, j, k)] = upto - taken;
        taken = upto;
      }
    }

  std::vector<std::vector<double>> arriving(n, std::vector<double>(steps, 0.0));
  std::vector<double> held(n, 0.0);
  for (std::size_t k = 0; k < steps; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      double avail = p.supply[i][k] + held[i] + arriving[i][k];
      std::vector<double> open(n, 0.0), xc(n, 0.0), xr(n, 0.0);
      double want = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = out[at(VarKind::Pickup, i, j, k)];
        open[j] = k == 0 ? w
                         : p.demand.demand(i, j, k) + out[at(VarKind::Slack, i, j, k - 1)] + w;
        xc[j] = std::min(down(x[at(VarKind::Customer, i, j, k)]), open[j]);
        xr[j] = down(x[at(VarKind::Rebalance, i, j, k)]);
        want += xc[j] + xr[j];
      }
      for (std::size_t jj = n; jj-- > 0 && want > avail;) {
        const double cut = std::min(xr[jj], want - avail);
        xr[jj] -= cut;
        want -= cut;
      }
      for (std::size_t jj = n; jj-- > 0 && want > avail;) {
        const double cut = std::min(xc[jj], want - avail);
        xc[jj] -= cut;
        want -= cut;
      }
      avail -= want;
      for (std::size_t j = 0; j < n && avail > 0.0; ++j) {
        const double extra = std::min(avail, open[j] - xc[j]);
        xc[j] += extra;
        avail -= extra;
      }
      held[i] = avail;
      out[at(VarKind::Rebalance, i, i, k)] = avail;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        out[at(VarKind::Customer, i, j, k)] = xc[j];
        out[at(VarKind::Rebalance, i, j, k)] = xr[j];
        out[at(VarKind::Slack, i, j, k)] = open[j] - xc[j];
        const auto t = k + static_cast<std::size_t>(p.kappa(i, j));
        if (t < steps) arriving[j][t] += xc[j] + xr[j];
      }
    }
  return out;
}

struct RebalancePlan {
  Tensor3<int> rebalance, customer, slack, pickup;
  double objective = 0.0;
  double lp_bound = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  long nodes = 0;
  long lp_iterations = 0;
  double seconds = 0.0;

  /// Off-diagonal x^r(t0): the moves that are executed.
  Grid<int> first_step() const {
    const std::size_t n = rebalance.stations();
    Grid<int> g(n, n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) g(i, j) = rebalance(i, j, 0);
    return g;
  }
};

/// Solves the problem and unpacks the integer tensors; the rounded solution
/// is re-checked against every row.
inline RebalancePlan solve_ilp(const IlpProblem& p, const SolverConfig& cfg = {}) {
  SolverConfig c = cfg;
  if (!c.backend && !c.start_basis) c.start_basis = p.crash;
  if (!c.backend && !c.heuristic)
    c.heuristic = [&p](const std::vector<double>& x) { return std::optional(round_plan(p, x)); };
  if (!c.backend && !c.initial_solution) c.initial_solution = round_plan(p, std::vector<double>(p.index.size(), 0.0));
  const IlpSolution sol = solve_integer(p.lp, c);
  if (sol.x.size() != p.lp.num_vars()) throw SolverError("solver returned a solution of the wrong size");
  std::vector<double> x(sol.x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = std::round(sol.x[j]);
    if (std::abs(x[j] - sol.x[j]) > 1e-6 || x[j] < 0.0) throw SolverError("solver returned a non-integral value");
  }
  if (p.lp.max_violation(x) > 1e-9) throw SolverError("plan violates a constraint row");

  const VarIndex& at = p.index;
  const auto steps = static_cast<std::size_t>(at.horizon) + 1;
  RebalancePlan plan;
  for (Tensor3<int>* t : {&plan.rebalance, &plan.customer, &plan.slack, &plan.pickup}) *t = Tensor3<int>(at.n, steps);
  const VarKind kinds[] = {VarKind::Rebalance, VarKind::Customer, VarKind::Slack, VarKind::Pickup};
  Tensor3<int>* out[] = {&plan.rebalance, &plan.customer, &plan.slack, &plan.pickup};
  for (int b = 0; b < 4; ++b)
    for (std::size_t k = 0; k < steps; ++k)
      for (std::size_t i = 0; i < at.n; ++i)
        for (std::size_t j = 0; j < at.n; ++j) (*out[b])(i, j, k) = static_cast<int>(x[at(kinds[b], i, j, k)]);
  plan.objective = p.lp.objective(x);
  plan.lp_bound = sol.lp_bound;
  plan.status = sol.status;
  plan.nodes = sol.nodes;
  plan.lp_iterations = sol.lp_iterations;
  plan.seconds = sol.seconds;
  return plan;
}

enum class ControllerKind { CCMPC, Oracle, FixedDemand };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::CCMPC: return "ccmpc";
    case ControllerKind::Oracle: return "oracle";
    case ControllerKind::FixedDemand: return "fixed";
  }
  return "unknown";
}

/// What each controller sees of future demand. Oracle: `truth` (true lambda
/// per horizon slot); FixedDemand: `last` (lambda of the slot before t0);
/// CCMPC: `forecast` and epsilon.
struct DemandSource {
  std::optional<Tensor3<int>> truth;
  std::optional<Grid<int>> last;
  std::optional<Tensor3<Forecast>> forecast;
  double epsilon = 0.5;
};

inline DemandInput controller_demand(ControllerKind kind, const DemandSource& src, const Grid<int>& outstanding,
                                     std::size_t n, int horizon) {
  const auto steps = static_cast<std::size_t>(horizon) + 1;
  switch (kind) {
    case ControllerKind::Oracle:
      if (!src.truth) throw InvalidInput("oracle controller needs the true demand");
      return DemandInput::deterministic(*src.truth, outstanding);
    case ControllerKind::FixedDemand: {
      if (!src.last) throw InvalidInput("fixed-demand controller needs the last observed demand");
      if (src.last->rows() != n || src.last->cols() != n) throw InvalidInput("last demand has the wrong shape");
      Tensor3<int> lambda(n, steps, 0);
      for (std::size_t k = 1; k < steps; ++k)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) lambda(i, j, k) = (*src.last)(i, j);
      return DemandInput::deterministic(std::move(lambda), outstanding);
    }
    case ControllerKind::CCMPC:
      if (!src.forecast) throw InvalidInput("chance-constrained controller needs a forecast");
      return DemandInput::quantile(*src.forecast, src.epsilon, outstanding);
  }
  throw InvalidInput("unknown controller");
}

struct ControllerOutput {
  Grid<int> first_step;
  RebalancePlan plan;
  DemandInput demand;
};

/// One receding-horizon step: build, solve, keep x^r(t0).
inline ControllerOutput controller_step(ControllerKind kind, const FleetState& state, const Grid<int>& outstanding,
                                        const StationNetwork& net, const DemandSource& src,
                                        const CostWeights& weights, int horizon, const SolverConfig& cfg = {}) {
  DemandInput d = controller_demand(kind, src, outstanding, net.size(), horizon);
  const IlpProblem p = build_problem(state, net, d, weights, horizon);
  RebalancePlan plan = solve_ilp(p, cfg);
  Grid<int> first = plan.first_step();
  return {std::move(first), std::move(plan), std::move(d)};
}

}  // namespace amod::opt

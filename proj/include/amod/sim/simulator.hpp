#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "amod/common.hpp"
#include "amod/dispatch/hungarian.hpp"
#include "amod/gp/forecast.hpp"
#include "amod/network.hpp"
#include "amod/opt/rebalance.hpp"
#include "amod/sim/config.hpp"
#include "amod/sim/scenario.hpp"

namespace amod::sim {

/// Distances driven by one vehicle, in millimeters so sums are exact.
struct VehicleLedger {
  std::int64_t customer_mm = 0;
  std::int64_t rebalance_mm = 0;
  std::int64_t pickup_mm = 0;
  std::int64_t total_mm = 0;  // odometer, advanced alongside the category

  bool operator==(const VehicleLedger&) const = default;
};

struct SimMetrics {
  std::string controller;
  double epsilon = 0.0;
  int fleet_size = 0;
  std::size_t total_requests = 0;
  std::size_t served = 0;
  std::size_t unserved = 0;  // still waiting at the end, excluded from waits
  std::vector<double> waits;  // seconds from request to pickup, served requests in arrival order
  std::vector<VehicleLedger> vehicles;
  std::size_t solves = 0;
  std::size_t limited_solves = 0;  // solves stopped by the time limit or iteration budget
  std::vector<double> solver_seconds;  // wall time per solve; machine dependent

  double served_fraction() const {
    return total_requests == 0 ? 1.0 : static_cast<double>(served) / static_cast<double>(total_requests);
  }
  std::int64_t customer_mm() const { return sum(&VehicleLedger::customer_mm); }
  std::int64_t rebalance_mm() const { return sum(&VehicleLedger::rebalance_mm); }
  std::int64_t pickup_mm() const { return sum(&VehicleLedger::pickup_mm); }
  std::int64_t total_mm() const { return sum(&VehicleLedger::total_mm); }

 private:
  std::int64_t sum(std::int64_t VehicleLedger::*field) const {
    std::int64_t s = 0;
    for (const auto& v : vehicles) s += v.*field;
    return s;
  }
};

/// State after every dispatch tick, for invariant checks.
struct TickRecord {
  long tick = 0;
  double time = 0.0;
  int fleet_size = 0;
  int idle = 0;
  int in_transit = 0;
  std::size_t total_requests = 0;
  std::size_t pending = 0;  // not yet arrived
  std::size_t waiting = 0;
  std::size_t served = 0;
  std::int64_t customer_mm = 0, rebalance_mm = 0, pickup_mm = 0, total_mm = 0;
};

/// Inputs and result of one controller step.
struct MpcRecord {
  long step = 0;
  double time = 0.0;
  const FleetState& state;
  const Grid<int>& outstanding;
  const opt::DemandSource& source;
  const opt::IlpProblem& problem;
  const opt::RebalancePlan& plan;
};

struct SimObserver {
  std::function<void(const TickRecord&)> on_tick;
  std::function<void(const MpcRecord&)> on_mpc;
};

/// Trained forecast models keyed by training end time. Share one cache
/// only between runs on the same history with the same training settings.
class ModelCache {
 public:
  using Models = std::shared_ptr<const gp::ForecastModelSet>;

  Models get(double end_seconds, const std::function<gp::ForecastModelSet()>& train) {
    std::shared_future<Models> fut;
    std::promise<Models> mine;
    bool owner = false;
    {
      std::lock_guard lock(mu_);
      auto it = entries_.find(end_seconds);
      if (it == entries_.end()) {
        fut = mine.get_future().share();
        entries_.emplace(end_seconds, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        mine.set_value(std::make_shared<const gp::ForecastModelSet>(train()));
      } catch (...) {
        mine.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

  /// Pre-loads models (e.g. fits read from disk) for a training end time.
  void put(double end_seconds, gp::ForecastModelSet models) {
    std::promise<Models> p;
    p.set_value(std::make_shared<const gp::ForecastModelSet>(std::move(models)));
    std::lock_guard lock(mu_);
    entries_.insert_or_assign(end_seconds, p.get_future().share());
  }

 private:
  std::mutex mu_;
  std::map<double, std::shared_future<Models>> entries_;
};

namespace detail {

// Re-raises the active library error with `where` prepended, keeping its type.
[[noreturn]] inline void rethrow_at(const std::string& where) {
  try {
    throw;
  } catch (const NoSolutionError& e) {
    throw NoSolutionError(where + ": " + e.what());
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(where + ": " + e.what());
  } catch (const SolverError& e) {
    throw SolverError(where + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(where + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw InvalidInput(where + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(where + ": " + e.what());
  }
}

struct Vehicle {
  std::size_t station = 0;
  GeoPoint pos;
  bool busy = false;
  double free_at = 0.0;
  std::size_t dest_station = 0;
  GeoPoint dest_pos;
  TripPurpose purpose = TripPurpose::Customer;
  VehicleLedger ledger;
};

inline std::int64_t to_mm(double meters) { return std::llround(meters * 1000.0); }

}  // namespace detail

/// Per-flow counts of the history over (at most) the `window_days` before
/// the start, with empty slots reserved through the end of the run.
inline gp::DemandSeries history_series(const Scenario& sc, double dt, double window_days) {
  const StationNetwork& net = sc.network;
  const double back_limit = std::ceil(window_days * 86400.0 / dt) + 1.0;
  const double first = sc.history.empty() ? sc.start_seconds : sc.history.front().time;
  const double back = std::min(back_limit, std::max(0.0, std::ceil((sc.start_seconds - first) / dt)));
  const auto ahead = static_cast<std::size_t>(std::ceil((sc.end_seconds - sc.start_seconds) / dt)) + 1;
  gp::DemandSeries series(net.size(), sc.start_seconds - back * dt, dt, static_cast<std::size_t>(back) + ahead);
  for (const auto& r : sc.history) {
    const long k = series.interval_of(r.time);
    if (k >= 0)
      ++series.counts(assign_station(r.origin, net), assign_station(r.destination, net), static_cast<std::size_t>(k));
  }
  return series;
}

/// Flow models fit on the history window that ends at the scenario start.
inline gp::ForecastModelSet train_scenario_models(const Scenario& sc, const gp::FlowTrainingConfig& cfg) {
  sc.validate();
  return gp::train_flow_models(history_series(sc, sc.network.step_seconds(), cfg.window_days), sc.start_seconds, cfg);
}

/// Persisted fits made usable for prediction: conditioned on the history.
inline gp::ForecastModelSet attach_scenario_history(gp::ForecastModelSet m, const Scenario& sc) {
  const double days = (m.window_end_seconds - m.window_start_seconds) / 86400.0;
  if (std::abs(m.window_end_seconds - sc.start_seconds) > 1e-6)
    throw InvalidInput("models were trained for a window ending at " + std::to_string(m.window_end_seconds) +
                       ", the scenario starts at " + std::to_string(sc.start_seconds));
  gp::attach_history(m, history_series(sc, m.interval_seconds, days));
  return m;
}

/// Runs Algorithm 1 over the scenario's request window. Every dispatch
/// tick: finish arrivals, admit requests, match (per station for the MPC
/// controllers, globally for GBM), retrain forecasts on the GP cadence
/// (CCMPC), and on the MPC cadence solve the rebalancing problem and launch
/// its first-step moves.
inline SimMetrics run_simulation(const Scenario& sc, const RunConfig& cfg, const SimObserver& obs = {},
                                 ModelCache* cache = nullptr) {
  sc.validate();
  cfg.validate();
  const StationNetwork& net = sc.network;
  if (std::abs(net.step_seconds() - static_cast<double>(cfg.step_seconds)) > 1e-9)
    throw InvalidInput("config step_seconds differs from the scenario's model step");
  const std::size_t n = net.size();
  const double dt = static_cast<double>(cfg.step_seconds);
  const bool planned = cfg.controller != Controller::GBM;
  const opt::CostWeights weights = opt::default_weights(net, cfg.horizon, cfg.weights);
  const opt::SolverConfig solver = cfg.solver();

  SimMetrics m;
  m.controller = to_string(cfg.controller);
  m.epsilon = cfg.epsilon;
  m.fleet_size = sc.fleet_size;

  // Vehicles start at history request origins of their station.
  std::vector<std::vector<GeoPoint>> pool(n);
  for (const auto& r : sc.history) pool[assign_station(r.origin, net)].push_back(r.origin);
  std::mt19937_64 rng(cfg.seed);
  std::vector<detail::Vehicle> veh;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < sc.placement[i]; ++c) {
      detail::Vehicle v;
      v.station = i;
      v.pos = pool[i].empty() ? net.centroid(i) : pool[i][rng() % pool[i].size()];
      veh.push_back(v);
    }

  const std::vector<Request>& req = sc.requests;
  const std::size_t R = req.size();
  std::vector<std::size_t> ost(R), dst(R);
  for (std::size_t r = 0; r < R; ++r) {
    ost[r] = assign_station(req[r].origin, net);
    dst[r] = assign_station(req[r].destination, net);
  }
  std::vector<double> wait(R, -1.0);

  // Observed counts: the training window before the start, then requests
  // as they arrive.
  gp::DemandSeries series = history_series(sc, dt, cfg.training.window_days);
  const auto ahead = static_cast<std::size_t>(std::ceil((sc.end_seconds - sc.start_seconds) / dt)) + 1;
  const auto count = [&](const Request& r) {
    const long k = series.interval_of(r.time);
    if (k >= 0)
      ++series.counts(assign_station(r.origin, net), assign_station(r.destination, net), static_cast<std::size_t>(k));
  };

  // Realized demand per model slot after the start, for the oracle.
  Tensor3<int> truth(n, ahead, 0);
  for (std::size_t r = 0; r < R; ++r) {
    const auto s = static_cast<std::size_t>(std::floor((req[r].time - sc.start_seconds) / dt));
    if (s < ahead) ++truth(ost[r], dst[r], s);
  }

  ModelCache::Models models;
  std::map<long long, std::vector<gp::Forecast>> memo;  // by doubled slot midpoint
  const auto forecasts = [&](double t0) {
    Tensor3<gp::Forecast> f(n, static_cast<std::size_t>(cfg.horizon) + 1);
    for (int k = 0; k <= cfg.horizon; ++k) {
      const double mid = t0 + (k - 0.5) * dt;
      auto it = memo.find(std::llround(mid * 2.0));
      if (it == memo.end()) it = memo.emplace(std::llround(mid * 2.0), gp::forecast_at(*models, mid)).first;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) f(i, j, static_cast<std::size_t>(k)) = it->second[i * n + j];
    }
    return f;
  };

  std::vector<std::size_t> waiting;
  std::size_t next = 0, served = 0;
  long mpc_step = 0;
  const long ticks = static_cast<long>(std::floor((sc.end_seconds - sc.start_seconds) / cfg.dispatch_seconds));

  const auto assign = [&](std::size_t r, detail::Vehicle& v, double t) {
    const double pick = distance(v.pos, req[r].origin);
    const double pickup_time = t + pick / sc.speed_mps;
    double trip, trip_time;
    if (ost[r] != dst[r]) {
      trip = net.travel_distance()(ost[r], dst[r]);
      trip_time = net.travel_time()(ost[r], dst[r]);
    } else {
      trip = distance(req[r].origin, req[r].destination);
      trip_time = trip / sc.speed_mps;
    }
    wait[r] = pickup_time - req[r].time;
    v.busy = true;
    v.free_at = pickup_time + trip_time;
    v.dest_station = dst[r];
    v.dest_pos = req[r].destination;
    v.purpose = TripPurpose::Customer;
    v.ledger.pickup_mm += detail::to_mm(pick);
    v.ledger.customer_mm += detail::to_mm(trip);
    v.ledger.total_mm += detail::to_mm(pick) + detail::to_mm(trip);
    ++served;
  };

  const auto dispatch = [&](double t) {
    if (waiting.empty()) return;
    std::vector<char> matched(waiting.size(), 0);
    const auto run = [&](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols, bool global) {
      if (rows.empty() || cols.empty()) return;
      std::vector<GeoPoint> rp, cp;
      for (std::size_t w : rows) rp.push_back(req[waiting[w]].origin);
      for (std::size_t v : cols) cp.push_back(veh[v].pos);
      const Assignment a = global ? gbm_dispatch(rp, cp) : match_in_station(rp, cp, veh[cols[0]].station);
      for (const auto& [ri, vi] : a.pairs) {
        assign(waiting[rows[ri]], veh[cols[vi]], t);
        matched[rows[ri]] = 1;
      }
    };
    if (!planned) {
      std::vector<std::size_t> rows(waiting.size()), cols;
      for (std::size_t w = 0; w < waiting.size(); ++w) rows[w] = w;
      for (std::size_t v = 0; v < veh.size(); ++v)
        if (!veh[v].busy) cols.push_back(v);
      run(rows, cols, true);
    } else {
      std::vector<std::vector<std::size_t>> rows(n), cols(n);
      for (std::size_t w = 0; w < waiting.size(); ++w) rows[ost[waiting[w]]].push_back(w);
      for (std::size_t v = 0; v < veh.size(); ++v)
        if (!veh[v].busy) cols[veh[v].station].push_back(v);
      for (std::size_t s = 0; s < n; ++s) run(rows[s], cols[s], false);
    }
    std::size_t keep = 0;
    for (std::size_t w = 0; w < waiting.size(); ++w)
      if (!matched[w]) waiting[keep++] = waiting[w];
    waiting.resize(keep);
  };

  const auto plan_step = [&](double t, long elapsed) {
    FleetState st;
    st.idle.assign(n, 0);
    for (const auto& v : veh) {
      if (!v.busy) {
        ++st.idle[v.station];
        st.vehicle_positions.push_back(v.pos);
      } else {
        const int k = std::max(1, static_cast<int>(std::ceil((v.free_at - t) / dt - 1e-9)));
        st.in_transit.push_back({v.dest_station, k, v.purpose});
      }
    }
    Grid<int> outstanding(n, n, 0);
    for (std::size_t r : waiting) ++outstanding(ost[r], dst[r]);

    opt::DemandSource src;
    const auto steps = static_cast<std::size_t>(cfg.horizon) + 1;
    const auto slot0 = static_cast<std::size_t>(elapsed / cfg.step_seconds);
    opt::DemandInput demand;
    switch (cfg.controller) {
      case Controller::Oracle: {
        Tensor3<int> lam(n, steps, 0);
        for (std::size_t k = 1; k < steps; ++k)
          if (slot0 + k - 1 < ahead)
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j) lam(i, j, k) = truth(i, j, slot0 + k - 1);
        src.truth = std::move(lam);
        demand = opt::controller_demand(opt::ControllerKind::Oracle, src, outstanding, n, cfg.horizon);
        break;
      }
      case Controller::FixedDemand: {
        Grid<int> last(n, n, 0);
        const long k = series.interval_of(t - dt);
        if (k >= 0)
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) last(i, j) = series.counts(i, j, static_cast<std::size_t>(k));
        src.last = std::move(last);
        demand = opt::controller_demand(opt::ControllerKind::FixedDemand, src, outstanding, n, cfg.horizon);
        break;
      }
      case Controller::CCMPC:
        src.forecast = forecasts(t);
        src.epsilon = cfg.epsilon;
        demand = opt::DemandInput::quantile(*src.forecast, cfg.epsilon, outstanding, cfg.quantile_rows);
        break;
      case Controller::GBM:
        return;
    }
    const opt::IlpProblem problem = opt::build_problem(st, net, demand, weights, cfg.horizon);
    const auto t_start = std::chrono::steady_clock::now();
    const opt::RebalancePlan plan = opt::solve_ilp(problem, solver);
    m.solver_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count());
    ++m.solves;
    if (plan.status != opt::SolveStatus::Optimal) ++m.limited_solves;
    if (obs.on_mpc) obs.on_mpc(MpcRecord{mpc_step, t, st, outstanding, src, problem, plan});

    // Launch x^r(t0): from each station the idle vehicles nearest the target go first.
    const Grid<int> moves = plan.first_step();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> idle;
      for (std::size_t v = 0; v < veh.size(); ++v)
        if (!veh[v].busy && veh[v].station == i) idle.push_back(v);
      for (std::size_t j = 0; j < n; ++j) {
        if (moves(i, j) <= 0) continue;
        const GeoPoint target = net.centroid(j);
        std::stable_sort(idle.begin(), idle.end(), [&](std::size_t a, std::size_t b) {
          return squared_distance(veh[a].pos, target) < squared_distance(veh[b].pos, target);
        });
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(moves(i, j)), idle.size());
        for (std::size_t c = 0; c < take; ++c) {
          detail::Vehicle& v = veh[idle[c]];
          const std::int64_t mm = detail::to_mm(net.travel_distance()(i, j));
          v.busy = true;
          v.free_at = t + net.travel_time()(i, j);
          v.dest_station = j;
          v.dest_pos = target;
          v.purpose = TripPurpose::Rebalance;
          v.ledger.rebalance_mm += mm;
          v.ledger.total_mm += mm;
        }
        idle.erase(idle.begin(), idle.begin() + static_cast<std::ptrdiff_t>(take));
      }
    }
  };

  for (long tick = 0; tick <= ticks; ++tick) {
    const long elapsed = tick * cfg.dispatch_seconds;
    const double t = sc.start_seconds + static_cast<double>(elapsed);
    for (auto& v : veh)
      if (v.busy && v.free_at <= t) {
        v.busy = false;
        v.station = v.dest_station;
        v.pos = v.dest_pos;
      }
    while (next < R && req[next].time <= t) {
      count(req[next]);
      waiting.push_back(next++);
    }
    dispatch(t);
    try {
      if (cfg.controller == Controller::CCMPC && elapsed % cfg.gp_seconds == 0) {
        const auto train = [&] { return gp::train_flow_models(series, t, cfg.training); };
        models = cache ? cache->get(t, train) : std::make_shared<const gp::ForecastModelSet>(train());
        memo.clear();
      }
      if (planned && elapsed % cfg.mpc_seconds == 0) {
        plan_step(t, elapsed);
        ++mpc_step;
      }
    } catch (const Error&) {
      detail::rethrow_at("step " + std::to_string(mpc_step) + " (tick " + std::to_string(tick) + ")");
    }
    if (obs.on_tick) {
      TickRecord rec;
      rec.tick = tick;
      rec.time = t;
      rec.fleet_size = sc.fleet_size;
      for (const auto& v : veh) {
        (v.busy ? rec.in_transit : rec.idle) += 1;
        rec.customer_mm += v.ledger.customer_mm;
        rec.rebalance_mm += v.ledger.rebalance_mm;
        rec.pickup_mm += v.ledger.pickup_mm;
        rec.total_mm += v.ledger.total_mm;
      }
      rec.total_requests = R;
      rec.pending = R - next;
      rec.waiting = waiting.size();
      rec.served = served;
      obs.on_tick(rec);
    }
  }

  m.total_requests = R;
  m.served = served;
  m.unserved = R - served;
  for (std::size_t r = 0; r < R; ++r)
    if (wait[r] >= 0.0) m.waits.push_back(wait[r]);
  for (const auto& v : veh) m.vehicles.push_back(v.ledger);
  return m;
}

}  // namespace amod::sim

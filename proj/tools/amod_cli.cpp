// amod: scenario partitioning, forecast training, simulation, sweeps and reports.
//
// Exit codes: 0 success, 2 invalid input, 3 solver or numerical failure, 4 I/O.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "amod/common.hpp"
#include "amod/gp/forecast.hpp"
#include "amod/opt/branch_bound.hpp"
#include "amod/opt/lp_format.hpp"
#include "amod/sim/config.hpp"
#include "amod/sim/report.hpp"
#include "amod/sim/scenario.hpp"
#include "amod/sim/simulator.hpp"
#include "amod/sim/sweep.hpp"
#include "amod/sim/synth.hpp"
#include "amod/sim/trips.hpp"

using namespace amod;
using namespace amod::sim;

namespace {

constexpr int kExitInvalid = 2;

// Settings shared by every subcommand that runs a controller. Flags are
// applied after the config file and the --set list, so they always win.
struct RunFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> controller;
  std::optional<double> epsilon;
  std::optional<int> horizon;
  std::optional<std::uint64_t> seed;
  std::optional<double> time_limit;
  std::optional<long> iteration_budget;
  std::optional<unsigned> gp_threads;
  std::optional<std::string> external;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "key = value settings file");
    app->add_option("--set", sets, "override one setting, key=value (repeatable)");
    app->add_option("--controller", controller, "gbm | oracle | ccmpc | fixed");
    app->add_option("--epsilon", epsilon, "chance-constraint violation level in (0, 1)");
    app->add_option("--horizon", horizon, "MPC horizon in model steps");
    app->add_option("--seed", seed, "initial vehicle scatter seed");
    app->add_option("--time-limit", time_limit, "seconds per rebalancing solve");
    app->add_option("--iteration-budget", iteration_budget, "simplex pivots per solve (0: unlimited)");
    app->add_option("--gp-threads", gp_threads, "threads for forecast training");
    app->add_option("--external-solver", external, "solver command using {lp} and {sol}");
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    for (const auto& s : sets) set_option(c, s);
    if (controller) c.controller = parse_controller(*controller);
    if (epsilon) c.epsilon = *epsilon;
    if (horizon) c.horizon = *horizon;
    if (seed) c.seed = *seed;
    if (time_limit) c.time_limit_seconds = *time_limit;
    if (iteration_budget) c.iteration_budget = *iteration_budget;
    if (gp_threads) c.training.threads = *gp_threads;
    if (external) c.external_solver = *external;
    c.validate();
    return c;
  }
};

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    double v;
    if (!sim::detail::to_double(tok, v)) throw InvalidInput("not a number in value list: `" + tok + "`");
    out.push_back(v);
  }
  return out;
}

void emit(const std::vector<ReportRow>& rows, ReportFormat f, const std::string& out) {
  if (out.empty() || out == "-")
    report(std::cout, rows, f);
  else
    report_to_file(out, rows, f);
}

ReportFormat format_for(const std::string& name, const std::string& path) {
  if (!name.empty()) return parse_report_format(name);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return ReportFormat::Csv;
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) return ReportFormat::Json;
  return path.empty() || path == "-" ? ReportFormat::Table : ReportFormat::Json;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fleet rebalancing with demand forecasts: partition, train, simulate, sweep, report"};
  app.require_subcommand(1);

  // partition
  auto* part = app.add_subcommand("partition", "trip records or a synthetic day -> scenario file");
  std::string trips_path, trips_format = "csv", scenario_out;
  std::optional<std::uint64_t> synthetic;
  std::size_t stations = 10;
  double start = 0.0, end = 0.0;
  int fleet = 300;
  double speed = 8.33, step = 900.0;
  std::uint64_t part_seed = 1;
  auto* trips_opt = part->add_option("--trips", trips_path, "CSV file, or cabtrace file/directory");
  part->add_option("--format", trips_format, "csv | cabtrace")->check(CLI::IsMember({"csv", "cabtrace"}));
  auto* syn_opt = part->add_option("--synthetic", synthetic, "seed of the synthetic benchmark (5 + 1 days)");
  trips_opt->excludes(syn_opt);
  part->add_option("--stations", stations, "number of stations (k-means clusters)");
  auto* start_opt = part->add_option("--start", start, "simulated window start, seconds (trips)");
  part->add_option("--end", end, "simulated window end, seconds (default: last trip)");
  part->add_option("--fleet", fleet, "fleet size");
  part->add_option("--speed", speed, "vehicle speed, m/s");
  part->add_option("--step", step, "model step, seconds");
  part->add_option("--seed", part_seed, "k-means seed");
  part->add_option("-o,--out", scenario_out, "scenario file")->required();

  // train
  auto* train = app.add_subcommand("train", "scenario history -> forecast model file");
  std::string scenario_in, models_out;
  RunFlags train_flags;
  train->add_option("--scenario", scenario_in, "scenario file")->required();
  train->add_option("-o,--out", models_out, "model file")->required();
  train_flags.add_to(train);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "scenario + config -> metrics");
  std::string sim_scenario, sim_out, sim_format, sim_models;
  RunFlags sim_flags;
  simulate->add_option("--scenario", sim_scenario, "scenario file")->required();
  simulate->add_option("--models", sim_models, "forecast models from `train` (CCMPC first day)");
  simulate->add_option("-o,--out", sim_out, "metrics file (default: table on stdout)");
  simulate->add_option("--format", sim_format, "table | csv | json (default from the extension)");
  sim_flags.add_to(simulate);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "one run per axis value -> CSV");
  std::string sw_scenario, sw_axis = "epsilon", sw_values, sw_out, sw_json;
  unsigned sw_threads = 1;
  RunFlags sw_flags;
  sweep_cmd->add_option("--scenario", sw_scenario, "scenario file")->required();
  sweep_cmd->add_option("--axis", sw_axis, "epsilon | fleet");
  sweep_cmd->add_option("--values", sw_values, "comma-separated axis values")->required();
  sweep_cmd->add_option("--threads", sw_threads, "points run concurrently");
  sweep_cmd->add_option("-o,--out", sw_out, "CSV file (default: stdout)");
  sweep_cmd->add_option("--json", sw_json, "also write full records as JSON");
  sw_flags.add_to(sweep_cmd);

  // report
  auto* rep = app.add_subcommand("report", "metrics JSON -> table, CSV or JSON");
  std::vector<std::string> rep_in;
  std::string rep_format = "table", rep_out;
  rep->add_option("inputs", rep_in, "metrics files written by simulate or sweep")->required();
  rep->add_option("--format", rep_format, "table | csv | json");
  rep->add_option("-o,--out", rep_out, "output file (default: stdout)");

  // solve-lp: the bundled branch-and-bound behind the external-solver interface.
  auto* solve_lp = app.add_subcommand("solve-lp", "");
  solve_lp->group("");
  std::string lp_in, sol_out;
  double lp_limit = 10.0;
  solve_lp->add_option("lp", lp_in)->required();
  solve_lp->add_option("sol", sol_out)->required();
  solve_lp->add_option("--time-limit", lp_limit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*part) {
      Scenario sc;
      ScenarioOptions opt;
      opt.speed_mps = speed;
      opt.step_seconds = step;
      opt.fleet_size = fleet;
      if (synthetic) {
        sc = benchmark_scenario(*synthetic, fleet);
        if (stations != 10 || speed != opt.speed_mps || step != 900.0) {
          std::vector<Request> hist = sc.history, req = sc.requests;
          sc = partition_scenario(std::move(hist), std::move(req), stations, sc.start_seconds, sc.end_seconds,
                                  *synthetic, opt, sc.area);
        }
      } else if (!trips_path.empty()) {
        if (!*start_opt) throw InvalidInput("--start is required with --trips");
        const auto records =
            ingest_trips(trips_path, trips_format == "csv" ? TripFormat::GenericCsv : TripFormat::Cabtrace);
        std::vector<Request> all = project_trips(records, centered_projection(records));
        std::vector<Request> hist, req;
        double last = start;
        for (const auto& r : all) {
          if (r.time < start) hist.push_back(r);
          else if (end <= 0.0 || r.time <= end) req.push_back(r);
          last = std::max(last, r.time);
        }
        const double stop = end > 0.0 ? end : last;
        if (!(stop > start)) throw InvalidInput("no trips after --start");
        sc = partition_scenario(std::move(hist), std::move(req), stations, start, stop, part_seed, opt);
      } else {
        throw InvalidInput("give --trips or --synthetic");
      }
      save_scenario(scenario_out, sc);
      std::fprintf(stderr, "%zu stations, %zu history and %zu simulated requests, fleet %d\n", sc.network.size(),
                   sc.history.size(), sc.requests.size(), sc.fleet_size);
    } else if (*train) {
      const RunConfig cfg = train_flags.resolve();
      const Scenario sc = load_scenario(scenario_in);
      const gp::ForecastModelSet models = train_scenario_models(sc, cfg.training);
      std::ofstream os(models_out);
      if (!os) throw IoError("cannot write " + models_out);
      gp::write_models(os, models);
      if (!os) throw IoError("write failed: " + models_out);
    } else if (*simulate) {
      const RunConfig cfg = sim_flags.resolve();
      const Scenario sc = load_scenario(sim_scenario);
      ModelCache cache;
      if (!sim_models.empty()) {
        std::ifstream is(sim_models);
        if (!is) throw IoError("cannot open " + sim_models);
        cache.put(sc.start_seconds, attach_scenario_history(gp::read_models(is), sc));
      }
      const SimMetrics m = run_simulation(sc, cfg, {}, &cache);
      emit({{to_string(cfg.controller), m}}, format_for(sim_format, sim_out), sim_out);
    } else if (*sweep_cmd) {
      const RunConfig cfg = sw_flags.resolve();
      const Scenario sc = load_scenario(sw_scenario);
      const SweepResult r = sweep(parse_axis(sw_axis), parse_values(sw_values), sc, cfg, sw_threads);
      emit(r.rows(), ReportFormat::Csv, sw_out);
      if (!sw_json.empty()) report_to_file(sw_json, r.rows(), ReportFormat::Json);
    } else if (*rep) {
      std::vector<ReportRow> rows;
      for (const auto& path : rep_in)
        for (auto& row : load_rows(path)) rows.push_back(std::move(row));
      emit(rows, parse_report_format(rep_format), rep_out);
    } else if (*solve_lp) {
      std::ifstream is(lp_in);
      if (!is) throw IoError("cannot open " + lp_in);
      const opt::LinearProgram lp = opt::read_lp(is);
      opt::SolverConfig c;
      c.time_limit_seconds = lp_limit;
      const opt::IlpSolution s = opt::solve_integer(lp, c);
      std::ofstream os(sol_out);
      if (!os) throw IoError("cannot write " + sol_out);
      opt::write_solution(os, lp, s.x);
      if (!os) throw IoError("write failed: " + sol_out);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  }
  return 0;
}

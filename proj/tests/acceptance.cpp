// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Criteria 5-10 share the simulation runs on the synthetic benchmark: seed 1
// carries the epsilon sweep and the four-controller conservation checks,
// seeds 2-5 add Oracle, GBM and CCMPC at the epsilon tuned on seed 1.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "amod/dispatch/hungarian.hpp"
#include "amod/gp/gp.hpp"
#include "amod/opt/rebalance.hpp"
#include "amod/sim/report.hpp"
#include "amod/sim/simulator.hpp"
#include "amod/sim/sweep.hpp"
#include "ilp_oracle.hpp"

using namespace amod;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void verdict(int id, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 ---------------------------------------------------------------------

void ilp_vs_enumeration() {
  const auto t0 = Clock::now();
  int agree = 0, nonzero = 0;
  constexpr int kInstances = 60;
  for (int s = 0; s < kInstances; ++s) {
    const oracle::TinyInstance in = oracle::random_tiny_instance(1000 + s);
    const auto [net, state] = oracle::to_library(in);
    const opt::IlpProblem p = opt::build_problem(
        state, net, opt::DemandInput::deterministic(in.lambda, in.outstanding), in.weights, in.horizon);
    const opt::RebalancePlan plan = opt::solve_ilp(p);
    const double ref = oracle::BruteForceIlp(in).solve();
    if (plan.status == opt::SolveStatus::Optimal && plan.objective == ref) ++agree;
    else std::printf("    instance %d: solver %.17g, enumeration %.17g\n", 1000 + s, plan.objective, ref);
    nonzero += ref != 0.0;
  }
  const double secs = since(t0);
  verdict(1, agree == kInstances && secs < 60.0,
          fmt("solve_ilp equals exhaustive enumeration on %d/%d instances (%d with positive cost), %.2f s", agree,
              kInstances, nonzero, secs));
}

// ---- 2 ---------------------------------------------------------------------

double permutation_minimum(const CostMatrix& c) {
  const bool wide = c.rows() <= c.cols();
  const std::size_t small = std::min(c.rows(), c.cols()), large = std::max(c.rows(), c.cols());
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < small; ++i) s += wide ? c(i, perm[i]) : c(perm[i], i);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void hungarian_vs_permutations() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  int agree = 0;
  constexpr int kMatrices = 150;
  for (int m = 0; m < kMatrices; ++m) {
    const std::size_t r = m < 100 ? 6 : 1 + rng() % 6, c = m < 100 ? 6 : 1 + rng() % 6;
    CostMatrix cost(r, c);
    for (auto& x : cost.data()) x = static_cast<double>(rng() % 100);
    agree += hungarian(cost).total_cost == permutation_minimum(cost);
  }
  const double secs = since(t0);
  verdict(2, agree == kMatrices && secs < 10.0,
          fmt("Hungarian cost equals the permutation minimum on %d/%d integer matrices (100 of them 6x6), %.2f s",
              agree, kMatrices, secs));
}

// ---- 3, 4 ------------------------------------------------------------------

gp::KernelSpec kernel_for(std::mt19937_64& rng, int which) {
  std::uniform_real_distribution<double> u(0.5, 3.0);
  switch (which % 3) {
    case 0: return gp::KernelSpec::rbf(u(rng), u(rng));
    case 1: return gp::KernelSpec::periodic(u(rng), 2.0 + u(rng), u(rng));
    default: return gp::KernelSpec::locally_periodic(2.0 * u(rng), u(rng), 3.0 + u(rng), u(rng));
  }
}

void gradient_vs_differences() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int uniform = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 10 + static_cast<std::size_t>(inst);  // 10..29
    gp::GPTrainingSet d;
    double t = 0.0;
    const bool even = inst % 2 == 0;  // even spacing takes the Toeplitz path
    uniform += even;
    for (std::size_t i = 0; i < n; ++i) {
      t += even ? 0.25 : 0.05 + 0.5 * u(rng);
      d.inputs.push_back(t);
      d.targets.push_back(std::sin(t) + 0.3 * g(rng));
    }
    d.noise_variance = 0.05 + 0.2 * u(rng);
    const gp::KernelSpec k = kernel_for(rng, inst);
    const std::vector<double> grad = gp::lml_gradient(d, k);
    std::vector<double> theta = gp::log_params(k);
    theta.push_back(std::log(d.noise_variance));
    const auto f = [&](const std::vector<double>& th) {
      gp::GPTrainingSet dd = d;
      dd.noise_variance = std::exp(th.back());
      return gp::log_marginal_likelihood(dd, gp::with_log_params(k, std::span(th.data(), th.size() - 1)));
    };
    for (std::size_t q = 0; q < theta.size(); ++q) {
      auto p = theta, m = theta;
      p[q] += 1e-5;
      m[q] -= 1e-5;
      const double fd = (f(p) - f(m)) / 2e-5;
      worst = std::max(worst, std::abs(grad[q] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  const double secs = since(t0);
  verdict(3, worst < 1e-5 && secs < 30.0,
          fmt("LML gradient vs central differences (h = 1e-5, log space) on 20 instances, %d evenly spaced: worst "
              "relative error %.2e, %.2f s",
              uniform, worst, secs));
}

void posterior_sanity() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> gap(0.6, 1.4), u(0.0, 10.0);
  double interp = 0.0, interp_var = 0.0;
  gp::GPTrainingSet d;
  for (double t = 0.0; d.inputs.size() < 15; t += gap(rng)) {
    d.inputs.push_back(t);
    d.targets.push_back(2.0 * std::sin(0.7 * t) + 0.5 * std::cos(1.9 * t));
  }
  d.noise_variance = 1e-8;
  const gp::KernelSpec k = gp::KernelSpec::rbf(0.8, 1.5);
  const gp::TrainedGP post = gp::condition(d, k);
  for (std::size_t i = 0; i < d.inputs.size(); ++i) {
    const gp::Forecast f = gp::predict(post, d.inputs[i]);
    interp = std::max(interp, std::abs(f.mean - d.targets[i]));
    interp_var = std::max(interp_var, f.std * f.std);
  }
  const gp::Forecast far = gp::predict(post, 1e4);
  const double prior_gap = std::abs(far.std * far.std - (gp::kernel_eval(k, 1e4, 1e4) + d.noise_variance));

  int monotone = 0;
  double worst = -1e300;
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<double> t(6);
    for (auto& x : t) x = u(rng);
    std::sort(t.begin(), t.end());
    gp::GPTrainingSet six{t, std::vector<double>(6), 0.1};
    for (auto& y : six.targets) y = u(rng);
    gp::GPTrainingSet five = six;
    five.inputs.erase(five.inputs.begin() + inst % 6);
    five.targets.erase(five.targets.begin() + inst % 6);
    const gp::KernelSpec kk = kernel_for(rng, inst);
    const gp::TrainedGP a = gp::condition(five, kk), b = gp::condition(six, kk);
    bool ok = true;
    for (double ts = -2.0; ts <= 12.0; ts += 0.1) {
      const double va = gp::predict(a, ts).std, vb = gp::predict(b, ts).std;
      worst = std::max(worst, vb * vb - va * va);
      ok = ok && vb * vb <= va * va + 1e-8;
    }
    monotone += ok;
  }
  verdict(4, interp < 1e-3 && interp_var < 1e-3 && prior_gap < 1e-6 && monotone == 20,
          fmt("interpolation error %.1e (var %.1e), far-field variance off prior by %.1e, variance monotone on "
              "%d/20 instances (largest increase %.1e)",
              interp, interp_var, prior_gap, monotone, worst));
}

// ---- simulation criteria ---------------------------------------------------

struct TickCheck {
  long ticks = 0, fleet = 0, ledger = 0, requests = 0;
  sim::SimObserver observer() {
    sim::SimObserver o;
    o.on_tick = [this](const sim::TickRecord& r) {
      ++ticks;
      fleet += r.idle + r.in_transit != r.fleet_size;
      ledger += r.total_mm != r.customer_mm + r.rebalance_mm + r.pickup_mm;
      requests += r.pending + r.waiting + r.served != r.total_requests;
    };
    return o;
  }
  bool clean() const { return ticks > 0 && fleet == 0 && ledger == 0 && requests == 0; }
};

// Rebuilds every epsilon = 0.5 problem from ceil(mu) as deterministic demand.
struct IdentityCheck {
  long steps = 0, matrix_diffs = 0, plan_diffs = 0;
  // quantile mass per epsilon of the sweep, on each realized forecast tensor
  std::vector<double> eps;
  long mass_checks = 0, mass_violations = 0;
  opt::CostWeights weights;
  int horizon = 12;
  opt::SolverConfig solver;

  void inspect(const sim::MpcRecord& r, const StationNetwork& net) {
    const auto& f = *r.source.forecast;
    const std::size_t n = f.stations();
    Tensor3<int> lambda(n, f.steps(), 0);
    for (std::size_t k = 0; k < f.steps(); ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) lambda(i, j, k) = std::max(0, static_cast<int>(std::ceil(f(i, j, k).mean)));
    const opt::IlpProblem det =
        opt::build_problem(r.state, net, opt::DemandInput::deterministic(lambda, r.outstanding), weights, horizon);
    ++steps;
    const bool same = det.lp.rows == r.problem.lp.rows && det.lp.cost == r.problem.lp.cost &&
                      det.lp.lower == r.problem.lp.lower && det.lp.upper == r.problem.lp.upper &&
                      det.lp.integer == r.problem.lp.integer;
    matrix_diffs += !same;
    plan_diffs += opt::solve_ilp(det, solver).first_step() != r.plan.first_step();

    long prev = std::numeric_limits<long>::max();
    for (double e : eps) {
      const Tensor3<int> q = opt::quantile_demand(f, e);
      const long mass = std::accumulate(q.data().begin(), q.data().end(), 0L);
      ++mass_checks;
      mass_violations += mass > prev;
      prev = mass;
    }
  }
};

struct SeedRuns {
  sim::SimMetrics oracle, gbm, ccmpc;
};

std::string csv_of(const sim::SimMetrics& m, const std::string& label) {
  std::ostringstream os;
  sim::write_csv(os, {{label, m}});
  return os.str();
}

void simulation_criteria(Clock::time_point suite_start) {
  using namespace amod::sim;
  const std::vector<double> eps{0.2, 0.35, 0.5, 0.65, 0.8};
  RunConfig base;  // 10 stations, T = 12, 15 min steps, bundled solver
  std::vector<SeedRuns> seeds(5);

  // Seed 1: epsilon sweep, the four controllers, identity and conservation checks.
  const Scenario sc1 = benchmark_scenario(1);
  std::printf("    seed 1: %zu stations, %d vehicles, %zu history and %zu simulated requests\n", sc1.network.size(),
              sc1.fleet_size, sc1.history.size(), sc1.requests.size());
  std::fflush(stdout);

  std::vector<TickCheck> ticks(eps.size() + 3);
  IdentityCheck ident;
  ident.eps = eps;
  ident.weights = opt::default_weights(sc1.network, base.horizon, base.weights);
  ident.horizon = base.horizon;
  ident.solver = base.solver();

  auto t = Clock::now();
  RunConfig cc = base;
  cc.controller = Controller::CCMPC;
  const SweepResult sw = sweep(SweepAxis::Epsilon, eps, sc1, cc, 1, [&](std::size_t i) {
    SimObserver o = ticks[i].observer();
    if (eps[i] == 0.5) o.on_mpc = [&](const MpcRecord& r) { ident.inspect(r, sc1.network); };
    return o;
  });
  std::printf("    seed 1 epsilon sweep: %.0f s\n", since(t));
  std::size_t best = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const Summary w = summarize(sw.points[i].metrics.waits);
    std::printf("      eps %-4g mean wait %6.1f s  median %6.1f s  rebalance %7.1f km  limited solves %zu\n", eps[i],
                w.mean, w.median, sim::detail::km(sw.points[i].metrics.rebalance_mm()), sw.points[i].metrics.limited_solves);
    if (w.mean < mean_wait(sw.points[best].metrics)) best = i;
  }
  const double tuned = eps[best];
  std::fflush(stdout);

  const auto run = [&](const Scenario& sc, Controller c, double e, const SimObserver& obs = {}) {
    RunConfig r = base;
    r.controller = c;
    r.epsilon = e;
    const auto s = Clock::now();
    SimMetrics m = run_simulation(sc, r, obs);
    std::printf("    %-6s eps %-4g %5.0f s  mean wait %6.1f s\n", to_string(c), e, since(s), mean_wait(m));
    std::fflush(stdout);
    return m;
  };
  seeds[0].oracle = run(sc1, Controller::Oracle, 0.5, ticks[eps.size()].observer());
  seeds[0].gbm = run(sc1, Controller::GBM, 0.5, ticks[eps.size() + 1].observer());
  const SimMetrics fixed = run(sc1, Controller::FixedDemand, 0.5, ticks[eps.size() + 2].observer());
  seeds[0].ccmpc = sw.points[best].metrics;

  // 5: quantile identity on every MPC step of the epsilon = 0.5 day.
  verdict(5, ident.steps > 0 && ident.matrix_diffs == 0 && ident.plan_diffs == 0,
          fmt("epsilon 0.5 vs deterministic ceil(mu): %ld MPC steps, %ld differing constraint systems, %ld differing "
              "first-step plans",
              ident.steps, ident.matrix_diffs, ident.plan_diffs));

  // 6: conservation on every tick for GBM, Oracle, Fixed and CCMPC (all sweep points).
  {
    bool ok = true;
    long total = 0, bad = 0;
    for (const auto& c : ticks) {
      ok = ok && c.clean();
      total += c.ticks;
      bad += c.fleet + c.ledger + c.requests;
    }
    verdict(6, ok,
            fmt("fleet, distance-ledger and request conservation over %ld ticks in %zu full-day runs "
                "(gbm, oracle, fixed, ccmpc x5): %ld violations",
                total, ticks.size(), bad));
  }

  // Seeds 2-5.
  for (std::uint64_t s = 2; s <= 5; ++s) {
    const Scenario sc = benchmark_scenario(s);
    std::printf("    seed %llu: %zu simulated requests\n", static_cast<unsigned long long>(s), sc.requests.size());
    seeds[s - 1].oracle = run(sc, Controller::Oracle, 0.5);
    seeds[s - 1].gbm = run(sc, Controller::GBM, 0.5);
    seeds[s - 1].ccmpc = run(sc, Controller::CCMPC, tuned);
  }

  // 7: ordering of the five-seed averages.
  {
    double o = 0.0, c = 0.0, g = 0.0;
    for (const auto& r : seeds) {
      o += mean_wait(r.oracle) / 5.0;
      c += mean_wait(r.ccmpc) / 5.0;
      g += mean_wait(r.gbm) / 5.0;
    }
    const double elapsed = since(suite_start);
    const bool ok = o <= c && c <= g && c <= 1.15 * o && g >= 1.10 * c && elapsed < 1800.0;
    verdict(7, ok,
            fmt("5-seed mean wait: oracle %.1f s, ccmpc(eps %g) %.1f s (%+.1f%% vs oracle), gbm %.1f s "
                "(%+.1f%% vs ccmpc); fixed on seed 1 %.1f s; elapsed %.0f s",
                o, tuned, c, 100.0 * (c / o - 1.0), g, 100.0 * (g / c - 1.0), mean_wait(fixed), elapsed));
  }

  // 8: interior epsilon at least as good as 0.5, quantile mass non-increasing.
  {
    const double at_half = mean_wait(sw.points[2].metrics);
    const double w35 = mean_wait(sw.points[1].metrics), w65 = mean_wait(sw.points[3].metrics);
    const bool interior = w35 <= at_half || w65 <= at_half;
    verdict(8, interior && ident.mass_checks > 0 && ident.mass_violations == 0,
            fmt("mean wait eps 0.35 %.1f s, 0.5 %.1f s, 0.65 %.1f s; quantile mass non-increasing in eps on %ld/%ld "
                "comparisons over %ld forecast tensors",
                w35, at_half, w65, ident.mass_checks - ident.mass_violations, ident.mass_checks, ident.steps));
  }

  // 9: solve latency at N = 10, T = 12.
  {
    std::vector<double> all;
    for (const auto& p : sw.points) all.insert(all.end(), p.metrics.solver_seconds.begin(), p.metrics.solver_seconds.end());
    const Summary day = summarize(sw.points[2].metrics.solver_seconds), every = summarize(all);
    verdict(9, every.count > 0 && every.max < 10.0,
            fmt("CCMPC solve at N = 10, T = 12: median %.3f s, mean %.3f s over the eps 0.5 day; max %.3f s over %zu "
                "solves",
                day.median, day.mean, every.max, every.count));
  }

  // 10: an independent rerun (own model training) gives the same CSV bytes.
  {
    const SimMetrics again = run(sc1, Controller::CCMPC, tuned);
    const std::string a = csv_of(sw.points[best].metrics, "ccmpc"), b = csv_of(again, "ccmpc");
    verdict(10, a == b,
            fmt("two CCMPC runs (seed 1, eps %g) give %s metric CSVs (%zu bytes)", tuned,
                a == b ? "byte-identical" : "DIFFERENT", a.size()));
  }
}

}  // namespace

int main() {
  const auto start = Clock::now();
  ilp_vs_enumeration();
  hungarian_vs_permutations();
  gradient_vs_differences();
  posterior_sanity();
  try {
    simulation_criteria(start);
  } catch (const std::exception& e) {
    std::printf("simulation criteria aborted: %s\n", e.what());
    ++failures;
  }
  std::printf("%s: %d failing, %.0f s\n", failures ? "FAILED" : "ALL PASSED", failures, since(start));
  return failures ? 1 : 0;
}

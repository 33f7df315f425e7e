#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "amod/opt/linear_program.hpp"
#include "amod/opt/simplex.hpp"

namespace amod::opt {

struct IlpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  double lp_bound = 0.0;  // root relaxation objective
  long nodes = 0;
  long lp_iterations = 0;
  double seconds = 0.0;
};

class IlpBackend;

/// Maps a relaxation solution to a candidate integer solution (or nothing).
using PrimalHeuristic = std::function<std::optional<std::vector<double>>(const std::vector<double>&)>;

struct SolverConfig {
  double time_limit_seconds = 10.0;
  double absolute_gap = 0.0;
  double relative_gap = 0.0;
  double integrality_tol = 1e-6;
  long iteration_budget = 0;  // simplex pivots summed over all nodes; 0: unlimited
  std::shared_ptr<const IlpBackend> backend;  // null: bundled branch-and-bound
  std::optional<Basis> start_basis;  // root LP starting basis for the bundled solver
  PrimalHeuristic heuristic;  // tried on every fractional node; candidates are verified
  std::optional<std::vector<double>> initial_solution;  // verified, then used as the first incumbent
};

/// Anything that can solve a LinearProgram with integrality flags.
class IlpBackend {
 public:
  virtual ~IlpBackend() = default;
  virtual IlpSolution solve(const LinearProgram& lp, const SolverConfig& cfg) const = 0;
};

/// Depth-first branch-and-bound over the bundled simplex. Branches on the
/// variable whose fractional part is nearest 0.5 (lowest index on ties),
/// explores the down branch first and prunes nodes whose relaxation cannot
/// beat the incumbent by more than the gap. Children are pruned against the
/// parent bound before their relaxation is solved.
class BranchAndBound final : public IlpBackend {
 public:
  IlpSolution solve(const LinearProgram& lp, const SolverConfig& cfg) const override {
    lp.validate();
    const auto start = Clock::now();
    const auto deadline =
        start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.time_limit_seconds));
    SimplexOptions sopt;
    sopt.deadline = deadline;

    // Children start from the parent's optimal basis.
    struct Node {
      std::vector<double> lower, upper;
      std::shared_ptr<const Basis> basis;
      double bound = -kInf;
    };
    std::vector<Node> stack;
    stack.push_back({lp.lower, lp.upper, cfg.start_basis ? std::make_shared<Basis>(*cfg.start_basis) : nullptr});

    IlpSolution best;
    bool have_incumbent = false;
    const auto dominated = [&](double bound) {
      if (!have_incumbent) return false;
      const double gap = std::max(cfg.absolute_gap, cfg.relative_gap * std::abs(best.objective));
      return bound >= best.objective - gap - 1e-9 * std::max(1.0, std::abs(best.objective));
    };
    const auto offer = [&](std::vector<double> x) {
      for (std::size_t j = 0; j < x.size(); ++j)
        if (lp.integer[j]) x[j] = std::round(x[j]);
      if (lp.max_violation(x) > 1e-6) return;
      const double obj = lp.objective(x);
      if (!have_incumbent || obj < best.objective) {
        best.x = std::move(x);
        best.objective = obj;
        have_incumbent = true;
      }
    };
    if (cfg.initial_solution && cfg.initial_solution->size() == lp.num_vars()) offer(*cfg.initial_solution);
    bool timed_out = false, budget_spent = false;
    bool root = true;
    const long simplex_cap = 50 * static_cast<long>(lp.rows.size() + lp.num_vars() + 10);
    while (!stack.empty()) {
      if (Clock::now() > deadline) {
        timed_out = true;
        break;
      }
      Node node = std::move(stack.back());
      stack.pop_back();
      if (dominated(node.bound)) continue;
      if (cfg.iteration_budget > 0) {
        const long left = cfg.iteration_budget - best.lp_iterations;
        if (left <= 0) {
          budget_spent = true;
          break;
        }
        sopt.max_iterations = std::min(left, simplex_cap);
      }
      ++best.nodes;
      sopt.start = node.basis.get();
      LpResult r = solve_lp(lp, node.lower, node.upper, sopt);
      best.lp_iterations += r.iterations;
      if (r.status == SolveStatus::TimeLimit) {
        timed_out = true;
        break;
      }
      if (r.status == SolveStatus::IterationLimit) {
        if (cfg.iteration_budget > 0 && best.lp_iterations >= cfg.iteration_budget) {
          budget_spent = true;
          break;
        }
        throw SolverError("simplex iteration limit reached");
      }
      if (r.status == SolveStatus::Unbounded) throw SolverError("LP relaxation is unbounded");
      if (r.status == SolveStatus::Infeasible) {
        if (root) throw InfeasibleError("integer program is infeasible");
        continue;
      }
      if (root) {
        best.lp_bound = r.objective;
        root = false;
      }
      if (dominated(r.objective)) continue;

      std::size_t branch = lp.num_vars();
      double branch_score = 2.0;
      for (std::size_t j = 0; j < lp.num_vars(); ++j) {
        if (!lp.integer[j]) continue;
        const double f = r.x[j] - std::floor(r.x[j]);
        if (f <= cfg.integrality_tol || f >= 1.0 - cfg.integrality_tol) continue;
        const double score = std::abs(f - 0.5);
        if (score < branch_score) {
          branch_score = score;
          branch = j;
        }
      }
      if (branch == lp.num_vars()) {
        offer(r.x);
        continue;
      }
      if (cfg.heuristic)
        if (auto cand = cfg.heuristic(r.x); cand && cand->size() == lp.num_vars()) {
          offer(std::move(*cand));
          if (dominated(r.objective)) continue;
        }
      const double v = r.x[branch];
      node.basis = std::make_shared<const Basis>(std::move(r.basis));
      node.bound = r.objective;
      Node up = node;
      up.lower[branch] = std::ceil(v);
      Node down = std::move(node);
      down.upper[branch] = std::floor(v);
      stack.push_back(std::move(up));
      stack.push_back(std::move(down));
    }
    best.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (timed_out || budget_spent) {
      if (!have_incumbent) throw NoSolutionError("work limit reached without an integer solution");
      best.status = timed_out ? SolveStatus::TimeLimit : SolveStatus::IterationLimit;
      return best;
    }
    if (!have_incumbent) throw InfeasibleError("integer program is infeasible");
    best.status = SolveStatus::Optimal;
    return best;
  }
};

/// Solves with the configured backend (bundled branch-and-bound by default).
inline IlpSolution solve_integer(const LinearProgram& lp, const SolverConfig& cfg = {}) {
  if (cfg.backend) return cfg.backend->solve(lp, cfg);
  return BranchAndBound{}.solve(lp, cfg);
}

}  // namespace amod::opt

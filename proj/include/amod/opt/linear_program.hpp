#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "amod/common.hpp"

namespace amod::opt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { LessEqual, GreaterEqual, Equal };

struct Row {
  std::string name;
  std::vector<std::size_t> index;
  std::vector<double> coef;
  RowSense sense = RowSense::Equal;
  double rhs = 0.0;

  bool operator==(const Row&) const = default;
};

/// min c'x  s.t.  rows,  lower <= x <= upper,  x_j integer where flagged.
struct LinearProgram {
  std::vector<std::string> names;
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<char> integer;
  std::vector<Row> rows;

  std::size_t num_vars() const noexcept { return cost.size(); }

  std::size_t add_var(std::string name, double c, double lb = 0.0, double ub = kInf, bool is_int = true) {
    names.push_back(std::move(name));
    cost.push_back(c);
    lower.push_back(lb);
    upper.push_back(ub);
    integer.push_back(is_int ? 1 : 0);
    return cost.size() - 1;
  }

  void add_row(Row r) { rows.push_back(std::move(r)); }

  /// Throws InvalidInput unless every row references declared variables and
  /// all numbers are finite where required.
  void validate() const {
    const std::size_t n = num_vars();
    if (lower.size() != n || upper.size() != n || integer.size() != n || names.size() != n)
      throw InvalidInput("variable arrays differ in length");
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(cost[j])) throw InvalidInput("objective coefficient is not finite");
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j])
        throw InvalidInput("variable bounds are inconsistent");
    }
    for (const auto& r : rows) {
      if (r.index.size() != r.coef.size()) throw InvalidInput("row '" + r.name + "' is malformed");
      if (!std::isfinite(r.rhs)) throw InvalidInput("row '" + r.name + "' has non-finite rhs");
      for (std::size_t k = 0; k < r.index.size(); ++k) {
        if (r.index[k] >= n) throw InvalidInput("row '" + r.name + "' references an undeclared variable");
        if (!std::isfinite(r.coef[k])) throw InvalidInput("row '" + r.name + "' has a non-finite coefficient");
      }
    }
  }

  double objective(const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < cost.size(); ++j) v += cost[j] * x[j];
    return v;
  }

  double activity(const Row& r, const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t k = 0; k < r.index.size(); ++k) v += r.coef[k] * x[r.index[k]];
    return v;
  }

  /// Largest violation of any row or bound by x.
  double max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < num_vars(); ++j) {
      worst = std::max(worst, lower[j] - x[j]);
      worst = std::max(worst, x[j] - upper[j]);
    }
    for (const auto& r : rows) {
      const double a = activity(r, x);
      switch (r.sense) {
        case RowSense::LessEqual: worst = std::max(worst, a - r.rhs); break;
        case RowSense::GreaterEqual: worst = std::max(worst, r.rhs - a); break;
        case RowSense::Equal: worst = std::max(worst, std::abs(a - r.rhs)); break;
      }
    }
    return worst;
  }
};

enum class SolveStatus { Optimal, TimeLimit, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::TimeLimit: return "time_limit";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

using Clock = std::chrono::steady_clock;

}  // namespace amod::opt

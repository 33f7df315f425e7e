#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "amod/opt/linear_program.hpp"

namespace amod::opt {

/// Basic variable per row (structurals 0..n-1, row logicals n..n+m-1) and
/// which nonbasic variables sit at their upper bound.
struct Basis {
  std::vector<std::size_t> head;
  std::vector<char> at_upper;
};

struct LpResult {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  long iterations = 0;
  Basis basis;
};

struct SimplexOptions {
  double feasibility_tol = 1e-8;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  int degenerate_before_bland = 50;  // consecutive degenerate pivots before Bland's rule
  int refactor_every = 100;
  long max_iterations = 0;  // 0: 50 * (rows + vars)
  std::optional<Clock::time_point> deadline;
  const Basis* start = nullptr;  // starting basis; slack basis if null or singular
};

/// Bounded primal simplex over a sparse LU of the basis with product-form
/// updates, refactorized every `refactor_every` pivots.
///
/// Row i reads a_i x + s_i = b_i with a logical s_i bounded [0,inf) for <=,
/// (-inf,0] for >= and [0,0] for =. Any starting basis is accepted: while some
/// basic variable is out of bounds the method minimizes the sum of
/// infeasibilities (composite phase 1), then the true objective. Pricing is
/// Dantzig's rule; after a run of degenerate pivots it switches to Bland's
/// rule (lowest eligible index, lowest-index leaving on ratio ties) until the
/// objective moves again. Pivot and tie rules are fixed, so the result is a
/// deterministic function of the input.
class Simplex {
 public:
  Simplex(const LinearProgram& lp, const std::vector<double>& lower, const std::vector<double>& upper,
          SimplexOptions opt = {})
      : lp_(lp), opt_(opt), m_(lp.rows.size()), n_(lp.num_vars()) {
    build_columns();
    const std::size_t total = n_ + m_;
    lb_.assign(total, 0.0);
    ub_.assign(total, 0.0);
    x_.assign(total, 0.0);
    cost_.assign(total, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      lb_[j] = lower[j];
      ub_[j] = upper[j];
      cost_[j] = lp.cost[j];
    }
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t s = n_ + i;
      switch (lp.rows[i].sense) {
        case RowSense::LessEqual: lb_[s] = 0.0; ub_[s] = kInf; break;
        case RowSense::GreaterEqual: lb_[s] = -kInf; ub_[s] = 0.0; break;
        case RowSense::Equal: lb_[s] = 0.0; ub_[s] = 0.0; break;
      }
    }
    if (opt_.max_iterations == 0) opt_.max_iterations = 50 * static_cast<long>(m_ + n_ + 10);
  }

  LpResult solve() {
    LpResult res;
    const std::size_t total = n_ + m_;
    for (std::size_t j = 0; j < n_; ++j)
      if (lb_[j] > ub_[j]) return res;

    pos_.assign(total, -1);
    head_.assign(m_, 0);
    bool use_start = opt_.start && opt_.start->head.size() == m_ && opt_.start->at_upper.size() == total;
    if (use_start) {
      for (std::size_t i = 0; i < m_ && use_start; ++i) {
        const std::size_t v = opt_.start->head[i];
        if (v >= total || pos_[v] >= 0) use_start = false;
        else pos_[v] = static_cast<long>(i);
      }
    }
    for (std::size_t j = 0; j < total; ++j) {
      x_[j] = nonbasic_start(j);
      if (use_start && opt_.start->at_upper[j] && std::isfinite(ub_[j])) x_[j] = ub_[j];
    }
    if (use_start) {
      head_ = opt_.start->head;
      if (!factor()) use_start = false;
    }
    if (!use_start) slack_basis();
    recompute_basics();

    res.status = iterate(res.iterations);
    res.basis.head = head_;
    res.basis.at_upper.assign(total, 0);
    for (std::size_t j = 0; j < total; ++j)
      res.basis.at_upper[j] = pos_[j] < 0 && std::isfinite(ub_[j]) && x_[j] == ub_[j] && ub_[j] != lb_[j];
    if (res.status != SolveStatus::Optimal && res.status != SolveStatus::TimeLimit &&
        res.status != SolveStatus::IterationLimit)
      return res;
    res.x.assign(x_.begin(), x_.begin() + static_cast<long>(n_));
    res.objective = lp_.objective(res.x);
    return res;
  }

 private:
  struct Eta {
    std::size_t row;
    double pivot;
    std::vector<std::size_t> index;
    std::vector<double> value;
  };

  double nonbasic_start(std::size_t j) const {
    if (std::isfinite(lb_[j])) return lb_[j];
    if (std::isfinite(ub_[j])) return ub_[j];
    return 0.0;
  }

  void slack_basis() {
    std::fill(pos_.begin(), pos_.end(), -1);
    for (std::size_t i = 0; i < m_; ++i) {
      head_[i] = n_ + i;
      pos_[n_ + i] = static_cast<long>(i);
    }
    for (std::size_t j = 0; j < n_; ++j) x_[j] = std::clamp(x_[j], lb_[j], ub_[j]);
    factor();
  }

  void build_columns() {
    std::vector<std::size_t> count(n_ + 1, 0);
    for (const auto& r : lp_.rows)
      for (std::size_t k = 0; k < r.index.size(); ++k)
        if (r.coef[k] != 0.0) ++count[r.index[k] + 1];
    cstart_.assign(n_ + 1, 0);
    for (std::size_t j = 0; j < n_; ++j) cstart_[j + 1] = cstart_[j] + count[j + 1];
    crow_.resize(cstart_[n_]);
    cval_.resize(cstart_[n_]);
    std::vector<std::size_t> fill(cstart_.begin(), cstart_.end() - 1);
    for (std::size_t i = 0; i < lp_.rows.size(); ++i) {
      const auto& r = lp_.rows[i];
      for (std::size_t k = 0; k < r.index.size(); ++k) {
        if (r.coef[k] == 0.0) continue;
        const std::size_t p = fill[r.index[k]]++;
        crow_[p] = i;
        cval_[p] = r.coef[k];
      }
    }
  }

  bool factor() {
    etas_.clear();
    if (m_ == 0) return true;
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t j = head_[i];
      const auto col = static_cast<int>(i);
      if (j < n_) {
        for (std::size_t k = cstart_[j]; k < cstart_[j + 1]; ++k)
          trip.emplace_back(static_cast<int>(crow_[k]), col, cval_[k]);
      } else {
        trip.emplace_back(static_cast<int>(j - n_), col, 1.0);
      }
    }
    const auto m = static_cast<Eigen::Index>(m_);
    Eigen::SparseMatrix<double> b(m, m);
    b.setFromTriplets(trip.begin(), trip.end());
    lu_.compute(b);
    return lu_.info() == Eigen::Success;
  }

  double dot_column(const Eigen::VectorXd& y, std::size_t j) const {
    if (j < n_) {
      double s = 0.0;
      for (std::size_t k = cstart_[j]; k < cstart_[j + 1]; ++k) s += y[static_cast<Eigen::Index>(crow_[k])] * cval_[k];
      return s;
    }
    return y[static_cast<Eigen::Index>(j - n_)];
  }

  // v <- B^-1 v
  void ftran_in_place(Eigen::VectorXd& v) const {
    if (m_ == 0) return;
    v = lu_.solve(v);
    for (const Eta& e : etas_) {
      const auto r = static_cast<Eigen::Index>(e.row);
      const double zr = v[r] / e.pivot;
      if (zr != 0.0)
        for (std::size_t k = 0; k < e.index.size(); ++k) v[static_cast<Eigen::Index>(e.index[k])] -= e.value[k] * zr;
      v[r] = zr;
    }
  }

  void ftran(std::size_t j, Eigen::VectorXd& alpha) const {
    alpha.setZero(static_cast<Eigen::Index>(m_));
    if (j < n_) {
      for (std::size_t k = cstart_[j]; k < cstart_[j + 1]; ++k) alpha[static_cast<Eigen::Index>(crow_[k])] = cval_[k];
    } else {
      alpha[static_cast<Eigen::Index>(j - n_)] = 1.0;
    }
    ftran_in_place(alpha);
  }

  // y' = c_B' B^-1
  void btran(Eigen::VectorXd& v) const {
    if (m_ == 0) return;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const auto r = static_cast<Eigen::Index>(it->row);
      double s = v[r];
      for (std::size_t k = 0; k < it->index.size(); ++k) s -= it->value[k] * v[static_cast<Eigen::Index>(it->index[k])];
      v[r] = s / it->pivot;
    }
    v = lu_.transpose().solve(v);
  }

  // x_B = B^-1 (b - N x_N)
  void recompute_basics() {
    Eigen::VectorXd r(static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) r[static_cast<Eigen::Index>(i)] = lp_.rows[i].rhs;
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (pos_[j] >= 0 || x_[j] == 0.0) continue;
      if (j < n_) {
        for (std::size_t k = cstart_[j]; k < cstart_[j + 1]; ++k) r[static_cast<Eigen::Index>(crow_[k])] -= cval_[k] * x_[j];
      } else {
        r[static_cast<Eigen::Index>(j - n_)] -= x_[j];
      }
    }
    ftran_in_place(r);
    for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] = r[static_cast<Eigen::Index>(i)];
  }

  double tol(double bound) const { return opt_.feasibility_tol * (1.0 + std::abs(bound)); }
  bool below(std::size_t v) const { return x_[v] < lb_[v] - tol(lb_[v]); }
  bool above(std::size_t v) const { return x_[v] > ub_[v] + tol(ub_[v]); }

  SolveStatus iterate(long& iterations) {
    const auto m = static_cast<Eigen::Index>(m_);
    Eigen::VectorXd y(m), alpha(m);
    int degenerate_run = 0;
    bool bland = false;
    const std::size_t total = n_ + m_;
    for (;;) {
      if (iterations >= opt_.max_iterations) return SolveStatus::IterationLimit;
      if (opt_.deadline && (iterations & 31) == 0 && Clock::now() > *opt_.deadline) return SolveStatus::TimeLimit;
      if (static_cast<int>(etas_.size()) >= opt_.refactor_every) {
        if (!factor()) throw NumericalError("basis became singular");
        recompute_basics();
      }

      // Phase 1 prices the sum of infeasibilities, phase 2 the objective.
      bool phase1 = false;
      for (std::size_t i = 0; i < m_; ++i) {
        const std::size_t b = head_[i];
        double c = cost_[b];
        if (below(b)) c = -1.0;
        else if (above(b)) c = 1.0;
        else c = 0.0;
        if (c != 0.0) phase1 = true;
        y[static_cast<Eigen::Index>(i)] = c;
      }
      if (!phase1)
        for (std::size_t i = 0; i < m_; ++i) y[static_cast<Eigen::Index>(i)] = cost_[head_[i]];
      btran(y);

      std::size_t q = total;
      double dir = 0.0, best = 0.0;
      for (std::size_t j = 0; j < total; ++j) {
        if (pos_[j] >= 0 || lb_[j] == ub_[j]) continue;
        const double d = (phase1 ? 0.0 : cost_[j]) - dot_column(y, j);
        double score = 0.0, s = 0.0;
        if (d < -opt_.optimality_tol && x_[j] < ub_[j]) {
          score = -d;
          s = 1.0;
        } else if (d > opt_.optimality_tol && x_[j] > lb_[j]) {
          score = d;
          s = -1.0;
        } else {
          continue;
        }
        if (bland) {
          q = j;
          dir = s;
          break;
        }
        if (score > best) {
          best = score;
          q = j;
          dir = s;
        }
      }
      if (q == total) return phase1 ? SolveStatus::Infeasible : SolveStatus::Optimal;

      ftran(q, alpha);

      // Basic i changes at rate -dir * alpha_i. Feasible basics stop at the
      // bound they approach; infeasible ones stop where they become feasible.
      auto row_limit = [&](std::size_t i, double* target) {
        const double rate = -dir * alpha[static_cast<Eigen::Index>(i)];
        const std::size_t b = head_[i];
        if (below(b)) {
          if (rate <= 0.0) return kInf;
          *target = lb_[b];
          return (lb_[b] - x_[b]) / rate;
        }
        if (above(b)) {
          if (rate >= 0.0) return kInf;
          *target = ub_[b];
          return (x_[b] - ub_[b]) / -rate;
        }
        if (rate < 0.0) {
          *target = lb_[b];
          return std::isfinite(lb_[b]) ? std::max(0.0, (x_[b] - lb_[b]) / -rate) : kInf;
        }
        *target = ub_[b];
        return std::isfinite(ub_[b]) ? std::max(0.0, (ub_[b] - x_[b]) / rate) : kInf;
      };
      double theta_rows = kInf, target = 0.0;
      for (std::size_t i = 0; i < m_; ++i)
        if (std::abs(alpha[static_cast<Eigen::Index>(i)]) > opt_.pivot_tol)
          theta_rows = std::min(theta_rows, row_limit(i, &target));
      const double range = ub_[q] - lb_[q];
      if (!std::isfinite(theta_rows) && !std::isfinite(range)) {
        if (phase1) throw NumericalError("unbounded ray during phase 1");
        return SolveStatus::Unbounded;
      }
      const bool flip = range <= theta_rows;
      const double theta = flip ? range : theta_rows;

      // Leaving row among ties: largest |alpha| (Dantzig) or lowest variable index (Bland).
      long r = -1;
      double leave_at = 0.0;
      if (!flip) {
        const double tie = theta + 1e-12 * (1.0 + theta);
        for (std::size_t i = 0; i < m_; ++i) {
          const double a = std::abs(alpha[static_cast<Eigen::Index>(i)]);
          if (a <= opt_.pivot_tol) continue;
          double t = 0.0;
          if (row_limit(i, &t) > tie) continue;
          bool take = r < 0;
          if (!take) {
            const auto cur = static_cast<std::size_t>(r);
            take = bland ? head_[i] < head_[cur] : a > std::abs(alpha[static_cast<Eigen::Index>(cur)]);
          }
          if (take) {
            r = static_cast<long>(i);
            leave_at = t;
          }
        }
      }

      ++iterations;
      if (theta <= 1e-12) {
        if (++degenerate_run >= opt_.degenerate_before_bland) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }

      for (std::size_t i = 0; i < m_; ++i) {
        const double a = alpha[static_cast<Eigen::Index>(i)];
        if (a != 0.0) x_[head_[i]] -= dir * theta * a;
      }
      if (flip) {
        x_[q] = dir > 0 ? ub_[q] : lb_[q];
        continue;
      }

      const auto rr = static_cast<std::size_t>(r);
      const std::size_t leaving = head_[rr];
      x_[leaving] = leave_at;
      x_[q] += dir * theta;
      pos_[leaving] = -1;
      head_[rr] = q;
      pos_[q] = r;

      Eta e{rr, alpha[static_cast<Eigen::Index>(rr)], {}, {}};
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = alpha[static_cast<Eigen::Index>(i)];
        if (i != rr && a != 0.0) {
          e.index.push_back(i);
          e.value.push_back(a);
        }
      }
      etas_.push_back(std::move(e));
    }
  }

  const LinearProgram& lp_;
  SimplexOptions opt_;
  std::size_t m_, n_;
  std::vector<std::size_t> cstart_, crow_;
  std::vector<double> cval_;
  std::vector<double> lb_, ub_, x_, cost_;
  std::vector<std::size_t> head_;
  std::vector<long> pos_;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
};

/// LP relaxation with the program's own bounds or overrides.
inline LpResult solve_lp(const LinearProgram& lp, SimplexOptions opt = {}) {
  Simplex s(lp, lp.lower, lp.upper, opt);
  return s.solve();
}

inline LpResult solve_lp(const LinearProgram& lp, const std::vector<double>& lower,
                         const std::vector<double>& upper, SimplexOptions opt = {}) {
  Simplex s(lp, lower, upper, opt);
  return s.solve();
}

}  // namespace amod::opt

#pragma once

#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "amod/opt/branch_bound.hpp"
#include "amod/opt/linear_program.hpp"

// LP text format (the CPLEX-style subset read and written here):
//
//   Minimize
//    obj: 2.5 xr_0_1_0 + 10 s_0_1_0
//   Subject To
//    imb_0_1_0: w_0_1_0 - xc_0_1_0 - s_0_1_0 = 0
//   Bounds
//    0 <= xr_0_0_0 <= 0
//    -inf <= z <= +inf
//   General
//    xr_0_1_0 s_0_1_0
//   End
//
// One objective or constraint per line. The objective lists every variable,
// zero costs included, so reading keeps the column order; every variable also
// gets a bounds line.
// Solution files hold one `name value` pair per line; `#` starts a comment and
// variables not listed are 0.

namespace amod::opt {

namespace detail {

inline std::string lp_number(double v) {
  if (v == kInf) return "+inf";
  if (v == -kInf) return "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& tok, int line) {
  if (tok == "+inf" || tok == "inf" || tok == "+infinity" || tok == "infinity") return kInf;
  if (tok == "-inf" || tok == "-infinity") return -kInf;
  double v = 0.0;
  const char* b = tok.data();
  if (!tok.empty() && tok[0] == '+') ++b;
  const auto res = std::from_chars(b, tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw InvalidInput("line " + std::to_string(line) + ": bad number '" + tok + "'");
  return v;
}

inline void write_terms(std::ostream& os, const std::vector<std::size_t>& idx, const std::vector<double>& coef,
                        const std::vector<std::string>& names, bool keep_zero = false) {
  bool first = true;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (coef[k] == 0.0 && !keep_zero) continue;
    const double c = coef[k];
    os << (c < 0 ? (first ? "-" : " -") : (first ? "" : " +"));
    const double a = std::abs(c);
    if (!first || c < 0) os << ' ';
    if (a != 1.0) os << lp_number(a) << ' ';
    os << names[idx[k]];
    first = false;
  }
  if (first) os << "0 " << (names.empty() ? "x" : names.front());
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

}  // namespace detail

inline void write_lp(std::ostream& os, const LinearProgram& lp) {
  lp.validate();
  os.precision(17);
  os << "Minimize\n obj: ";
  std::vector<std::size_t> all(lp.num_vars());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  detail::write_terms(os, all, lp.cost, lp.names, true);
  os << "\nSubject To\n";
  for (const auto& r : lp.rows) {
    os << ' ' << r.name << ": ";
    detail::write_terms(os, r.index, r.coef, lp.names);
    os << (r.sense == RowSense::LessEqual ? " <= " : r.sense == RowSense::GreaterEqual ? " >= " : " = ")
       << detail::lp_number(r.rhs) << '\n';
  }
  os << "Bounds\n";
  for (std::size_t j = 0; j < lp.num_vars(); ++j)
    os << ' ' << detail::lp_number(lp.lower[j]) << " <= " << lp.names[j] << " <= " << detail::lp_number(lp.upper[j])
       << '\n';
  os << "General\n";
  for (std::size_t j = 0; j < lp.num_vars(); ++j)
    if (lp.integer[j]) os << ' ' << lp.names[j] << '\n';
  os << "End\n";
}

/// Reads the subset written by write_lp. Variables are declared in order of
/// first appearance.
inline LinearProgram read_lp(std::istream& is) {
  LinearProgram lp;
  std::map<std::string, std::size_t> ids;
  const auto var = [&](const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    const std::size_t j = lp.add_var(name, 0.0, 0.0, kInf, false);
    ids.emplace(name, j);
    return j;
  };
  // Parses "[name:] terms [sense rhs]".
  const auto parse_expr = [&](const std::vector<std::string>& tok, std::size_t from, std::size_t to, int line,
                              std::vector<std::size_t>& idx, std::vector<double>& coef) {
    double sign = 1.0, mult = 1.0;
    bool have_mult = false;
    for (std::size_t t = from; t < to; ++t) {
      const std::string& s = tok[t];
      if (s == "+") continue;
      if (s == "-") {
        sign = -sign;
        continue;
      }
      const char c = s[0];
      if ((c >= '0' && c <= '9') || c == '.' || ((c == '-' || c == '+') && s.size() > 1 && (std::isdigit(s[1]) || s[1] == '.'))) {
        mult = detail::parse_number(s, line);
        have_mult = true;
        continue;
      }
      idx.push_back(var(s));
      coef.push_back(sign * (have_mult ? mult : 1.0));
      sign = 1.0;
      mult = 1.0;
      have_mult = false;
    }
    if (have_mult) throw InvalidInput("line " + std::to_string(line) + ": dangling coefficient");
  };

  enum class Section { None, Objective, Rows, Bounds, General, Done } sec = Section::None;
  std::string text;
  int line = 0;
  bool saw_end = false;
  while (std::getline(is, text)) {
    ++line;
    if (auto p = text.find('\\'); p != std::string::npos) text.resize(p);
    auto tok = detail::split_ws(text);
    if (tok.empty()) continue;
    std::string head = tok[0];
    for (auto& ch : head) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (head == "minimize" || head == "minimise" || head == "min") {
      sec = Section::Objective;
      continue;
    }
    if (head == "subject" || head == "st" || head == "s.t.") {
      sec = Section::Rows;
      continue;
    }
    if (head == "bounds") {
      sec = Section::Bounds;
      continue;
    }
    if (head == "general" || head == "generals" || head == "integer" || head == "integers") {
      sec = Section::General;
      continue;
    }
    if (head == "end") {
      saw_end = true;
      sec = Section::Done;
      break;
    }
    switch (sec) {
      case Section::Objective: {
        std::size_t from = tok[0].back() == ':' ? 1 : 0;
        std::vector<std::size_t> idx;
        std::vector<double> coef;
        parse_expr(tok, from, tok.size(), line, idx, coef);
        for (std::size_t k = 0; k < idx.size(); ++k) lp.cost[idx[k]] += coef[k];
        break;
      }
      case Section::Rows: {
        if (tok[0].back() != ':' || tok.size() < 4)
          throw InvalidInput("line " + std::to_string(line) + ": constraint needs 'name: terms sense rhs'");
        Row r;
        r.name = tok[0].substr(0, tok[0].size() - 1);
        const std::string& sense = tok[tok.size() - 2];
        if (sense == "<=" || sense == "=<") r.sense = RowSense::LessEqual;
        else if (sense == ">=" || sense == "=>") r.sense = RowSense::GreaterEqual;
        else if (sense == "=") r.sense = RowSense::Equal;
        else throw InvalidInput("line " + std::to_string(line) + ": unknown sense '" + sense + "'");
        r.rhs = detail::parse_number(tok.back(), line);
        parse_expr(tok, 1, tok.size() - 2, line, r.index, r.coef);
        lp.add_row(std::move(r));
        break;
      }
      case Section::Bounds: {
        if (tok.size() == 2 && (tok[1] == "free" || tok[1] == "Free")) {
          const std::size_t j = var(tok[0]);
          lp.lower[j] = -kInf;
          lp.upper[j] = kInf;
        } else if (tok.size() == 5 && tok[1] == "<=" && tok[3] == "<=") {
          const std::size_t j = var(tok[2]);
          lp.lower[j] = detail::parse_number(tok[0], line);
          lp.upper[j] = detail::parse_number(tok[4], line);
        } else if (tok.size() == 3 && (tok[1] == "<=" || tok[1] == ">=" || tok[1] == "=")) {
          const std::size_t j = var(tok[0]);
          const double v = detail::parse_number(tok[2], line);
          if (tok[1] == "<=") lp.upper[j] = v;
          else if (tok[1] == ">=") lp.lower[j] = v;
          else lp.lower[j] = lp.upper[j] = v;
        } else {
          throw InvalidInput("line " + std::to_string(line) + ": unsupported bound");
        }
        break;
      }
      case Section::General:
        for (const auto& name : tok) lp.integer[var(name)] = 1;
        break;
      default:
        throw InvalidInput("line " + std::to_string(line) + ": text outside any section");
    }
  }
  if (!saw_end) throw InvalidInput("LP file has no End");
  lp.validate();
  return lp;
}

inline void write_solution(std::ostream& os, const LinearProgram& lp, const std::vector<double>& x) {
  for (std::size_t j = 0; j < lp.num_vars(); ++j) os << lp.names[j] << ' ' << detail::lp_number(x[j]) << '\n';
}

inline std::vector<double> read_solution(std::istream& is, const LinearProgram& lp) {
  std::map<std::string, std::size_t> ids;
  for (std::size_t j = 0; j < lp.num_vars(); ++j) ids.emplace(lp.names[j], j);
  std::vector<double> x(lp.num_vars(), 0.0);
  std::string text;
  int line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (auto p = text.find('#'); p != std::string::npos) text.resize(p);
    const auto tok = detail::split_ws(text);
    if (tok.empty()) continue;
    if (tok.size() != 2) throw InvalidInput("solution line " + std::to_string(line) + ": expected 'name value'");
    const auto it = ids.find(tok[0]);
    if (it == ids.end()) throw InvalidInput("solution line " + std::to_string(line) + ": unknown variable " + tok[0]);
    x[it->second] = detail::parse_number(tok[1], line);
  }
  return x;
}

/// Runs an external solver through the LP text format. `command` may use
/// {lp} and {sol} for the problem and solution paths; the solver must exit
/// with status 0 after writing a solution file.
class ExternalSolverBackend final : public IlpBackend {
 public:
  explicit ExternalSolverBackend(std::string command) : command_(std::move(command)) {}

  IlpSolution solve(const LinearProgram& lp, const SolverConfig&) const override {
    namespace fs = std::filesystem;
    static std::atomic<unsigned long> counter{0};
    const fs::path dir = fs::temp_directory_path();
    const std::string stem = "amod-lp-" + std::to_string(static_cast<unsigned long>(::getpid())) + "-" +
                             std::to_string(counter.fetch_add(1));
    const fs::path lp_path = dir / (stem + ".lp"), sol_path = dir / (stem + ".sol");
    {
      std::ofstream os(lp_path);
      if (!os) throw IoError("cannot write " + lp_path.string());
      write_lp(os, lp);
    }
    std::string cmd = command_;
    replace_all(cmd, "{lp}", lp_path.string());
    replace_all(cmd, "{sol}", sol_path.string());
    const auto start = Clock::now();
    const int rc = std::system(cmd.c_str());
    IlpSolution out;
    out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    std::error_code ec;
    fs::remove(lp_path, ec);
    if (rc != 0) {
      fs::remove(sol_path, ec);
      throw SolverError("external solver exited with status " + std::to_string(rc));
    }
    std::ifstream is(sol_path);
    if (!is) throw IoError("external solver wrote no solution file");
    out.x = read_solution(is, lp);
    is.close();
    fs::remove(sol_path, ec);
    if (lp.max_violation(out.x) > 1e-6) throw SolverError("external solution violates the problem");
    out.objective = lp.objective(out.x);
    out.lp_bound = out.objective;
    out.status = SolveStatus::Optimal;
    return out;
  }

 private:
  static void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size()))
      s.replace(p, from.size(), to);
  }

  std::string command_;
};

}  // namespace amod::opt

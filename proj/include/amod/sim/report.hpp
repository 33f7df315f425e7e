#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "amod/common.hpp"
#include "amod/sim/simulator.hpp"

namespace amod::sim {

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population standard deviation
  double max = 0.0;
};

/// Empty input gives an all-zero summary.
inline Summary summarize(std::vector<double> v) {
  Summary s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  const std::size_t h = v.size() / 2;
  s.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  s.max = v.back();
  return s;
}

inline double mean_wait(const SimMetrics& m) { return summarize(m.waits).mean; }
inline double median_wait(const SimMetrics& m) { return summarize(m.waits).median; }

/// One labelled metrics record (a run, or a sweep point keyed by its axis value).
struct ReportRow {
  std::string label;
  SimMetrics metrics;
};

enum class ReportFormat { Table, Csv, Json };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "table") return ReportFormat::Table;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw InvalidInput("unknown report format `" + std::string(s) + "` (table, csv, json)");
}

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double km(std::int64_t mm) { return static_cast<double>(mm) / 1e6; }

}  // namespace detail

/// Stable CSV columns, in order:
///   label, controller, epsilon, fleet, requests, served, unserved,
///   served_fraction, mean_wait_s, median_wait_s, total_km, customer_km,
///   rebalance_km, pickup_km, solves, limited_solves
/// Solver wall times are machine dependent and left out so equal runs give
/// byte-identical files; the table and JSON forms carry them.
inline void write_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  using detail::km;
  using detail::shortest;
  os << "label,controller,epsilon,fleet,requests,served,unserved,served_fraction,mean_wait_s,median_wait_s,"
        "total_km,customer_km,rebalance_km,pickup_km,solves,limited_solves\n";
  for (const auto& r : rows) {
    const SimMetrics& m = r.metrics;
    const Summary w = summarize(m.waits);
    os << r.label << ',' << m.controller << ',' << shortest(m.epsilon) << ',' << m.fleet_size << ','
       << m.total_requests << ',' << m.served << ',' << m.unserved << ',' << shortest(m.served_fraction()) << ','
       << shortest(w.mean) << ',' << shortest(w.median) << ',' << shortest(km(m.total_mm())) << ','
       << shortest(km(m.customer_mm())) << ',' << shortest(km(m.rebalance_mm())) << ','
       << shortest(km(m.pickup_mm())) << ',' << m.solves << ',' << m.limited_solves << '\n';
  }
}

inline void write_table(std::ostream& os, const std::vector<ReportRow>& rows) {
  using detail::km;
  char line[512];
  std::snprintf(line, sizeof line, "%-10s %-7s %6s %6s %8s %7s %9s %9s %10s %10s %10s %10s %8s %8s %8s %8s\n", "label",
                "ctrl", "eps", "fleet", "requests", "served", "mean_w_s", "med_w_s", "total_km", "cust_km", "rebal_km",
                "pick_km", "solve_mu", "solve_md", "solve_sd", "solve_mx");
  os << line;
  for (const auto& r : rows) {
    const SimMetrics& m = r.metrics;
    const Summary w = summarize(m.waits), t = summarize(m.solver_seconds);
    std::snprintf(line, sizeof line,
                  "%-10s %-7s %6.3g %6d %8zu %6.1f%% %9.1f %9.1f %10.1f %10.1f %10.1f %10.1f %8.3f %8.3f %8.3f %8.3f\n",
                  r.label.c_str(), m.controller.c_str(), m.epsilon, m.fleet_size, m.total_requests,
                  100.0 * m.served_fraction(), w.mean, w.median, km(m.total_mm()), km(m.customer_mm()),
                  km(m.rebalance_mm()), km(m.pickup_mm()), t.mean, t.median, t.std, t.max);
    os << line;
  }
}

inline nlohmann::json summary_json(const Summary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"std", s.std}, {"max", s.max}};
}

/// Full record: summary figures plus per-request waits and per-vehicle ledgers.
inline nlohmann::json to_json(const SimMetrics& m) {
  nlohmann::json j;
  j["controller"] = m.controller;
  j["epsilon"] = m.epsilon;
  j["fleet_size"] = m.fleet_size;
  j["requests"] = m.total_requests;
  j["served"] = m.served;
  j["unserved"] = m.unserved;
  j["served_fraction"] = m.served_fraction();
  j["wait_seconds"] = summary_json(summarize(m.waits));
  j["distance_km"] = {{"total", detail::km(m.total_mm())},
                      {"customer", detail::km(m.customer_mm())},
                      {"rebalance", detail::km(m.rebalance_mm())},
                      {"pickup", detail::km(m.pickup_mm())}};
  j["solver_seconds"] = summary_json(summarize(m.solver_seconds));
  j["solves"] = m.solves;
  j["limited_solves"] = m.limited_solves;
  j["waits"] = m.waits;
  j["solver_times"] = m.solver_seconds;
  nlohmann::json v = nlohmann::json::array();
  for (const auto& l : m.vehicles) v.push_back({l.customer_mm, l.rebalance_mm, l.pickup_mm, l.total_mm});
  j["vehicles_mm"] = std::move(v);  // [customer, rebalance, pickup, total] per vehicle
  return j;
}

inline SimMetrics metrics_from_json(const nlohmann::json& j) {
  try {
    SimMetrics m;
    m.controller = j.at("controller").get<std::string>();
    m.epsilon = j.at("epsilon").get<double>();
    m.fleet_size = j.at("fleet_size").get<int>();
    m.total_requests = j.at("requests").get<std::size_t>();
    m.served = j.at("served").get<std::size_t>();
    m.unserved = j.at("unserved").get<std::size_t>();
    m.solves = j.at("solves").get<std::size_t>();
    m.limited_solves = j.at("limited_solves").get<std::size_t>();
    m.waits = j.at("waits").get<std::vector<double>>();
    m.solver_seconds = j.at("solver_times").get<std::vector<double>>();
    for (const auto& v : j.at("vehicles_mm")) {
      const auto a = v.get<std::vector<std::int64_t>>();
      if (a.size() != 4) throw InvalidInput("vehicle ledger needs 4 entries");
      m.vehicles.push_back({a[0], a[1], a[2], a[3]});
    }
    if (m.waits.size() != m.served || m.served + m.unserved != m.total_requests)
      throw InvalidInput("metrics counts are inconsistent");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed metrics record: ") + e.what());
  }
}

inline nlohmann::json rows_json(const std::vector<ReportRow>& rows) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = to_json(r.metrics);
    j["label"] = r.label;
    a.push_back(std::move(j));
  }
  return a;
}

/// Reads what `rows_json` (or a single `to_json` record) wrote.
inline std::vector<ReportRow> rows_from_json(const nlohmann::json& j) {
  std::vector<ReportRow> rows;
  const auto one = [&](const nlohmann::json& r) {
    rows.push_back({r.contains("label") ? r.at("label").get<std::string>() : std::string("run"), metrics_from_json(r)});
  };
  if (j.is_array())
    for (const auto& r : j) one(r);
  else
    one(j);
  return rows;
}

inline void report(std::ostream& os, const std::vector<ReportRow>& rows, ReportFormat f) {
  switch (f) {
    case ReportFormat::Table: write_table(os, rows); break;
    case ReportFormat::Csv: write_csv(os, rows); break;
    case ReportFormat::Json: os << rows_json(rows).dump(2) << '\n'; break;
  }
}

inline void report_to_file(const std::string& path, const std::vector<ReportRow>& rows, ReportFormat f) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  report(os, rows, f);
  os.flush();
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<ReportRow> load_rows(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
  return rows_from_json(j);
}

}  // namespace amod::sim

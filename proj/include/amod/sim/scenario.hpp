#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "amod/common.hpp"
#include "amod/kmeans.hpp"
#include "amod/network.hpp"
#include "amod/sim/synth.hpp"
#include "amod/sim/trips.hpp"

namespace amod::sim {

/// Everything a simulation run consumes besides the controller settings.
/// `history` precedes the simulated window and feeds training and initial
/// placement; `requests` are replayed during [start, end].
struct Scenario {
  StationNetwork network;
  double speed_mps = 8.33;
  double start_seconds = 0.0;
  double end_seconds = 0.0;
  BoundingBox area;
  int fleet_size = 0;
  std::vector<int> placement;  // idle vehicles per station at start
  std::vector<Request> history;
  std::vector<Request> requests;

  void validate() const {
    const std::size_t n = network.size();
    if (n == 0) throw InvalidInput("scenario has no stations");
    if (!(speed_mps > 0.0) || !std::isfinite(speed_mps)) throw InvalidInput("speed must be positive");
    if (!(end_seconds > start_seconds)) throw InvalidInput("scenario end must follow its start");
    if (fleet_size < 0) throw InvalidInput("fleet size must be >= 0");
    if (placement.size() != n) throw InvalidInput("placement needs one count per station");
    long sum = 0;
    for (int p : placement) {
      if (p < 0) throw InvalidInput("placement counts must be >= 0");
      sum += p;
    }
    if (sum != fleet_size) throw InvalidInput("placement must add up to the fleet size");
    auto check = [&](const std::vector<Request>& rs, bool hist) {
      for (std::size_t r = 0; r < rs.size(); ++r) {
        const Request& q = rs[r];
        if (r > 0 && q.time < rs[r - 1].time) throw InvalidInput("requests must be sorted by time");
        if (!std::isfinite(q.time)) throw InvalidInput("request time must be finite");
        if (hist ? !(q.time < start_seconds) : (q.time < start_seconds || q.time > end_seconds))
          throw InvalidInput(hist ? "history request at or after the start" : "request outside [start, end]");
        if (!area.contains(q.origin) || !area.contains(q.destination))
          throw InvalidInput("request endpoint outside the operation area");
      }
    };
    check(history, true);
    check(requests, false);
  }
};

/// Splits `total` proportionally to `weights` by largest remainder (lowest
/// index first on equal remainders). All-zero weights split evenly.
inline std::vector<int> largest_remainder(const std::vector<double>& weights, int total) {
  const std::size_t n = weights.size();
  std::vector<int> out(n, 0);
  if (n == 0 || total <= 0) return out;
  double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> w = weights;
  if (!(sum > 0.0)) {
    w.assign(n, 1.0);
    sum = static_cast<double>(n);
  }
  std::vector<std::pair<double, std::size_t>> rem;
  int given = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = static_cast<double>(total) * w[i] / sum;
    out[i] = static_cast<int>(std::floor(share));
    given += out[i];
    rem.push_back({share - out[i], i});
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; given < total; ++r, ++given) ++out[rem[r % n].second];
  return out;
}

/// Initial placement proportional to request origins per station over the
/// last `window_days` of history.
inline std::vector<int> placement_by_frequency(const std::vector<Request>& history, const StationNetwork& net,
                                               int fleet, double start_seconds, double window_days) {
  std::vector<double> freq(net.size(), 0.0);
  for (const auto& r : history)
    if (r.time >= start_seconds - window_days * 86400.0) freq[assign_station(r.origin, net)] += 1.0;
  return largest_remainder(freq, fleet);
}

struct ScenarioOptions {
  double speed_mps = 8.33;
  double step_seconds = 900.0;
  int fleet_size = 300;
  double placement_window_days = 5.0;
};

/// Stations from k-means on the history's request origins, Euclidean travel
/// tables at constant speed, frequency-proportional placement.
inline Scenario partition_scenario(std::vector<Request> history, std::vector<Request> requests, std::size_t n_stations,
                                   double start_seconds, double end_seconds, std::uint64_t seed,
                                   const ScenarioOptions& opt = {}, std::optional<BoundingBox> area = std::nullopt) {
  if (history.empty()) throw InvalidInput("partitioning needs history requests");
  sort_by_time(history);
  sort_by_time(requests);
  std::vector<GeoPoint> origins;
  origins.reserve(history.size());
  for (const auto& r : history) origins.push_back(r.origin);
  KMeansResult km = kmeans_partition(origins, n_stations, seed);
  Scenario s;
  s.network = build_travel_matrices(km.centroids, opt.speed_mps, opt.step_seconds);
  s.speed_mps = opt.speed_mps;
  s.start_seconds = start_seconds;
  s.end_seconds = end_seconds;
  if (area) {
    s.area = *area;
  } else {
    std::vector<GeoPoint> pts;
    for (const auto* rs : {&history, &requests})
      for (const auto& r : *rs) {
        pts.push_back(r.origin);
        pts.push_back(r.destination);
      }
    s.area = BoundingBox::around(pts);
  }
  s.fleet_size = opt.fleet_size;
  s.placement = placement_by_frequency(history, s.network, opt.fleet_size, start_seconds, opt.placement_window_days);
  s.history = std::move(history);
  s.requests = std::move(requests);
  s.validate();
  return s;
}

/// The seeded synthetic benchmark: five history days plus one simulated
/// day of `benchmark_demand`, ten stations.
inline Scenario benchmark_scenario(std::uint64_t seed, int fleet_size = 300) {
  constexpr int kHistoryDays = 5;
  const SynthResult syn = synth_demand(benchmark_demand(kHistoryDays + 1, seed));
  const double start = kHistoryDays * 86400.0;
  std::vector<Request> hist, req;
  for (const auto& r : syn.requests) (r.time < start ? hist : req).push_back(r);
  ScenarioOptions opt;
  opt.fleet_size = fleet_size;
  return partition_scenario(std::move(hist), std::move(req), 10, start, start + 86400.0, seed, opt,
                            BoundingBox{0.0, 0.0, 10000.0, 10000.0});
}

/// Same scenario with another fleet size (placement recomputed).
inline Scenario with_fleet(Scenario s, int fleet_size, double window_days = 5.0) {
  s.fleet_size = fleet_size;
  s.placement = placement_by_frequency(s.history, s.network, fleet_size, s.start_seconds, window_days);
  return s;
}

// ---- text format -----------------------------------------------------------
//
//   amod-scenario 1
//   step_seconds <dt>
//   speed_mps <v>
//   window <start> <end>
//   area <min_x> <min_y> <max_x> <max_y>
//   fleet <count>
//   stations <N>            followed by N lines `<x> <y>`
//   placement <c_0> ... <c_N-1>
//   history <count>         followed by lines `<t> <o_x> <o_y> <d_x> <d_y>`
//   requests <count>        same line layout
//
// Travel tables are rebuilt from the centroids at the given speed. Numbers
// use the shortest round-trip decimal form.

namespace detail {

inline std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

inline void write_scenario(std::ostream& os, const Scenario& s) {
  using detail::num;
  os << "amod-scenario 1\n";
  os << "step_seconds " << num(s.network.step_seconds()) << '\n';
  os << "speed_mps " << num(s.speed_mps) << '\n';
  os << "window " << num(s.start_seconds) << ' ' << num(s.end_seconds) << '\n';
  os << "area " << num(s.area.min_x) << ' ' << num(s.area.min_y) << ' ' << num(s.area.max_x) << ' '
     << num(s.area.max_y) << '\n';
  os << "fleet " << s.fleet_size << '\n';
  os << "stations " << s.network.size() << '\n';
  for (const auto& c : s.network.centroids()) os << num(c.x) << ' ' << num(c.y) << '\n';
  os << "placement";
  for (int p : s.placement) os << ' ' << p;
  os << '\n';
  for (const auto* rs : {&s.history, &s.requests}) {
    os << (rs == &s.history ? "history " : "requests ") << rs->size() << '\n';
    for (const auto& r : *rs)
      os << num(r.time) << ' ' << num(r.origin.x) << ' ' << num(r.origin.y) << ' ' << num(r.destination.x) << ' '
         << num(r.destination.y) << '\n';
  }
}

inline Scenario read_scenario(std::istream& is, const std::string& source = "<stream>") {
  std::string line;
  std::size_t no = 0;
  auto fail = [&](const std::string& msg) -> InvalidInput {
    return InvalidInput(source + ":" + std::to_string(no) + ": " + msg);
  };
  auto next = [&](const char* key, std::size_t count) {
    while (std::getline(is, line)) {
      ++no;
      if (!detail::blank(line) && line.front() != '#') break;
      line.clear();
    }
    if (line.empty()) throw fail(std::string("missing `") + key + "`");
    const auto f = detail::split_fields(line, false);
    std::vector<double> v;
    std::size_t first = 0;
    if (key[0] != '\0') {
      if (f.empty() || f[0] != key) throw fail(std::string("expected `") + key + "`");
      first = 1;
    }
    if (count != static_cast<std::size_t>(-1) && f.size() - first != count)
      throw fail("expected " + std::to_string(count) + " values");
    for (std::size_t i = first; i < f.size(); ++i) {
      double x;
      if (!detail::to_double(f[i], x)) throw fail("not a number: " + std::string(f[i]));
      v.push_back(x);
    }
    line.clear();
    return v;
  };
  auto count_of = [&](double x) {
    if (!(x >= 0.0) || x != std::floor(x) || x > 1e9) throw fail("expected a non-negative integer");
    return static_cast<std::size_t>(x);
  };
  {
    std::getline(is, line);
    ++no;
    if (line.rfind("amod-scenario 1", 0) != 0) throw fail("not an amod-scenario 1 file");
    line.clear();
  }
  Scenario s;
  const double step = next("step_seconds", 1)[0];
  s.speed_mps = next("speed_mps", 1)[0];
  const auto win = next("window", 2);
  s.start_seconds = win[0];
  s.end_seconds = win[1];
  const auto a = next("area", 4);
  s.area = {a[0], a[1], a[2], a[3]};
  s.fleet_size = static_cast<int>(count_of(next("fleet", 1)[0]));
  const std::size_t n = count_of(next("stations", 1)[0]);
  std::vector<GeoPoint> c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = next("", 2);
    c.push_back({p[0], p[1]});
  }
  for (double p : next("placement", n)) s.placement.push_back(static_cast<int>(count_of(p)));
  for (auto* rs : {&s.history, &s.requests}) {
    const std::size_t m = count_of(next(rs == &s.history ? "history" : "requests", 1)[0]);
    rs->reserve(m);
    for (std::size_t r = 0; r < m; ++r) {
      const auto v = next("", 5);
      rs->push_back({v[0], {v[1], v[2]}, {v[3], v[4]}});
    }
  }
  try {
    s.network = build_travel_matrices(c, s.speed_mps, step);
    s.validate();
  } catch (const InvalidInput& e) {
    throw InvalidInput(source + ": " + e.what());
  }
  return s;
}

inline void save_scenario(const std::string& path, const Scenario& s) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  write_scenario(os, s);
  if (!os) throw IoError("write failed: " + path);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_scenario(is, path);
}

}  // namespace amod::sim

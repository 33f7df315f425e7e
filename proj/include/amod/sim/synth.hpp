#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "amod/common.hpp"
#include "amod/network.hpp"
#include "amod/sim/trips.hpp"

namespace amod::sim {

/// Rectangle sampled uniformly: center +- half extents.
struct Zone {
  GeoPoint center;
  double half_width = 0.0;
  double half_height = 0.0;
};

/// Rate active on [start_hour, end_hour) of every day; overlapping pieces add.
struct RatePiece {
  double start_hour = 0.0;
  double end_hour = 24.0;
  double per_hour = 0.0;
};

struct FlowSpec {
  Zone origin;
  Zone destination;
  std::vector<RatePiece> profile;
};

struct SynthSpec {
  std::vector<FlowSpec> flows;
  int days = 1;
  double start_seconds = 0.0;  // midnight of day 0
  std::uint64_t seed = 0;
};

/// Exact intensity of every flow, for oracle evaluation.
struct RateFunction {
  std::vector<FlowSpec> flows;
  double start_seconds = 0.0;
  double end_seconds = 0.0;

  /// Requests per hour of flow f at absolute time t (0 outside the span).
  double per_hour(std::size_t f, double t) const {
    if (t < start_seconds || t >= end_seconds) return 0.0;
    const double h = std::fmod((t - start_seconds) / 3600.0, 24.0);
    double r = 0.0;
    for (const auto& p : flows.at(f).profile)
      if (h >= p.start_hour && h < p.end_hour) r += p.per_hour;
    return r;
  }

  /// Expected number of requests of flow f in [t0, t1).
  double expected(std::size_t f, double t0, double t1) const {
    t0 = std::max(t0, start_seconds);
    t1 = std::min(t1, end_seconds);
    double total = 0.0;
    for (double day = std::floor((t0 - start_seconds) / 86400.0); start_seconds + day * 86400.0 < t1; day += 1.0) {
      const double base = start_seconds + day * 86400.0;
      for (const auto& p : flows.at(f).profile) {
        const double a = std::max(t0, base + p.start_hour * 3600.0);
        const double b = std::min(t1, base + p.end_hour * 3600.0);
        if (b > a) total += p.per_hour * (b - a) / 3600.0;
      }
    }
    return total;
  }
};

struct SynthResult {
  std::vector<Request> requests;       // sorted by time
  std::vector<std::size_t> flow_of;    // generating flow of each request
  RateFunction truth;
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Standard library distributions differ between implementations; these
// keep streams identical everywhere.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline GeoPoint sample_zone(const Zone& z, std::mt19937_64& rng) {
  const double u = uniform01(rng), v = uniform01(rng);
  return {z.center.x + (2.0 * u - 1.0) * z.half_width, z.center.y + (2.0 * v - 1.0) * z.half_height};
}

}  // namespace detail

inline void validate(const SynthSpec& s) {
  if (s.days < 0) throw InvalidInput("day count must be >= 0");
  if (!std::isfinite(s.start_seconds)) throw InvalidInput("start time must be finite");
  for (const auto& f : s.flows) {
    for (const Zone* z : {&f.origin, &f.destination})
      if (!(z->half_width >= 0.0) || !(z->half_height >= 0.0) || !std::isfinite(z->half_width) ||
          !std::isfinite(z->half_height) || !std::isfinite(z->center.x) || !std::isfinite(z->center.y))
        throw InvalidInput("zone extents must be finite and >= 0");
    for (const auto& p : f.profile)
      if (!(p.per_hour >= 0.0) || !std::isfinite(p.per_hour) || !(p.start_hour >= 0.0) ||
          !(p.end_hour <= 24.0) || !(p.start_hour < p.end_hour))
        throw InvalidInput("rate pieces need 0 <= start < end <= 24 and a finite rate >= 0");
  }
}

/// Inhomogeneous Poisson sampling by thinning, one independent stream per
/// flow (seeded from the spec seed and the flow index).
inline SynthResult synth_demand(const SynthSpec& spec) {
  validate(spec);
  SynthResult res;
  res.truth = {spec.flows, spec.start_seconds, spec.start_seconds + 86400.0 * spec.days};
  struct Tagged {
    Request r;
    std::size_t flow;
  };
  std::vector<Tagged> all;
  for (std::size_t f = 0; f < spec.flows.size(); ++f) {
    double bound = 0.0;  // pieces may overlap: their sum bounds the rate
    for (const auto& p : spec.flows[f].profile) bound += p.per_hour;
    if (bound <= 0.0) continue;
    std::mt19937_64 rng(detail::splitmix(spec.seed ^ detail::splitmix(f + 1)));
    const double rate_s = bound / 3600.0;
    for (double t = spec.start_seconds;;) {
      t += -std::log1p(-detail::uniform01(rng)) / rate_s;
      if (t >= res.truth.end_seconds) break;
      const double accept = detail::uniform01(rng);
      if (accept * bound >= res.truth.per_hour(f, t)) continue;
      const GeoPoint o = detail::sample_zone(spec.flows[f].origin, rng);
      const GeoPoint d = detail::sample_zone(spec.flows[f].destination, rng);
      all.push_back({{t, o, d}, f});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) { return a.r.time < b.r.time; });
  for (auto& a : all) {
    res.requests.push_back(a.r);
    res.flow_of.push_back(a.flow);
  }
  return res;
}

/// The fixed benchmark city: a 10 km square with uniform background demand
/// and two commute corridors (morning outbound, evening return).
inline SynthSpec benchmark_demand(int days, std::uint64_t seed) {
  const Zone city{{5000.0, 5000.0}, 5000.0, 5000.0};
  const Zone home_a{{2000.0, 8000.0}, 1200.0, 1200.0}, work_a{{7500.0, 3000.0}, 1000.0, 1000.0};
  const Zone home_b{{2000.0, 2000.0}, 1200.0, 1200.0}, work_b{{8000.0, 8000.0}, 1000.0, 1000.0};
  SynthSpec s;
  s.days = days;
  s.seed = seed;
  s.flows.push_back({city, city, {{0, 6, 30}, {6, 22, 120}, {22, 24, 60}}});
  s.flows.push_back({home_a, work_a, {{7, 10, 240}}});
  s.flows.push_back({work_a, home_a, {{16, 19, 240}}});
  s.flows.push_back({home_b, work_b, {{7, 10, 180}}});
  s.flows.push_back({work_b, home_b, {{16, 19, 180}}});
  return s;
}

}  // namespace amod::sim

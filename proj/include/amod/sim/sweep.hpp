#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <string>
#include <vector>

#include "amod/common.hpp"
#include "amod/sim/report.hpp"
#include "amod/sim/simulator.hpp"

namespace amod::sim {

enum class SweepAxis { Epsilon, Fleet };

inline SweepAxis parse_axis(std::string_view s) {
  if (s == "epsilon") return SweepAxis::Epsilon;
  if (s == "fleet") return SweepAxis::Fleet;
  throw InvalidInput("unknown sweep axis `" + std::string(s) + "` (epsilon, fleet)");
}

struct SweepPoint {
  double value = 0.0;
  SimMetrics metrics;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::Epsilon;
  std::vector<SweepPoint> points;  // in the order of the requested values

  /// Rows keyed by axis value, ready for `report`.
  std::vector<ReportRow> rows() const {
    std::vector<ReportRow> out;
    for (const auto& p : points) out.push_back({detail::shortest(p.value), p.metrics});
    return out;
  }
};

/// Independent runs, one per axis value, on the same request stream. Up to
/// `threads` points run at once; forecast models are trained once and
/// shared. `observer(i)` may supply hooks for point i.
inline SweepResult sweep(SweepAxis axis, const std::vector<double>& values, const Scenario& sc, const RunConfig& cfg,
                         unsigned threads = 1, const std::function<SimObserver(std::size_t)>& observer = {}) {
  if (values.size() < 2) throw InvalidInput("a sweep needs at least two axis values");
  for (double v : values) {
    if (axis == SweepAxis::Epsilon && !(v > 0.0 && v < 1.0)) throw InvalidInput("epsilon values must lie in (0, 1)");
    if (axis == SweepAxis::Fleet && !(v >= 0.0 && v == std::floor(v) && v < 1e7))
      throw InvalidInput("fleet sizes must be non-negative integers");
  }
  ModelCache cache;
  SweepResult res;
  res.axis = axis;
  res.points.resize(values.size());
  const auto run_point = [&](std::size_t i) {
    RunConfig c = cfg;
    const Scenario* s = &sc;
    Scenario resized;
    if (axis == SweepAxis::Epsilon) {
      c.epsilon = values[i];
    } else {
      resized = with_fleet(sc, static_cast<int>(values[i]), cfg.training.window_days);
      s = &resized;
    }
    res.points[i] = {values[i], run_simulation(*s, c, observer ? observer(i) : SimObserver{}, &cache)};
  };
  const unsigned workers = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(values.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < values.size(); ++i) run_point(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < values.size(); i += workers) run_point(i);
      }));
    for (auto& j : jobs) j.get();
  }
  return res;
}

}  // namespace amod::sim

#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "amod/common.hpp"
#include "amod/gp/gp.hpp"

namespace amod::gp {

/// Request counts per (origin, destination) station pair and fixed-length
/// interval. Interval k covers [start + k*dt, start + (k+1)*dt).
struct DemandSeries {
  std::size_t stations = 0;
  double start_seconds = 0.0;
  double interval_seconds = 900.0;
  std::size_t intervals = 0;
  Tensor3<int> counts;  // (i, j, k)

  DemandSeries() = default;
  DemandSeries(std::size_t n, double start, double dt, std::size_t k)
      : stations(n), start_seconds(start), interval_seconds(dt), intervals(k), counts(n, k, 0) {}

  /// Interval index containing `t`, or -1 when outside the series.
  long interval_of(double t) const {
    if (t < start_seconds) return -1;
    const auto k = static_cast<long>(std::floor((t - start_seconds) / interval_seconds));
    return k < static_cast<long>(intervals) ? k : -1;
  }
};

/// Hyperparameters of one flow; either a GP or a constant (zero-variance) model.
struct FlowFit {
  bool is_gp = false;
  double constant = 0.0;
  KernelSpec kernel;
  double noise_variance = 0.0;
};

/// One trained model per ordered station pair, all conditioned on the same
/// training window. Immutable once built and safe to share across threads.
struct ForecastModelSet {
  std::size_t stations = 0;
  double window_start_seconds = 0.0;
  double window_end_seconds = 0.0;
  double interval_seconds = 900.0;
  std::vector<FlowFit> fits;                     // i * n + j
  std::vector<std::optional<TrainedGP>> models;  // conditioned posteriors, same layout

  const FlowFit& fit(std::size_t i, std::size_t j) const { return fits[i * stations + j]; }
};

struct FlowTrainingConfig {
  double window_days = 5.0;
  TrainConfig optimizer{60, 0.01, 1e-3, true, 13.8};
  double period_hours = 24.0;
  double lengthscale_hours = 3.0;
  // Second start: RBF lengthscale spanning the window, periodic lengthscale
  // 1. The higher likelihood of the two fits is kept.
  bool long_range_start = true;
  unsigned threads = 1;
};

/// Default initialization: RBF x Periodic, period 24 h, both lengthscales
/// 3 h, output scale = target variance, noise = 0.1 * variance.
inline KernelSpec default_kernel(double variance, const FlowTrainingConfig& cfg) {
  return KernelSpec::locally_periodic(cfg.lengthscale_hours, cfg.lengthscale_hours, cfg.period_hours,
                                      variance);
}

namespace detail {

// Training inputs are interval midpoints in hours since the window start.
inline GPTrainingSet flow_training_set(const DemandSeries& s, std::size_t i, std::size_t j,
                                       std::size_t k_begin, std::size_t k_end) {
  GPTrainingSet d;
  for (std::size_t k = k_begin; k < k_end; ++k) {
    d.inputs.push_back((static_cast<double>(k - k_begin) + 0.5) * s.interval_seconds / 3600.0);
    d.targets.push_back(static_cast<double>(s.counts(i, j, k)));
  }
  return d;
}

inline std::pair<std::size_t, std::size_t> window_range(const DemandSeries& s, double end_seconds,
                                                        double window_days) {
  const double begin_seconds = end_seconds - window_days * 86400.0;
  auto clampk = [&](double t) {
    const double k = std::round((t - s.start_seconds) / s.interval_seconds);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(s.intervals)));
  };
  return {clampk(begin_seconds), clampk(end_seconds)};
}

inline void condition_all(ForecastModelSet& m, const DemandSeries& s) {
  const auto [kb, ke] = window_range(s, m.window_end_seconds,
                                     (m.window_end_seconds - m.window_start_seconds) / 86400.0);
  m.models.assign(m.stations * m.stations, std::nullopt);
  for (std::size_t i = 0; i < m.stations; ++i)
    for (std::size_t j = 0; j < m.stations; ++j) {
      const FlowFit& f = m.fits[i * m.stations + j];
      if (!f.is_gp) continue;
      GPTrainingSet d = flow_training_set(s, i, j, kb, ke);
      d.noise_variance = f.noise_variance;
      m.models[i * m.stations + j] = condition(d, f.kernel, true);
    }
}

}  // namespace detail

/// Trains the N^2 flow models on the `window_days` preceding `end_seconds`.
/// Flows without variation in the window get a constant model (an all-zero
/// history yields mean 0, std 0). Independent flows train concurrently.
inline ForecastModelSet train_flow_models(const DemandSeries& s, double end_seconds,
                                          const FlowTrainingConfig& cfg = {}) {
  const auto [kb, ke] = detail::window_range(s, end_seconds, cfg.window_days);
  ForecastModelSet m;
  m.stations = s.stations;
  m.interval_seconds = s.interval_seconds;
  m.window_start_seconds = s.start_seconds + static_cast<double>(kb) * s.interval_seconds;
  m.window_end_seconds = s.start_seconds + static_cast<double>(ke) * s.interval_seconds;
  const std::size_t n2 = s.stations * s.stations;
  m.fits.assign(n2, FlowFit{});
  m.models.assign(n2, std::nullopt);

  auto work = [&](std::size_t flow) {
    const std::size_t i = flow / s.stations, j = flow % s.stations;
    GPTrainingSet d = detail::flow_training_set(s, i, j, kb, ke);
    FlowFit& fit = m.fits[flow];
    if (d.inputs.empty()) return;
    double mean = 0.0, var = 0.0;
    for (double y : d.targets) mean += y;
    mean /= static_cast<double>(d.targets.size());
    for (double y : d.targets) var += (y - mean) * (y - mean);
    var /= static_cast<double>(d.targets.size());
    if (var <= 0.0) {
      fit.constant = mean;
      return;
    }
    d.noise_variance = 0.1 * var;
    TrainResult r = train(d, default_kernel(var, cfg), cfg.optimizer);
    if (cfg.long_range_start) {
      const double span = static_cast<double>(ke - kb) * s.interval_seconds / 3600.0;
      TrainResult alt = train(d, KernelSpec::locally_periodic(span, 1.0, cfg.period_hours, var), cfg.optimizer);
      if (alt.lml_trace.back() > r.lml_trace.back()) r = std::move(alt);
    }
    fit.is_gp = true;
    fit.kernel = r.gp.kernel;
    fit.noise_variance = r.gp.noise_variance;
    m.models[flow] = std::move(r.gp);
  };

  const unsigned threads = std::max(1u, cfg.threads);
  if (threads == 1) {
    for (std::size_t f = 0; f < n2; ++f) work(f);
  } else {
    std::vector<std::future<void>> jobs;
    for (unsigned t = 0; t < threads; ++t)
      jobs.push_back(std::async(std::launch::async, [&, t] {
        for (std::size_t f = t; f < n2; f += threads) work(f);
      }));
    for (auto& j : jobs) j.get();
  }
  return m;
}

/// Predictive mean/std of every flow (i * n + j) at absolute time `t_seconds`.
inline std::vector<Forecast> forecast_at(const ForecastModelSet& m, double t_seconds) {
  const double t_hours = (t_seconds - m.window_start_seconds) / 3600.0;
  std::vector<Forecast> out(m.stations * m.stations);
  for (std::size_t f = 0; f < out.size(); ++f) {
    const auto& model = m.models[f];
    out[f] = model ? predict(*model, t_hours) : Forecast{m.fits[f].constant, 0.0};
  }
  return out;
}

/// Predictive mean/std for every flow at each horizon slot. Slot k >= 1
/// covers [t0 + (k-1)dt, t0 + k dt); slot 0 is the interval just before t0.
/// Models are evaluated at slot midpoints.
inline Tensor3<Forecast> forecast_demand(const ForecastModelSet& m, double t0_seconds,
                                         double step_seconds, int horizon) {
  Tensor3<Forecast> out(m.stations, static_cast<std::size_t>(horizon) + 1);
  for (int k = 0; k <= horizon; ++k) {
    const auto slot = forecast_at(m, t0_seconds + (static_cast<double>(k) - 0.5) * step_seconds);
    for (std::size_t i = 0; i < m.stations; ++i)
      for (std::size_t j = 0; j < m.stations; ++j)
        out(i, j, static_cast<std::size_t>(k)) = slot[i * m.stations + j];
  }
  return out;
}

// ---- persistence -----------------------------------------------------------
//
//   amod-gp-models 1
//   stations <N>
//   interval_seconds <dt>
//   window <start_seconds> <end_seconds>
//   flow <i> <j> constant <mean>
//   flow <i> <j> gp <noise_variance> <kernel>
//
// <kernel> is prefix notation: `rbf <scale> <l>`, `periodic <scale> <l> <p>`,
// `product <scale> <kernel> <kernel>`. Numbers are plain decimal.

namespace detail {

inline std::string plain(double v) {
  char buf[512];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  return std::string(buf, r.ptr);
}

inline void write_kernel(std::ostream& os, const KernelSpec& k) {
  switch (k.kind) {
    case KernelKind::RBF:
      os << "rbf " << plain(k.output_scale) << ' ' << plain(k.lengthscale);
      break;
    case KernelKind::Periodic:
      os << "periodic " << plain(k.output_scale) << ' ' << plain(k.lengthscale) << ' '
         << plain(k.period);
      break;
    case KernelKind::Product:
      os << "product " << plain(k.output_scale) << ' ';
      write_kernel(os, k.children[0]);
      os << ' ';
      write_kernel(os, k.children[1]);
      break;
  }
}

inline KernelSpec read_kernel(std::istream& is) {
  std::string kind;
  KernelSpec k;
  if (!(is >> kind >> k.output_scale)) throw InvalidInput("truncated kernel description");
  if (kind == "rbf") {
    k.kind = KernelKind::RBF;
    is >> k.lengthscale;
  } else if (kind == "periodic") {
    k.kind = KernelKind::Periodic;
    is >> k.lengthscale >> k.period;
  } else if (kind == "product") {
    k.kind = KernelKind::Product;
    k.children.push_back(read_kernel(is));
    k.children.push_back(read_kernel(is));
  } else {
    throw InvalidInput("unknown kernel kind '" + kind + "'");
  }
  if (!is) throw InvalidInput("malformed kernel description");
  validate(k);
  return k;
}

}  // namespace detail

inline void write_models(std::ostream& os, const ForecastModelSet& m) {
  os << "amod-gp-models 1\n";
  os << "stations " << m.stations << '\n';
  os << "interval_seconds " << detail::plain(m.interval_seconds) << '\n';
  os << "window " << detail::plain(m.window_start_seconds) << ' '
     << detail::plain(m.window_end_seconds) << '\n';
  for (std::size_t i = 0; i < m.stations; ++i)
    for (std::size_t j = 0; j < m.stations; ++j) {
      const FlowFit& f = m.fit(i, j);
      os << "flow " << i << ' ' << j << ' ';
      if (f.is_gp) {
        os << "gp " << detail::plain(f.noise_variance) << ' ';
        detail::write_kernel(os, f.kernel);
      } else {
        os << "constant " << detail::plain(f.constant);
      }
      os << '\n';
    }
}

/// Reads hyperparameters written by write_models; the returned set has no
/// posteriors until `attach_history` conditions it on a demand series.
inline ForecastModelSet read_models(std::istream& is) {
  std::string line, key;
  ForecastModelSet m;
  int version = 0;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw InvalidInput("model file line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ls >> key;
    if (key == "amod-gp-models") {
      ls >> version;
    } else if (key == "stations") {
      ls >> m.stations;
      m.fits.assign(m.stations * m.stations, FlowFit{});
    } else if (key == "interval_seconds") {
      ls >> m.interval_seconds;
      if (ls && !(m.interval_seconds > 0.0)) fail("interval must be positive");
    } else if (key == "window") {
      ls >> m.window_start_seconds >> m.window_end_seconds;
      if (ls && !(m.window_end_seconds > m.window_start_seconds)) fail("empty window");
    } else if (key == "flow") {
      std::size_t i = 0, j = 0;
      std::string kind;
      ls >> i >> j >> kind;
      if (!ls || i >= m.stations || j >= m.stations) fail("bad flow index");
      FlowFit& f = m.fits[i * m.stations + j];
      if (kind == "constant") {
        ls >> f.constant;
      } else if (kind == "gp") {
        f.is_gp = true;
        ls >> f.noise_variance;
        f.kernel = detail::read_kernel(ls);
      } else {
        fail("unknown flow model '" + kind + "'");
      }
      if (!ls) fail("malformed flow entry");
    } else {
      fail("unknown key '" + key + "'");
    }
    if (!ls) fail("malformed value for '" + key + "'");
  }
  if (version != 1) throw InvalidInput("not an amod-gp-models v1 file");
  m.models.assign(m.stations * m.stations, std::nullopt);
  return m;
}

/// Conditions persisted hyperparameters on the history window they were fit to.
inline void attach_history(ForecastModelSet& m, const DemandSeries& s) {
  if (s.stations != m.stations) throw InvalidInput("model/series station count mismatch");
  detail::condition_all(m, s);
}

}  // namespace amod::gp

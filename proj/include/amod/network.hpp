#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "amod/common.hpp"

namespace amod {

/// Planar position in projected meters.
struct GeoPoint {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const GeoPoint&) const = default;
};

inline double squared_distance(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(const GeoPoint& a, const GeoPoint& b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

/// Axis-aligned extent of the operation area.
struct BoundingBox {
  double min_x = -std::numeric_limits<double>::infinity();
  double min_y = -std::numeric_limits<double>::infinity();
  double max_x = std::numeric_limits<double>::infinity();
  double max_y = std::numeric_limits<double>::infinity();

  bool contains(const GeoPoint& p) const noexcept {
    return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= min_x && p.x <= max_x &&
           p.y >= min_y && p.y <= max_y;
  }

  static BoundingBox around(std::span<const GeoPoint> pts, double margin = 0.0) {
    BoundingBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& p : pts) {
      b.min_x = std::min(b.min_x, p.x);
      b.min_y = std::min(b.min_y, p.y);
      b.max_x = std::max(b.max_x, p.x);
      b.max_y = std::max(b.max_y, p.y);
    }
    b.min_x -= margin;
    b.min_y -= margin;
    b.max_x += margin;
    b.max_y += margin;
    return b;
  }
};

/// Equirectangular projection of lon/lat degrees onto planar meters around a
/// reference point (normally the mean of the scenario's coordinates).
struct Projection {
  double lat0_deg = 0.0;
  double lon0_deg = 0.0;

  static constexpr double kEarthRadius = 6371008.8;

  GeoPoint project(double lon_deg, double lat_deg) const noexcept {
    constexpr double deg = std::numbers::pi / 180.0;
    return {kEarthRadius * (lon_deg - lon0_deg) * deg * std::cos(lat0_deg * deg),
            kEarthRadius * (lat_deg - lat0_deg) * deg};
  }
};

/// Discretized operation area: station centroids on a complete travel graph.
/// Immutable once constructed; `kappa` holds travel times in whole model steps.
class StationNetwork {
 public:
  StationNetwork() = default;

  /// Validates the tables and derives kappa. Throws InvalidInput when any
  /// invariant (zero diagonal, positive finite off-diagonal) is broken.
  StationNetwork(std::vector<GeoPoint> centroids, Grid<double> travel_time,
                 Grid<double> travel_distance, double step_seconds)
      : centroids_(std::move(centroids)),
        travel_time_(std::move(travel_time)),
        travel_distance_(std::move(travel_distance)),
        step_seconds_(step_seconds) {
    const std::size_t n = centroids_.size();
    if (n == 0) throw InvalidInput("station network needs at least one station");
    if (!(step_seconds_ > 0.0) || !std::isfinite(step_seconds_))
      throw InvalidInput("step length must be positive");
    if (travel_time_.rows() != n || travel_time_.cols() != n || travel_distance_.rows() != n ||
        travel_distance_.cols() != n)
      throw InvalidInput("travel matrices must be N x N");
    kappa_ = Grid<int>(n, n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double t = travel_time_(i, j);
        const double d = travel_distance_(i, j);
        if (!std::isfinite(t) || !std::isfinite(d))
          throw InvalidInput("travel matrices must be finite");
        if (i == j) {
          if (t != 0.0 || d != 0.0) throw InvalidInput("travel matrix diagonal must be zero");
          continue;
        }
        if (!(t > 0.0) || !(d > 0.0))
          throw InvalidInput("off-diagonal travel time and distance must be positive");
        kappa_(i, j) = std::max(1, static_cast<int>(std::lround(t / step_seconds_)));
      }
    }
  }

  std::size_t size() const noexcept { return centroids_.size(); }
  const std::vector<GeoPoint>& centroids() const noexcept { return centroids_; }
  const GeoPoint& centroid(std::size_t i) const { return centroids_.at(i); }
  const Grid<double>& travel_time() const noexcept { return travel_time_; }
  const Grid<double>& travel_distance() const noexcept { return travel_distance_; }
  const Grid<int>& kappa() const noexcept { return kappa_; }
  double step_seconds() const noexcept { return step_seconds_; }

 private:
  std::vector<GeoPoint> centroids_;
  Grid<double> travel_time_;
  Grid<double> travel_distance_;
  Grid<int> kappa_;
  double step_seconds_ = 0.0;
};

/// Euclidean travel tables at constant speed.
inline StationNetwork build_travel_matrices(const std::vector<GeoPoint>& centroids,
                                            double speed_mps, double step_seconds) {
  if (!(speed_mps > 0.0) || !std::isfinite(speed_mps))
    throw InvalidInput("speed must be positive");
  const std::size_t n = centroids.size();
  Grid<double> time(n, n, 0.0), dist(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      dist(i, j) = distance(centroids[i], centroids[j]);
      time(i, j) = dist(i, j) / speed_mps;
    }
  return StationNetwork(centroids, std::move(time), std::move(dist), step_seconds);
}

/// Nearest centroid, lowest index on ties.
inline std::size_t assign_station(const GeoPoint& p, std::span<const GeoPoint> centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    const double d = squared_distance(p, centroids[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline std::size_t assign_station(const GeoPoint& p, const StationNetwork& net) {
  return assign_station(p, std::span<const GeoPoint>(net.centroids()));
}

enum class TripPurpose { Customer, Rebalance };

struct InTransit {
  std::size_t destination = 0;
  int arrival_step = 1;  // model steps after t0, >= 1
  TripPurpose purpose = TripPurpose::Customer;
};

/// Snapshot of the fleet at the current decision time t0.
struct FleetState {
  std::vector<int> idle;               // phi_i(t0)
  std::vector<InTransit> in_transit;
  std::vector<GeoPoint> vehicle_positions;  // idle vehicles only

  int fleet_size() const {
    return std::accumulate(idle.begin(), idle.end(), 0) + static_cast<int>(in_transit.size());
  }

  /// Vehicles becoming available at station i on model step k (k = 0 is idle now).
  std::vector<std::vector<int>> availability(std::size_t n, int horizon) const {
    std::vector<std::vector<int>> phi(n, std::vector<int>(static_cast<std::size_t>(horizon) + 1, 0));
    for (std::size_t i = 0; i < n && i < idle.size(); ++i) phi[i][0] = idle[i];
    for (const auto& v : in_transit)
      if (v.arrival_step >= 1 && v.arrival_step <= horizon) ++phi[v.destination][v.arrival_step];
    return phi;
  }
};

/// lambda_ij(t0): requests currently waiting for a vehicle, by origin and destination station.
struct OutstandingDemand {
  Grid<int> waiting;
};

}  // namespace amod

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "amod/common.hpp"
#include "amod/network.hpp"

namespace amod {

struct KMeansResult {
  std::vector<GeoPoint> centroids;
  std::vector<std::size_t> labels;
  double sse = 0.0;
  int iterations = 0;
};

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::vector<GeoPoint> cluster_means(std::span<const GeoPoint> pts,
                                           const std::vector<std::size_t>& labels, std::size_t k,
                                           std::vector<std::size_t>& counts) {
  std::vector<GeoPoint> sums(k);
  counts.assign(k, 0);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    sums[labels[p]].x += pts[p].x;
    sums[labels[p]].y += pts[p].y;
    ++counts[labels[p]];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0) {
      sums[c].x /= static_cast<double>(counts[c]);
      sums[c].y /= static_cast<double>(counts[c]);
    }
  return sums;
}

inline double total_sse(std::span<const GeoPoint> pts, const std::vector<std::size_t>& labels,
                        const std::vector<GeoPoint>& centroids) {
  double s = 0.0;
  for (std::size_t p = 0; p < pts.size(); ++p) s += squared_distance(pts[p], centroids[labels[p]]);
  return s;
}

}  // namespace detail

/// k-means with k-means++ seeding, Lloyd iterations, then single-point
/// (Hartigan) moves until no move lowers the SSE. Deterministic in `seed`.
/// Every returned cluster is non-empty.
inline KMeansResult kmeans_partition(std::span<const GeoPoint> points, std::size_t n_stations,
                                     std::uint64_t seed, int max_iter = 300) {
  if (points.empty()) throw InvalidInput("k-means needs at least one point");
  if (n_stations == 0) throw InvalidInput("k-means needs k >= 1");
  {
    std::vector<GeoPoint> distinct(points.begin(), points.end());
    std::sort(distinct.begin(), distinct.end(),
              [](const GeoPoint& a, const GeoPoint& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < n_stations)
      throw InvalidInput("fewer distinct points than requested stations");
  }

  const std::size_t n = points.size();
  const std::size_t k = n_stations;
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  std::vector<GeoPoint> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng() % n]);
  std::vector<double> d2(n);
  for (std::size_t p = 0; p < n; ++p) d2[p] = squared_distance(points[p], centroids[0]);
  while (centroids.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = detail::unit_uniform(rng) * total;
      pick = n - 1;
      for (std::size_t p = 0; p < n; ++p) {
        if (d2[p] > 0.0 && target < d2[p]) {
          pick = p;
          break;
        }
        target -= d2[p];
      }
      // Rounding can land on an already chosen point.
      while (d2[pick] == 0.0 && pick > 0) --pick;
      while (d2[pick] == 0.0) ++pick;
    }
    centroids.push_back(points[pick]);
    for (std::size_t p = 0; p < n; ++p)
      d2[p] = std::min(d2[p], squared_distance(points[p], centroids.back()));
  }

  KMeansResult res;
  res.labels.assign(n, 0);
  std::vector<std::size_t> counts;
  bool first = true;
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    bool changed = first;
    first = false;
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t c = assign_station(points[p], std::span<const GeoPoint>(centroids));
      if (c != res.labels[p]) {
        res.labels[p] = c;
        changed = true;
      }
    }
    if (!changed) break;
    centroids = detail::cluster_means(points, res.labels, k, counts);
    // Re-seed empty clusters with the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t p = 0; p < n; ++p) {
        if (counts[res.labels[p]] <= 1) continue;
        const double d = squared_distance(points[p], centroids[res.labels[p]]);
        if (d > far_d) {
          far_d = d;
          far = p;
        }
      }
      --counts[res.labels[far]];
      res.labels[far] = c;
      counts[c] = 1;
      centroids = detail::cluster_means(points, res.labels, k, counts);
    }
  }
  centroids = detail::cluster_means(points, res.labels, k, counts);

  // Hartigan refinement: move a point when it strictly lowers the SSE.
  bool moved = true;
  for (int pass = 0; moved && pass < 1000; ++pass) {
    moved = false;
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t a = res.labels[p];
      if (counts[a] <= 1) continue;
      const double na = static_cast<double>(counts[a]);
      const double removal = na / (na - 1.0) * squared_distance(points[p], centroids[a]);
      std::size_t best = a;
      double best_gain = 1e-12 * (1.0 + removal);
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = static_cast<double>(counts[b]);
        const double gain = removal - nb / (nb + 1.0) * squared_distance(points[p], centroids[b]);
        if (gain > best_gain) {
          best_gain = gain;
          best = b;
        }
      }
      if (best == a) continue;
      res.labels[p] = best;
      centroids = detail::cluster_means(points, res.labels, k, counts);
      moved = true;
    }
  }

  res.centroids = std::move(centroids);
  res.sse = detail::total_sse(points, res.labels, res.centroids);
  return res;
}

}  // namespace amod

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "amod/common.hpp"
#include "amod/network.hpp"

namespace amod {

/// rows = requests, cols = vehicles, entries = pickup distance in meters.
using CostMatrix = Grid<double>;

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (request, vehicle), sorted
  double total_cost = 0.0;
};

namespace detail {

// Shortest augmenting path Hungarian method with potentials for an n x m
// problem, n <= m. Returns the column matched to each row. Rows are inserted
// in index order and the lowest column index wins every tie, so the result
// only depends on comparisons between sums of entries.
inline std::vector<std::size_t> hungarian_rows_le_cols(const std::vector<double>& a, std::size_t n,
                                                       std::size_t m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Minimum-cost matching of size min(rows, cols). Wide and tall matrices are
/// both handled without padding (tall ones are solved transposed).
inline Assignment hungarian(const CostMatrix& cost) {
  Assignment out;
  const std::size_t r = cost.rows(), c = cost.cols();
  if (r == 0 || c == 0) return out;
  for (double x : cost.data())
    if (!std::isfinite(x) || x < 0.0) throw InvalidInput("cost entries must be finite and >= 0");

  if (r <= c) {
    const auto match = detail::hungarian_rows_le_cols(cost.data(), r, c);
    for (std::size_t i = 0; i < r; ++i) out.pairs.emplace_back(i, match[i]);
  } else {
    std::vector<double> t(r * c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) t[j * r + i] = cost(i, j);
    const auto match = detail::hungarian_rows_le_cols(t, c, r);
    for (std::size_t j = 0; j < c; ++j) out.pairs.emplace_back(match[j], j);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (const auto& [i, j] : out.pairs) out.total_cost += cost(i, j);
  return out;
}

/// Euclidean pickup costs between request origins and vehicle positions.
inline CostMatrix pickup_costs(std::span<const GeoPoint> requests, std::span<const GeoPoint> vehicles) {
  CostMatrix m(requests.size(), vehicles.size());
  for (std::size_t i = 0; i < requests.size(); ++i)
    for (std::size_t j = 0; j < vehicles.size(); ++j) m(i, j) = distance(requests[i], vehicles[j]);
  return m;
}

/// Matches waiting requests to idle vehicles of one station. The caller
/// guarantees both sets belong to `station`; unmatched requests keep waiting.
inline Assignment match_in_station(std::span<const GeoPoint> requests,
                                   std::span<const GeoPoint> vehicles, std::size_t station) {
  (void)station;
  return hungarian(pickup_costs(requests, vehicles));
}

/// Global bipartite matching over the whole map; never rebalances.
inline Assignment gbm_dispatch(std::span<const GeoPoint> requests, std::span<const GeoPoint> vehicles) {
  return hungarian(pickup_costs(requests, vehicles));
}

}  // namespace amod

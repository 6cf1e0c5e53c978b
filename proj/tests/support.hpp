#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "cdp/domain.hpp"
#include "cdp/matching.hpp"
#include "cdp/rng.hpp"
#include "cdp/routing.hpp"
#include "cdp/snapshot.hpp"

namespace cdp::testing {

inline GridWorld empty_world(int width, int height, double cell_km = 1.0) {
  return GridWorld(width, height, cell_km,
                   std::vector<GridType>(static_cast<std::size_t>(width) * height,
                                         GridType::kEmpty));
}

inline Request make_request(int id, Point at, double earliest, double latest, double service,
                            double price, const GridWorld& world) {
  Request r;
  r.id = id;
  r.location = at;
  r.grid = world.grid_of(at);
  r.arrival = 0.0;
  r.earliest = earliest;
  r.latest = latest;
  r.service = service;
  r.price = price;
  return r;
}

inline CourierView idle_courier(int id, const GridWorld& world, GridCoord at) {
  CourierView c;
  c.id = id;
  c.grid = world.index(at);
  c.position = world.center(c.grid);
  c.available_point = c.position;
  return c;
}

inline Snapshot snapshot_of(const GridWorld& world, std::vector<Request> pending,
                            std::vector<CourierView> couriers, double now = 0.0) {
  return make_snapshot(now, std::make_shared<const GridWorld>(world), kDefaultCourierSpeed,
                       std::move(pending), std::move(couriers));
}

// Best collectible price over every ordered subset of candidates that keeps
// all service starts inside their windows and finishes within the budget.
inline double brute_force_route_value(const GridWorld& world, double speed, Point start,
                                      double start_time, double budget,
                                      std::span<const Request> cand) {
  const double limit = start_time + budget;
  double best = 0.0;
  std::vector<char> used(cand.size(), 0);
  std::function<void(Point, double, double)> extend = [&](Point here, double clock,
                                                          double price) {
    best = std::max(best, price);
    for (std::size_t k = 0; k < cand.size(); ++k) {
      if (used[k]) continue;
      const Request& r = cand[k];
      const double arrive = clock + travel_time(world, here, r.location, speed);
      if (arrive > r.latest + 1e-9) continue;
      const double leave = std::max(arrive, r.earliest) + r.service;
      if (leave > limit + 1e-9) continue;
      used[k] = 1;
      extend(r.location, leave, price + r.price);
      used[k] = 0;
    }
  };
  if (budget > 0.0) extend(start, start_time, 0.0);
  return best;
}

// Best assignment value over all injective row-to-column maps, leaving rows
// unmatched when there are more rows than columns.
inline double brute_force_matching_value(const WeightMatrix& w) {
  const int slots = std::max(w.rows, w.cols);
  std::vector<int> perm(slots);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  bool first = true;
  do {
    double v = 0.0;
    for (int r = 0; r < w.rows; ++r) {
      if (perm[r] < w.cols) v += w.at(r, perm[r]);
    }
    if (first || v > best) best = v;
    first = false;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline WeightMatrix random_weights(Rng& rng, int rows, int cols, bool integers) {
  WeightMatrix w(rows, cols);
  std::uniform_real_distribution<double> real(0.0, 10.0);
  std::uniform_int_distribution<int> small(0, 4);
  for (double& x : w.data) x = integers ? small(rng) : real(rng);
  return w;
}

// Candidates scattered in the grid at (gx, gy) with random windows.
inline std::vector<Request> random_candidates(Rng& rng, const GridWorld& world, GridCoord at,
                                              int count, double start_time) {
  const double cell = world.cell_km();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Request> out;
  for (int k = 0; k < count; ++k) {
    const Point p{(at.gx + u(rng)) * cell, (at.gy + u(rng)) * cell};
    const double earliest = start_time - 10.0 + 30.0 * u(rng);
    const double latest = earliest + 5.0 + 25.0 * u(rng);
    const double service = 1.0 + 4.0 * u(rng);
    const double price = 1.0 + std::floor(9.0 * u(rng));
    out.push_back(make_request(k, p, earliest, latest, service, price, world));
  }
  return out;
}

}  // namespace cdp::testing

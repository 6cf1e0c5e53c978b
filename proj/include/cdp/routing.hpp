#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdp/domain.hpp"
#include "cdp/snapshot.hpp"

namespace cdp {

struct RouteStop {
  int request_id = 0;
  double arrival = 0.0;        // when the courier reaches the stop
  double planned_start = 0.0;  // max(arrival, earliest)
};

// Pickup tour inside one grid under a duration budget.
struct Route {
  std::vector<RouteStop> stops;
  Point start_point;
  double start_time = 0.0;
  double budget = 0.0;
  double total_price = 0.0;
  double end_time = 0.0;
  Point end_point;

  bool empty() const { return stops.empty(); }
  double duration() const { return end_time - start_time; }
};

// Single greedy insertion pass at one budget: repeatedly insert the feasible
// (candidate, position) pair with the best price per added minute, ties to
// smaller latest start, then smaller id, then earlier position.
Route greedy_insertion(const GridWorld& world, double speed, Point start,
                       double start_time, double budget,
                       std::span<const Request> candidates);

// Best of greedy_insertion at `budget` and at every multiple of ten minutes
// below it, so the collected price never drops as the budget grows.
Route plan_route(const GridWorld& world, double speed, Point start,
                 double start_time, double budget,
                 std::span<const Request> candidates);

// Independent timeline walk. Returns one message per violated invariant.
std::vector<std::string> validate_route(
    const Route& route, const GridWorld& world, double speed,
    const std::function<const Request*(int)>& lookup);

struct ProfitEstimate {
  double price = 0.0;
  double time = 0.0;  // travel plus time spent in the target grid

  double rate() const { return time > 0.0 ? price / time : 0.0; }
};

// Predicted outcome of sending a courier that is ready at `ready_time` at
// `origin` to `target_grid` with the given patrol budget.
ProfitEstimate estimate_profit(const GridWorld& world, double speed, Point origin,
                               double ready_time, int target_grid, double patrol,
                               std::span<const Request> grid_pending);

// Same estimate for a courier in a snapshot, using its predicted free point
// and time as origin.
ProfitEstimate estimate_profit(const Snapshot& snapshot, const CourierView& courier,
                               int target_grid, double patrol);

// Estimates for patrol 0, 10, 20 and 30 in one pass.
std::array<ProfitEstimate, kPatrolLevels> estimate_patrols(
    const GridWorld& world, double speed, Point origin, double ready_time,
    int target_grid, std::span<const Request> grid_pending);

std::array<ProfitEstimate, kPatrolLevels> estimate_patrols(
    const Snapshot& snapshot, const CourierView& courier, int target_grid);

}  // namespace cdp

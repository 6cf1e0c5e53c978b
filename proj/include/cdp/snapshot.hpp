#pragma once

#include <memory>
#include <span>
#include <vector>

#include "cdp/domain.hpp"

namespace cdp {

// What a dispatcher sees about one courier.
struct CourierView {
  int id = 0;
  Point position;  // current, interpolated while walking
  int grid = 0;
  CourierStatus status = CourierStatus::kFree;
  int fleet = 0;
  double available_at = 0.0;  // predicted end of the current plan
  Point available_point;      // predicted location at available_at
};

// Read-only view of the simulation at one event time.
struct Snapshot {
  double now = 0.0;
  std::shared_ptr<const GridWorld> world;
  double courier_speed = kDefaultCourierSpeed;

  // Per-grid aggregates over pending requests and couriers.
  std::vector<int> pending_count;
  std::vector<double> pending_price;
  std::vector<int> courier_count;

  // Pending requests grouped by grid; grid g owns
  // pending[grid_offsets[g] .. grid_offsets[g + 1]).
  std::vector<Request> pending;
  std::vector<int> grid_offsets;

  std::vector<CourierView> couriers;  // indexed by courier id

  std::span<const Request> pending_in(int grid) const {
    return {pending.data() + grid_offsets[grid],
            static_cast<std::size_t>(grid_offsets[grid + 1] - grid_offsets[grid])};
  }
  const CourierView& courier(int id) const { return couriers.at(id); }
};

// Assembles a snapshot from raw lists; aggregates are recomputed here.
Snapshot make_snapshot(double now, std::shared_ptr<const GridWorld> world,
                       double courier_speed, std::vector<Request> pending,
                       std::vector<CourierView> couriers);

}  // namespace cdp

#include "cdp/snapshot.hpp"

#include <algorithm>

namespace cdp {

Snapshot make_snapshot(double now, std::shared_ptr<const GridWorld> world,
                       double courier_speed, std::vector<Request> pending,
                       std::vector<CourierView> couriers) {
  Snapshot s;
  s.now = now;
  s.courier_speed = courier_speed;
  const int grids = world->grid_count();

  std::sort(pending.begin(), pending.end(), [](const Request& a, const Request& b) {
    return a.grid != b.grid ? a.grid < b.grid : a.id < b.id;
  });
  s.pending_count.assign(grids, 0);
  s.pending_price.assign(grids, 0.0);
  s.grid_offsets.assign(grids + 1, 0);
  for (const auto& r : pending) {
    ++s.pending_count[r.grid];
    s.pending_price[r.grid] += r.price;
  }
  for (int g = 0; g < grids; ++g) {
    s.grid_offsets[g + 1] = s.grid_offsets[g] + s.pending_count[g];
  }
  s.pending = std::move(pending);

  std::sort(couriers.begin(), couriers.end(),
            [](const CourierView& a, const CourierView& b) { return a.id < b.id; });
  s.courier_count.assign(grids, 0);
  for (auto& c : couriers) {
    c.grid = world->grid_of(c.position);
    ++s.courier_count[c.grid];
  }
  s.couriers = std::move(couriers);
  s.world = std::move(world);
  return s;
}

}  // namespace cdp

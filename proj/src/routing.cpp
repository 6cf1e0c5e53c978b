#include "cdp/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cdp {

namespace {

constexpr double kEps = 1e-9;

// Working state of the insertion heuristic. Index 0..k-1 are stops; the
// start node is implicit.
class Timeline {
 public:
  Timeline(const GridWorld& world, double speed, Point start, double start_time,
           double limit, std::span<const Request> candidates)
      : world_(world),
        speed_(speed),
        origin_(start),
        start_time_(start_time),
        limit_(limit),
        cand_(candidates) {}

  double leg(Point a, Point b) const { return travel_time(world_, a, b, speed_); }

  std::size_t size() const { return seq_.size(); }
  double end() const { return seq_.empty() ? start_time_ : depart(seq_.size() - 1); }

  // Added route time of inserting candidate `c` before position `p`, or a
  // negative value when infeasible.
  double insertion_delta(int c, std::size_t p) const {
    const Request& r = cand_[c];
    const Point prev_point = p == 0 ? origin_ : cand_[seq_[p - 1]].location;
    const double prev_depart = p == 0 ? start_time_ : depart(p - 1);
    const double arrive = prev_depart + leg(prev_point, r.location);
    if (arrive > r.latest + kEps) return -1.0;
    const double leave = std::max(arrive, r.earliest) + r.service;
    if (p == seq_.size()) {
      if (leave > limit_ + kEps) return -1.0;
      return std::max(0.0, leave - end());
    }
    const double shift = leave + leg(r.location, cand_[seq_[p]].location) - arrival_[p];
    if (shift > wait_[p] + max_shift_[p] + kEps) return -1.0;
    double pushed = std::max(0.0, shift - wait_[p]);
    for (std::size_t q = p + 1; q < seq_.size() && pushed > 0.0; ++q) {
      pushed = std::max(0.0, pushed - wait_[q]);
    }
    return pushed;
  }

  void insert(int c, std::size_t p) {
    seq_.insert(seq_.begin() + static_cast<std::ptrdiff_t>(p), c);
    rebuild();
  }

  Route to_route(double budget) const {
    Route route;
    route.start_point = origin_;
    route.start_time = start_time_;
    route.budget = budget;
    route.end_time = end();
    route.end_point = seq_.empty() ? origin_ : cand_[seq_.back()].location;
    for (std::size_t k = 0; k < seq_.size(); ++k) {
      const Request& r = cand_[seq_[k]];
      route.stops.push_back({r.id, arrival_[k], service_start_[k]});
      route.total_price += r.price;
    }
    return route;
  }

 private:
  double depart(std::size_t k) const { return service_start_[k] + cand_[seq_[k]].service; }

  void rebuild() {
    const std::size_t k = seq_.size();
    arrival_.resize(k);
    service_start_.resize(k);
    wait_.resize(k);
    max_shift_.resize(k);
    Point prev = origin_;
    double prev_depart = start_time_;
    for (std::size_t q = 0; q < k; ++q) {
      const Request& r = cand_[seq_[q]];
      arrival_[q] = prev_depart + leg(prev, r.location);
      service_start_[q] = std::max(arrival_[q], r.earliest);
      wait_[q] = service_start_[q] - arrival_[q];
      prev_depart = service_start_[q] + r.service;
      prev = r.location;
    }
    for (std::size_t q = k; q-- > 0;) {
      const Request& r = cand_[seq_[q]];
      const double own = r.latest - service_start_[q];
      const double downstream = q + 1 == k ? limit_ - depart(q)
                                           : wait_[q + 1] + max_shift_[q + 1];
      max_shift_[q] = std::min(own, downstream);
    }
  }

  const GridWorld& world_;
  double speed_;
  Point origin_;
  double start_time_;
  double limit_;
  std::span<const Request> cand_;
  std::vector<int> seq_;
  std::vector<double> arrival_;
  std::vector<double> service_start_;
  std::vector<double> wait_;
  std::vector<double> max_shift_;
};

bool better_route(const Route& a, const Route& b) {
  if (a.total_price != b.total_price) return a.total_price > b.total_price;
  return a.end_time < b.end_time;
}

}  // namespace

Route greedy_insertion(const GridWorld& world, double speed, Point start,
                       double start_time, double budget,
                       std::span<const Request> candidates) {
  Timeline line(world, speed, start, start_time, start_time + budget, candidates);
  if (budget <= 0.0 || candidates.empty()) return line.to_route(budget);

  std::vector<int> open;
  open.reserve(candidates.size());
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    if (line.insertion_delta(c, 0) >= 0.0) open.push_back(c);
  }

  while (!open.empty()) {
    int best_open = -1;
    std::size_t best_pos = 0;
    double best_ratio = -1.0;
    for (int k = 0; k < static_cast<int>(open.size()); ++k) {
      const Request& r = candidates[open[k]];
      for (std::size_t p = 0; p <= line.size(); ++p) {
        const double delta = line.insertion_delta(open[k], p);
        if (delta < 0.0) continue;
        const double ratio = delta <= kEps ? std::numeric_limits<double>::infinity()
                                           : r.price / delta;
        bool take = best_open < 0 || ratio > best_ratio;
        if (!take && ratio == best_ratio) {
          const Request& b = candidates[open[best_open]];
          if (r.latest != b.latest) {
            take = r.latest < b.latest;
          } else if (r.id != b.id) {
            take = r.id < b.id;
          }
        }
        if (take) {
          best_open = k;
          best_pos = p;
          best_ratio = ratio;
        }
      }
    }
    if (best_open < 0) break;
    line.insert(open[best_open], best_pos);
    open.erase(open.begin() + best_open);
  }
  return line.to_route(budget);
}

Route plan_route(const GridWorld& world, double speed, Point start,
                 double start_time, double budget,
                 std::span<const Request> candidates) {
  Route best = greedy_insertion(world, speed, start, start_time, budget, candidates);
  if (budget <= 0.0) return best;
  const int steps = static_cast<int>(std::ceil(budget / kPatrolStep - kEps)) - 1;
  for (int k = steps; k >= 1; --k) {
    Route lower = greedy_insertion(world, speed, start, start_time,
                                   static_cast<double>(k * kPatrolStep), candidates);
    if (better_route(lower, best)) best = std::move(lower);
  }
  best.budget = budget;
  return best;
}

std::vector<std::string> validate_route(
    const Route& route, const GridWorld& world, double speed,
    const std::function<const Request*(int)>& lookup) {
  constexpr double tol = 1e-7;
  std::vector<std::string> issues;
  auto report = [&](const std::string& msg) { issues.push_back(msg); };

  Point here = route.start_point;
  double clock = route.start_time;
  double price = 0.0;
  std::vector<int> seen;
  for (std::size_t k = 0; k < route.stops.size(); ++k) {
    const RouteStop& stop = route.stops[k];
    const Request* r = lookup(stop.request_id);
    std::ostringstream tag;
    tag << "stop " << k << " (request " << stop.request_id << ")";
    if (r == nullptr) {
      report(tag.str() + ": unknown request");
      continue;
    }
    if (std::find(seen.begin(), seen.end(), r->id) != seen.end()) {
      report(tag.str() + ": visited twice");
    }
    seen.push_back(r->id);
    const double reach = clock + travel_time(world, here, r->location, speed);
    if (stop.planned_start + tol < reach) report(tag.str() + ": starts before arrival");
    if (stop.planned_start + tol < r->earliest) {
      report(tag.str() + ": starts before window opens");
    }
    if (stop.planned_start > r->latest + tol) {
      report(tag.str() + ": starts after window closes");
    }
    if (std::abs(stop.planned_start - std::max(reach, r->earliest)) > tol) {
      report(tag.str() + ": idles without waiting for a window");
    }
    clock = stop.planned_start + r->service;
    here = r->location;
    price += r->price;
  }
  if (std::abs(route.end_time - clock) > tol) report("end time does not match timeline");
  if (route.end_time - route.start_time > route.budget + tol) {
    report("route exceeds its budget");
  }
  if (std::abs(route.total_price - price) > tol) {
    report("total price does not match stops");
  }
  return issues;
}

namespace {

std::vector<Request> alive_at(std::span<const Request> pending, double t) {
  std::vector<Request> out;
  out.reserve(pending.size());
  for (const auto& r : pending) {
    if (r.latest >= t) out.push_back(r);
  }
  return out;
}

ProfitEstimate summarize(const Route& route, double travel, double patrol) {
  if (route.empty()) return {0.0, travel + patrol};
  return {route.total_price, travel + route.duration()};
}

}  // namespace

ProfitEstimate estimate_profit(const GridWorld& world, double speed, Point origin,
                               double ready_time, int target_grid, double patrol,
                               std::span<const Request> grid_pending) {
  const Point center = world.center(target_grid);
  const double travel = travel_time(world, origin, center, speed);
  const double arrival = ready_time + travel;
  const auto candidates = alive_at(grid_pending, arrival);
  const Route route = plan_route(world, speed, center, arrival, patrol, candidates);
  return summarize(route, travel, patrol);
}

ProfitEstimate estimate_profit(const Snapshot& snapshot, const CourierView& courier,
                               int target_grid, double patrol) {
  return estimate_profit(*snapshot.world, snapshot.courier_speed,
                         courier.available_point,
                         std::max(snapshot.now, courier.available_at), target_grid,
                         patrol, snapshot.pending_in(target_grid));
}

std::array<ProfitEstimate, kPatrolLevels> estimate_patrols(
    const GridWorld& world, double speed, Point origin, double ready_time,
    int target_grid, std::span<const Request> grid_pending) {
  std::array<ProfitEstimate, kPatrolLevels> out{};
  const Point center = world.center(target_grid);
  const double travel = travel_time(world, origin, center, speed);
  const double arrival = ready_time + travel;
  out[0] = {0.0, travel};
  const auto candidates = alive_at(grid_pending, arrival);
  if (candidates.empty()) {
    for (int level = 1; level < kPatrolLevels; ++level) {
      out[level] = {0.0, travel + level * kPatrolStep};
    }
    return out;
  }
  // Running best over the budget ladder; matches plan_route level by level.
  Route best;
  for (int level = 1; level < kPatrolLevels; ++level) {
    const double patrol = level * kPatrolStep;
    Route r = greedy_insertion(world, speed, center, arrival, patrol, candidates);
    if (level == 1 || !better_route(best, r)) best = std::move(r);
    out[level] = summarize(best, travel, patrol);
  }
  return out;
}

std::array<ProfitEstimate, kPatrolLevels> estimate_patrols(
    const Snapshot& snapshot, const CourierView& courier, int target_grid) {
  return estimate_patrols(*snapshot.world, snapshot.courier_speed,
                          courier.available_point,
                          std::max(snapshot.now, courier.available_at), target_grid,
                          snapshot.pending_in(target_grid));
}

}  // namespace cdp

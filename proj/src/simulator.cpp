#include "cdp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cdp {

namespace {
constexpr std::size_t kMaxViolationMessages = 20;
}

Simulator::Simulator(const ProblemInstance& instance, SimOptions options)
    : instance_(instance),
      world_(std::make_shared<const GridWorld>(instance.world)),
      options_(std::move(options)) {
  courier_count_ = options_.courier_count > 0 ? options_.courier_count
                                              : instance.meta.courier_count;
  if (courier_count_ < 1) throw ConfigError("simulation needs at least one courier");
  start_grid_ = options_.start_grid >= 0
                    ? options_.start_grid
                    : world_->index(world_->clip(instance.meta.courier_start));
  if (start_grid_ >= world_->grid_count()) {
    throw ConfigError("courier start grid outside the board");
  }
  speed_ = instance.meta.courier_speed;
  if (!options_.fleet_of.empty() &&
      static_cast<int>(options_.fleet_of.size()) != courier_count_) {
    throw ConfigError("fleet_of must tag every courier");
  }
  reset();
}

void Simulator::push(double time, EventKind kind, int subject) {
  queue_.push({time, kind, subject, seq_++});
}

void Simulator::reset() {
  now_ = 0.0;
  seq_ = 0;
  queue_ = {};
  requests_ = instance_.requests;
  index_of_id_.clear();
  for (int i = 0; i < static_cast<int>(requests_.size()); ++i) {
    requests_[i].status = RequestStatus::kPending;
    index_of_id_[requests_[i].id] = i;
    push(requests_[i].arrival, EventKind::kRequestArrival, i);
  }
  pending_by_grid_.assign(world_->grid_count(), {});

  couriers_.assign(courier_count_, Courier{});
  plans_.assign(courier_count_, CourierPlan{});
  decisions_made_.assign(courier_count_, 0);
  records_.clear();
  records_by_courier_.assign(courier_count_, {});
  route_violations_ = 0;
  violation_messages_.clear();
  const Point start = world_->center(start_grid_);
  for (int c = 0; c < courier_count_; ++c) {
    Courier& k = couriers_[c];
    k.id = c;
    k.position = start;
    k.speed = speed_;
    k.fleet = options_.fleet_of.empty() ? 0 : options_.fleet_of[c];
    push(0.0, EventKind::kCourierFree, c);
  }

  // Requests known at time 0 are visible before the first dispatch.
  while (!queue_.empty() && queue_.top().time <= 0.0 &&
         queue_.top().kind == EventKind::kRequestArrival) {
    const Event e = queue_.top();
    queue_.pop();
    on_request_arrival(e.subject);
  }
}

bool Simulator::step(Dispatcher& dispatcher) {
  if (queue_.empty()) return false;
  const Event e = queue_.top();
  queue_.pop();
  now_ = std::max(now_, e.time);
  switch (e.kind) {
    case EventKind::kRequestArrival:
      on_request_arrival(e.subject);
      break;
    case EventKind::kRequestExpiry:
      on_request_expiry(e.subject);
      break;
    case EventKind::kCourierFree:
      on_courier_free(e.subject, dispatcher);
      break;
    case EventKind::kCourierArrival:
      on_courier_arrival(e.subject);
      break;
    case EventKind::kRouteCompletion:
      on_route_completion(e.subject, dispatcher);
      break;
  }
  return true;
}

void Simulator::run(Dispatcher& dispatcher) {
  while (step(dispatcher)) {
  }
}

void Simulator::on_request_arrival(int index) {
  Request& r = requests_[index];
  r.status = RequestStatus::kPending;
  pending_by_grid_[r.grid].push_back(index);
  push(std::max(now_, r.latest), EventKind::kRequestExpiry, index);
}

void Simulator::remove_pending(int index) {
  auto& list = pending_by_grid_[requests_[index].grid];
  list.erase(std::find(list.begin(), list.end(), index));
}

void Simulator::on_request_expiry(int index) {
  Request& r = requests_[index];
  if (r.status != RequestStatus::kPending) return;
  r.status = RequestStatus::kExpired;
  remove_pending(index);
}

void Simulator::on_courier_free(int c, Dispatcher& dispatcher) {
  Courier& courier = couriers_[c];
  courier.status = CourierStatus::kFree;
  courier.busy_until = now_;
  if (now_ >= instance_.horizon) return;

  const int action = dispatcher.decide(snapshot(), c);
  if (!valid_action_index(action)) {
    std::ostringstream msg;
    msg << "dispatcher returned invalid action index " << action << " for courier "
        << c << " at t=" << now_;
    throw DispatchError(msg.str());
  }
  const ActionSpec spec = action_decode(action);
  const int origin = world_->grid_of(courier.position);
  const int target = world_->index(action_target(*world_, world_->coord(origin), spec));
  const double travel =
      travel_time(*world_, courier.position, world_->center(target), speed_);

  CourierPlan& plan = plans_[c];
  plan = CourierPlan{};
  plan.record.courier = c;
  plan.record.fleet = courier.fleet;
  plan.record.decision_index = decisions_made_[c]++;
  plan.record.decision_time = now_;
  plan.record.action = action;
  plan.record.origin_grid = origin;
  plan.record.target_grid = target;
  plan.record.patrol = spec.patrol_minutes;
  plan.walk_from = courier.position;
  plan.walk_start = now_;
  plan.walk_end = now_ + travel;
  plan.target_grid = target;
  plan.patrol = spec.patrol_minutes;

  courier.status = CourierStatus::kWalking;
  courier.busy_until = plan.walk_end + plan.patrol;
  push(plan.walk_end, EventKind::kCourierArrival, c);
}

void Simulator::on_courier_arrival(int c) {
  Courier& courier = couriers_[c];
  CourierPlan& plan = plans_[c];
  const Point center = world_->center(plan.target_grid);
  courier.position = center;
  courier.status = CourierStatus::kPicking;
  plan.record.arrival_time = now_;

  if (plan.patrol == 0) {
    plan.route = Route{};
    plan.route.start_point = center;
    plan.route.end_point = center;
    plan.route.start_time = now_;
    plan.route.end_time = now_;
    plan.route_planned = true;
    const bool idle = plan.walk_end == plan.walk_start;
    courier.busy_until = idle ? now_ + options_.idle_minutes : now_;
    push(courier.busy_until, EventKind::kRouteCompletion, c);
    return;
  }

  std::vector<Request> candidates;
  for (int idx : pending_by_grid_[plan.target_grid]) {
    if (requests_[idx].latest >= now_) candidates.push_back(requests_[idx]);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Request& a, const Request& b) { return a.id < b.id; });
  plan.route = plan_route(*world_, speed_, center, now_, plan.patrol, candidates);
  plan.route_planned = true;

  if (options_.validate_routes) {
    const auto issues = validate_route(
        plan.route, *world_, speed_, [this](int id) -> const Request* {
          auto it = index_of_id_.find(id);
          if (it == index_of_id_.end()) return nullptr;
          const Request& r = requests_[it->second];
          return r.status == RequestStatus::kPending ? &r : nullptr;
        });
    route_violations_ += static_cast<int>(issues.size());
    for (const auto& msg : issues) {
      if (violation_messages_.size() < kMaxViolationMessages) {
        violation_messages_.push_back("courier " + std::to_string(c) + ": " + msg);
      }
    }
  }

  for (const auto& stop : plan.route.stops) {
    const int idx = index_of_id_.at(stop.request_id);
    requests_[idx].status = RequestStatus::kLocked;
    remove_pending(idx);
  }
  courier.busy_until = plan.route.empty() ? now_ + plan.patrol : plan.route.end_time;
  push(courier.busy_until, EventKind::kRouteCompletion, c);
}

void Simulator::on_route_completion(int c, Dispatcher& dispatcher) {
  Courier& courier = couriers_[c];
  CourierPlan& plan = plans_[c];
  double reward = 0.0;
  for (const auto& stop : plan.route.stops) {
    Request& r = requests_[index_of_id_.at(stop.request_id)];
    r.status = RequestStatus::kServed;
    reward += r.price;
    plan.record.served.push_back(r.id);
  }
  courier.revenue += reward;
  courier.position = plan.route.empty() ? world_->center(plan.target_grid)
                                        : plan.route.end_point;
  plan.record.completion_time = now_;
  plan.record.reward = reward;

  records_by_courier_[c].push_back(static_cast<int>(records_.size()));
  records_.push_back(plan.record);
  dispatcher.on_action_complete(records_.back());

  courier.status = CourierStatus::kFree;
  courier.busy_until = now_;
  push(now_, EventKind::kCourierFree, c);
}

Point Simulator::position_at(int c, double t) const {
  const Courier& courier = couriers_[c];
  if (courier.status != CourierStatus::kWalking) return courier.position;
  const CourierPlan& plan = plans_[c];
  const double span = plan.walk_end - plan.walk_start;
  if (span <= 0.0) return plan.walk_from;
  const double f = std::clamp((t - plan.walk_start) / span, 0.0, 1.0);
  const Point to = world_->center(plan.target_grid);
  return {plan.walk_from.x + f * (to.x - plan.walk_from.x),
          plan.walk_from.y + f * (to.y - plan.walk_from.y)};
}

Snapshot Simulator::snapshot() const {
  std::vector<Request> pending;
  for (const auto& list : pending_by_grid_) {
    for (int idx : list) pending.push_back(requests_[idx]);
  }
  std::vector<CourierView> views;
  views.reserve(couriers_.size());
  for (const auto& courier : couriers_) {
    CourierView v;
    v.id = courier.id;
    v.position = position_at(courier.id, now_);
    v.status = courier.status;
    v.fleet = courier.fleet;
    const CourierPlan& plan = plans_[courier.id];
    switch (courier.status) {
      case CourierStatus::kFree:
        v.available_at = now_;
        v.available_point = v.position;
        break;
      case CourierStatus::kWalking:
        v.available_at = courier.busy_until;
        v.available_point = world_->center(plan.target_grid);
        break;
      case CourierStatus::kPicking:
        v.available_at = courier.busy_until;
        v.available_point = plan.route.empty() ? world_->center(plan.target_grid)
                                               : plan.route.end_point;
        break;
    }
    views.push_back(v);
  }
  return make_snapshot(now_, world_, speed_, std::move(pending), std::move(views));
}

EpisodeResult Simulator::result() const {
  EpisodeResult out;
  out.total_price = instance_.total_price();
  out.request_count = static_cast<int>(requests_.size());
  for (const auto& r : requests_) {
    switch (r.status) {
      case RequestStatus::kServed:
        ++out.served_count;
        break;
      case RequestStatus::kExpired:
        ++out.expired_count;
        break;
      case RequestStatus::kPending:
      case RequestStatus::kLocked:
        ++out.pending_count;
        break;
    }
  }
  for (const auto& courier : couriers_) {
    out.courier_revenue.push_back(courier.revenue);
    out.fleet_revenue[courier.fleet] += courier.revenue;
    out.served_price += courier.revenue;
  }
  out.score = out.total_price > 0.0 ? out.served_price / out.total_price : 0.0;
  out.actions = records_;
  out.actions_by_courier = records_by_courier_;
  out.route_violations = route_violations_;
  out.violation_messages = violation_messages_;
  return out;
}

EpisodeResult run_episode(const ProblemInstance& instance, Dispatcher& dispatcher,
                          std::uint64_t seed, const SimOptions& options) {
  Simulator sim(instance, options);
  dispatcher.begin_episode(instance, seed);
  sim.run(dispatcher);
  return sim.result();
}

}  // namespace cdp

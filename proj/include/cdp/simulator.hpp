#pragma once

#include <cstdint>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdp/domain.hpp"
#include "cdp/routing.hpp"
#include "cdp/scenario.hpp"
#include "cdp/snapshot.hpp"

namespace cdp {

class DispatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Log entry for one executed dispatching decision.
struct ActionRecord {
  int courier = 0;
  int fleet = 0;
  int decision_index = 0;  // position in the courier's own trajectory
  double decision_time = 0.0;
  int action = 0;
  int origin_grid = 0;
  int target_grid = 0;
  int patrol = 0;
  double arrival_time = 0.0;
  double completion_time = 0.0;
  double reward = 0.0;
  std::vector<int> served;  // request ids in route order
};

struct EpisodeResult {
  double served_price = 0.0;
  double total_price = 0.0;
  double score = 0.0;
  int request_count = 0;
  int served_count = 0;
  int expired_count = 0;
  int pending_count = 0;
  std::vector<double> courier_revenue;
  std::map<int, double> fleet_revenue;
  // Completed actions; actions_by_courier[c] lists indices in decision order.
  std::vector<ActionRecord> actions;
  std::vector<std::vector<int>> actions_by_courier;
  int route_violations = 0;
  std::vector<std::string> violation_messages;
};

class Dispatcher {
 public:
  virtual ~Dispatcher() = default;
  virtual void begin_episode(const ProblemInstance& /*instance*/,
                             std::uint64_t /*seed*/) {}
  // Returns an action index in [0, 99].
  virtual int decide(const Snapshot& snapshot, int courier_id) = 0;
  virtual void on_action_complete(const ActionRecord& /*record*/) {}
};

struct SimOptions {
  int courier_count = -1;        // -1: take it from the instance meta
  int start_grid = -1;           // -1: take it from the instance meta
  std::vector<int> fleet_of;     // fleet tag per courier, default 0
  bool validate_routes = true;
  // A courier told to stay with zero patrol idles this long before its next
  // decision.
  double idle_minutes = 1.0;
};

class Simulator {
 public:
  Simulator(const ProblemInstance& instance, SimOptions options = {});

  // Clears all state and processes the request arrivals at time 0.
  void reset();
  // Processes one event. Returns false once the queue is exhausted.
  bool step(Dispatcher& dispatcher);
  void run(Dispatcher& dispatcher);

  double now() const { return now_; }
  Snapshot snapshot() const;
  EpisodeResult result() const;
  const std::vector<Request>& requests() const { return requests_; }
  const std::vector<Courier>& couriers() const { return couriers_; }

 private:
  enum class EventKind : int {
    kRequestArrival = 0,
    kRouteCompletion = 1,
    kCourierArrival = 2,
    kCourierFree = 3,
    kRequestExpiry = 4,
  };
  struct Event {
    double time;
    EventKind kind;
    int subject;
    std::uint64_t seq;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      if (a.subject != b.subject) return a.subject > b.subject;
      return a.seq > b.seq;
    }
  };
  struct CourierPlan {
    ActionRecord record;
    Point walk_from;
    double walk_start = 0.0;
    double walk_end = 0.0;
    int target_grid = 0;
    int patrol = 0;
    Route route;
    bool route_planned = false;
  };

  void push(double time, EventKind kind, int subject);
  void on_request_arrival(int index);
  void on_request_expiry(int index);
  void on_courier_free(int courier, Dispatcher& dispatcher);
  void on_courier_arrival(int courier);
  void on_route_completion(int courier, Dispatcher& dispatcher);
  void remove_pending(int index);
  Point position_at(int courier, double t) const;

  const ProblemInstance& instance_;
  std::shared_ptr<const GridWorld> world_;
  SimOptions options_;
  int courier_count_ = 0;
  int start_grid_ = 0;
  double speed_ = kDefaultCourierSpeed;

  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<Request> requests_;
  std::unordered_map<int, int> index_of_id_;
  std::vector<std::vector<int>> pending_by_grid_;
  std::vector<Courier> couriers_;
  std::vector<CourierPlan> plans_;
  std::vector<int> decisions_made_;
  std::vector<ActionRecord> records_;
  std::vector<std::vector<int>> records_by_courier_;
  int route_violations_ = 0;
  std::vector<std::string> violation_messages_;
};

// Runs a full episode. `seed` is handed to the dispatcher.
EpisodeResult run_episode(const ProblemInstance& instance, Dispatcher& dispatcher,
                          std::uint64_t seed, const SimOptions& options = {});

}  // namespace cdp

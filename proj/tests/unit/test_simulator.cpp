#include <doctest.h>

#include <set>

#include "cdp/baselines.hpp"
#include "cdp/simulator.hpp"

using namespace cdp;

namespace {

std::string fixture(const char* name) { return std::string(CDP_FIXTURE_DIR) + "/" + name; }

// Plays a fixed list of actions, then repeats the last one.
class ScriptedDispatcher : public Dispatcher {
 public:
  explicit ScriptedDispatcher(std::vector<int> script) : script_(std::move(script)) {}
  int decide(const Snapshot&, int) override {
    const int a = script_[std::min(next_, script_.size() - 1)];
    ++next_;
    return a;
  }

 private:
  std::vector<int> script_;
  std::size_t next_ = 0;
};

const int kStay30 = action_index({0, 0, 30});

}  // namespace

TEST_CASE("empty instance scores zero") {
  ProblemInstance inst = load_instance(fixture("two_requests.json"));
  inst.requests.clear();
  RandomDispatcher random;
  const EpisodeResult r = run_episode(inst, random, 1);
  CHECK(r.score == 0.0);
  CHECK(r.served_price == 0.0);
  CHECK(r.total_price == 0.0);
}

TEST_CASE("staying put collects a request in the courier's grid") {
  ProblemInstance inst = load_instance(fixture("two_requests.json"));
  inst.requests.erase(inst.requests.begin() + 1);  // keep request 3 only
  ScriptedDispatcher stay({kStay30});
  const EpisodeResult r = run_episode(inst, stay, 1);
  CHECK(r.score == doctest::Approx(1.0));
  CHECK(r.served_count == 1);
  CHECK(r.route_violations == 0);
}

TEST_CASE("hand-traced two-request episode") {
  const ProblemInstance inst = load_instance(fixture("two_requests.json"));
  ScriptedDispatcher script({kStay30, action_index({1, 0, 30}), kStay30});
  const EpisodeResult r = run_episode(inst, script, 1);
  CHECK(r.score == doctest::Approx(1.0));
  REQUIRE(r.actions.size() >= 3u);

  const ActionRecord& first = r.actions[0];
  CHECK(first.decision_time == 0.0);
  CHECK(first.target_grid == 4);
  CHECK(first.completion_time == doctest::Approx(3.6));  // 0.3 km walk, 3 min service
  CHECK(first.reward == 6.0);
  CHECK(first.served == std::vector<int>{3});

  // From (1.5, 1.2) to the centre of grid 5; request 7 is not out yet.
  const ActionRecord& second = r.actions[1];
  const double walk = std::sqrt(1.0 + 0.09) / 0.5;
  CHECK(second.decision_time == doctest::Approx(3.6));
  CHECK(second.target_grid == 5);
  CHECK(second.arrival_time == doctest::Approx(3.6 + walk));
  CHECK(second.completion_time == doctest::Approx(33.6 + walk));
  CHECK(second.reward == 0.0);

  const ActionRecord& third = r.actions[2];
  CHECK(third.completion_time == doctest::Approx(35.6 + walk));
  CHECK(third.served == std::vector<int>{7});
  for (std::size_t k = 0; k < r.actions.size(); ++k) {
    CHECK(r.actions[k].decision_index == static_cast<int>(k));
    CHECK(r.actions[k].decision_time < inst.horizon);
  }
}

TEST_CASE("invalid action index stops the episode") {
  const ProblemInstance inst = load_instance(fixture("two_requests.json"));
  ScriptedDispatcher bad({100});
  CHECK_THROWS_AS(run_episode(inst, bad, 1), DispatchError);
  ScriptedDispatcher negative({-1});
  CHECK_THROWS_AS(run_episode(inst, negative, 1), DispatchError);
}

TEST_CASE("expired requests leave the pending aggregates") {
  const ProblemInstance inst = load_instance(fixture("two_requests.json"));
  ScriptedDispatcher away({action_index({-1, -1, 30})});
  Simulator sim(inst);
  sim.reset();
  CHECK(sim.snapshot().pending_price[4] == 6.0);
  CHECK(sim.snapshot().pending_count[4] == 1);
  while (sim.step(away) && sim.now() <= 60.0) {
  }
  CHECK(sim.now() > 60.0);
  CHECK(sim.snapshot().pending_price[4] == 0.0);
  CHECK(sim.snapshot().pending_price[5] == 4.0);
  sim.run(away);
  const EpisodeResult r = sim.result();
  CHECK(r.served_count == 0);
  CHECK(r.expired_count == 2);
}

TEST_CASE("pending requests right after reset are the time-zero ones") {
  ScenarioConfig c = scenario_preset("base");
  c.seed = 4;
  const ProblemInstance inst = build_instance(c);
  Simulator sim(inst);
  sim.reset();
  const auto at_zero = std::count_if(inst.requests.begin(), inst.requests.end(),
                                     [](const Request& r) { return r.arrival == 0.0; });
  const Snapshot s = sim.snapshot();
  CHECK(static_cast<long>(s.pending.size()) == at_zero);
  CHECK(at_zero == static_cast<long>(std::ceil(0.1 * inst.requests.size() - 1e-9)));
  int counted = 0;
  for (int n : s.courier_count) counted += n;
  CHECK(counted == 10);
  CHECK(s.courier_count[s.world->index({10, 10})] == 10);
}

TEST_CASE("episode accounting is conserved") {
  ScenarioConfig c = scenario_preset("desk");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    c.seed = seed;
    const ProblemInstance inst = build_instance(c);
    for (const char* name : {"random", "ghav", "ghep"}) {
      CAPTURE(name);
      auto d = make_baseline(name);
      SimOptions opt;
      opt.fleet_of = {0, 0, 1, 1};
      const EpisodeResult r = run_episode(inst, *d, seed, opt);
      CHECK(r.route_violations == 0);
      CHECK(r.served_count + r.expired_count + r.pending_count == r.request_count);
      double by_courier = 0.0, by_fleet = 0.0, by_action = 0.0;
      for (double v : r.courier_revenue) by_courier += v;
      for (const auto& [fleet, v] : r.fleet_revenue) by_fleet += v;
      std::set<int> served;
      for (const auto& a : r.actions) {
        by_action += a.reward;
        for (int id : a.served) CHECK(served.insert(id).second);
      }
      CHECK(by_courier == doctest::Approx(r.served_price));
      CHECK(by_fleet == doctest::Approx(r.served_price));
      CHECK(by_action == doctest::Approx(r.served_price));
      CHECK(static_cast<int>(served.size()) == r.served_count);
      CHECK(r.served_price <= r.total_price + 1e-9);
      CHECK(r.score == doctest::Approx(r.served_price / r.total_price));
    }
  }
}

TEST_CASE("episodes are reproducible") {
  ScenarioConfig c = scenario_preset("desk");
  c.seed = 12;
  const ProblemInstance inst = build_instance(c);
  RandomDispatcher a, b;
  const EpisodeResult ra = run_episode(inst, a, 99);
  const EpisodeResult rb = run_episode(inst, b, 99);
  CHECK(ra.score == rb.score);
  REQUIRE(ra.actions.size() == rb.actions.size());
  for (std::size_t k = 0; k < ra.actions.size(); ++k) {
    CHECK(ra.actions[k].action == rb.actions[k].action);
    CHECK(ra.actions[k].completion_time == rb.actions[k].completion_time);
  }
}

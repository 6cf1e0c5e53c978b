#include <doctest.h>

#include "cdp/routing.hpp"
#include "support.hpp"

using namespace cdp;
using testing::make_request;

namespace {

std::function<const Request*(int)> lookup_in(const std::vector<Request>& reqs) {
  return [&reqs](int id) -> const Request* {
    for (const auto& r : reqs) {
      if (r.id == id) return &r;
    }
    return nullptr;
  };
}

}  // namespace

TEST_CASE("zero budget gives an empty route") {
  const GridWorld world = testing::empty_world(5, 5);
  const std::vector<Request> reqs{make_request(0, {0.2, 0.2}, 0, 100, 1, 5, world)};
  const Route r = plan_route(world, 0.5, {0.5, 0.5}, 0.0, 0.0, reqs);
  CHECK(r.empty());
  CHECK(r.total_price == 0.0);
  CHECK(r.end_time == 0.0);
}

TEST_CASE("single request hand trace") {
  const GridWorld world = testing::empty_world(20, 20);
  const std::vector<Request> reqs{make_request(1, {0, 1}, 100, 160, 3, 5, world)};
  const Route r = plan_route(world, 0.5, {0, 0}, 100.0, 10.0, reqs);
  REQUIRE(r.stops.size() == 1u);
  CHECK(r.stops[0].arrival == doctest::Approx(102.0));
  CHECK(r.stops[0].planned_start == doctest::Approx(102.0));
  CHECK(r.end_time == doctest::Approx(105.0));
  CHECK(r.duration() == doctest::Approx(5.0));
  CHECK(r.total_price == 5.0);
  CHECK(validate_route(r, world, 0.5, lookup_in(reqs)).empty());
}

TEST_CASE("waiting for a window that opens later") {
  const GridWorld world = testing::empty_world(5, 5);
  const std::vector<Request> reqs{make_request(1, {0.5, 1.0}, 8, 20, 2, 3, world)};
  const Route r = plan_route(world, 0.5, {0.5, 0.5}, 0.0, 20.0, reqs);
  REQUIRE(r.stops.size() == 1u);
  CHECK(r.stops[0].arrival == doctest::Approx(1.0));
  CHECK(r.stops[0].planned_start == doctest::Approx(8.0));
  CHECK(r.end_time == doctest::Approx(10.0));
}

TEST_CASE("requests that cannot be reached in time or budget are skipped") {
  const GridWorld world = testing::empty_world(5, 5);
  const std::vector<Request> reqs{
      make_request(1, {0.5, 2.5}, 0, 3, 1, 9, world),    // arrival 4 > latest 3
      make_request(2, {0.5, 1.5}, 0, 50, 20, 9, world),  // service overruns budget
  };
  const Route r = plan_route(world, 0.5, {0.5, 0.5}, 0.0, 10.0, reqs);
  CHECK(r.empty());
}

TEST_CASE("plan_route never beats the exhaustive optimum and routes validate") {
  const GridWorld world = testing::empty_world(3, 3);
  Rng rng(17);
  std::uniform_int_distribution<int> count(0, 8);
  std::uniform_int_distribution<int> budget_pick(0, 4);
  int matched = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto cand = testing::random_candidates(rng, world, {1, 1}, count(rng), 50.0);
    const double budget = 10.0 * budget_pick(rng);
    const Point start = world.center(4);
    const Route r = plan_route(world, 0.5, start, 50.0, budget, cand);
    const double best = testing::brute_force_route_value(world, 0.5, start, 50.0, budget, cand);
    CHECK(r.total_price <= best + 1e-9);
    CHECK(validate_route(r, world, 0.5, lookup_in(cand)).empty());
    if (r.total_price == best) ++matched;
  }
  // The insertion heuristic is not exact, but it should usually be.
  CHECK(matched >= 100);
}

TEST_CASE("collected price never drops as the budget grows") {
  const GridWorld world = testing::empty_world(3, 3);
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const auto cand = testing::random_candidates(rng, world, {1, 1}, 8, 0.0);
    double last = 0.0;
    for (int b = 0; b <= 60; b += 10) {
      const Route r = plan_route(world, 0.5, world.center(4), 0.0, b, cand);
      CHECK(r.total_price >= last);
      CHECK(r.duration() <= b + 1e-9);
      last = r.total_price;
    }
  }
}

TEST_CASE("validator flags broken routes") {
  const GridWorld world = testing::empty_world(20, 20);
  const std::vector<Request> reqs{make_request(1, {0, 1}, 100, 160, 3, 5, world)};
  Route r = plan_route(world, 0.5, {0, 0}, 100.0, 10.0, reqs);
  Route early = r;
  early.stops[0].planned_start = 101.0;
  CHECK_FALSE(validate_route(early, world, 0.5, lookup_in(reqs)).empty());
  Route over = r;
  over.budget = 4.0;
  CHECK_FALSE(validate_route(over, world, 0.5, lookup_in(reqs)).empty());
  Route price = r;
  price.total_price = 6.0;
  CHECK_FALSE(validate_route(price, world, 0.5, lookup_in(reqs)).empty());
  Route twice = r;
  twice.stops.push_back(twice.stops[0]);
  CHECK_FALSE(validate_route(twice, world, 0.5, lookup_in(reqs)).empty());
}

TEST_CASE("profit estimates") {
  const GridWorld world = testing::empty_world(20, 20);
  const Point origin = world.center(world.index({10, 10}));
  const int target = world.index({11, 10});  // one km east, 2 minutes

  SUBCASE("empty grid costs travel plus patrol") {
    const ProfitEstimate e = estimate_profit(world, 0.5, origin, 0.0, target, 20.0, {});
    CHECK(e.price == 0.0);
    CHECK(e.time == doctest::Approx(22.0));
    CHECK(e.rate() == 0.0);
  }
  SUBCASE("one feasible request") {
    const Point center = world.center(target);
    const std::vector<Request> reqs{
        make_request(1, {center.x, center.y + 1.0}, 0, 60, 3, 5, world)};
    const ProfitEstimate e = estimate_profit(world, 0.5, origin, 0.0, target, 10.0, reqs);
    CHECK(e.price == 5.0);
    CHECK(e.time == doctest::Approx(7.0));
  }
  SUBCASE("a request expiring before arrival is ignored") {
    const std::vector<Request> reqs{make_request(1, world.center(target), 0, 1.5, 1, 5, world)};
    const ProfitEstimate e = estimate_profit(world, 0.5, origin, 0.0, target, 30.0, reqs);
    CHECK(e.price == 0.0);
  }
  SUBCASE("all patrol levels in one pass agree with single estimates") {
    Rng rng(5);
    const auto cand = testing::random_candidates(rng, world, {11, 10}, 6, 2.0);
    const auto all = estimate_patrols(world, 0.5, origin, 0.0, target, cand);
    for (int p = 0; p < kPatrolLevels; ++p) {
      const ProfitEstimate one =
          estimate_profit(world, 0.5, origin, 0.0, target, p * kPatrolStep, cand);
      CHECK(all[p].price == one.price);
      CHECK(all[p].time == doctest::Approx(one.time));
    }
  }
}

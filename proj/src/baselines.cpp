#include "cdp/baselines.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "cdp/routing.hpp"

namespace cdp {

int random_action(Rng& rng) {
  std::uniform_int_distribution<int> pick(0, kActionCount - 1);
  return pick(rng);
}

int argmax_action(const ActionScores& scores) {
  int best = 0;
  for (int a = 1; a < kActionCount; ++a) {
    if (scores[a] > scores[best]) best = a;
  }
  return best;
}

int greedy_action(const ActionScores& scores, int wait_patrol) {
  const int best = argmax_action(scores);
  if (scores[best] > 0.0) return best;
  return action_index({0, 0, wait_patrol});
}

namespace {

std::array<int, kActionCount> targets_from(const GridWorld& world, Point origin) {
  std::array<int, kActionCount> out{};
  const GridCoord here = world.coord(world.grid_of(origin));
  for (int a = 0; a < kActionCount; ++a) {
    out[a] = world.index(action_target(world, here, action_decode(a)));
  }
  return out;
}

}  // namespace

ActionScores ghav_scores(const Snapshot& snapshot, int courier_id) {
  const GridWorld& world = *snapshot.world;
  const CourierView& courier = snapshot.courier(courier_id);
  const auto targets = targets_from(world, courier.position);
  ActionScores scores{};
  for (int a = 0; a < kActionCount; ++a) {
    // A pure relocation collects nothing on its own.
    const int patrol = action_decode(a).patrol_minutes;
    if (patrol == 0) continue;
    const int g = targets[a];
    const double travel = travel_time(world, courier.position, world.center(g),
                                      snapshot.courier_speed);
    scores[a] = snapshot.pending_price[g] / (travel + patrol);
  }
  return scores;
}

int ghav_action(const Snapshot& snapshot, int courier_id) {
  return greedy_action(ghav_scores(snapshot, courier_id));
}

ActionScores ghep_scores(const Snapshot& snapshot, const CourierView& courier,
                         ProfitScoring scoring) {
  const GridWorld& world = *snapshot.world;
  const auto targets = targets_from(world, courier.available_point);
  std::map<int, std::array<ProfitEstimate, kPatrolLevels>> by_grid;
  ActionScores scores{};
  for (int a = 0; a < kActionCount; ++a) {
    const int g = targets[a];
    auto it = by_grid.find(g);
    if (it == by_grid.end()) {
      it = by_grid.emplace(g, estimate_patrols(snapshot, courier, g)).first;
    }
    const ProfitEstimate& e = it->second[a % kPatrolLevels];
    scores[a] = scoring == ProfitScoring::kRate ? e.rate() : e.price;
  }
  return scores;
}

int ghep_action(const Snapshot& snapshot, int courier_id, ProfitScoring scoring) {
  return greedy_action(ghep_scores(snapshot, snapshot.courier(courier_id), scoring));
}

int mbm_action(const Snapshot& snapshot, int courier_id, const MbmOptions& options) {
  const GridWorld& world = *snapshot.world;
  std::vector<int> rows;
  for (const auto& c : snapshot.couriers) {
    if (c.id == courier_id || c.available_at <= snapshot.now + options.lookahead_minutes) {
      rows.push_back(c.id);
    }
  }
  if (rows.size() <= 1) return ghep_action(snapshot, courier_id, options.scoring);

  // Each courier keeps its best action per distinct target grid; a grid can
  // be matched to one courier only.
  struct GridChoice {
    int grid;
    int action;
    double weight;
  };
  const std::size_t n = rows.size();
  std::vector<std::vector<GridChoice>> choices(n);
  int requester_row = -1;
  for (std::size_t r = 0; r < n; ++r) {
    const CourierView& courier = snapshot.courier(rows[r]);
    if (courier.id == courier_id) requester_row = static_cast<int>(r);
    const ActionScores scores = ghep_scores(snapshot, courier, options.scoring);
    const auto targets = targets_from(world, courier.available_point);
    std::map<int, GridChoice> best;
    for (int a = 0; a < kActionCount; ++a) {
      auto [it, inserted] = best.try_emplace(targets[a], GridChoice{targets[a], a, scores[a]});
      if (!inserted && scores[a] > it->second.weight) it->second = {targets[a], a, scores[a]};
    }
    for (const auto& [grid, choice] : best) {
      if (choice.weight > 0.0) choices[r].push_back(choice);
    }
    // Only a row's n best grids can appear in an optimal matching.
    std::sort(choices[r].begin(), choices[r].end(), [](const GridChoice& x, const GridChoice& y) {
      return x.weight != y.weight ? x.weight > y.weight : x.grid < y.grid;
    });
    if (choices[r].size() > n) choices[r].resize(n);
  }

  std::vector<int> columns;
  for (const auto& row : choices) {
    for (const auto& c : row) columns.push_back(c.grid);
  }
  std::sort(columns.begin(), columns.end());
  columns.erase(std::unique(columns.begin(), columns.end()), columns.end());
  if (columns.empty()) return ghep_action(snapshot, courier_id, options.scoring);

  WeightMatrix weights(static_cast<int>(n), static_cast<int>(columns.size()));
  for (std::size_t r = 0; r < n; ++r) {
    for (const auto& c : choices[r]) {
      const auto col = std::lower_bound(columns.begin(), columns.end(), c.grid) - columns.begin();
      weights.at(static_cast<int>(r), static_cast<int>(col)) = c.weight;
    }
  }
  const Assignment match = max_weight_matching(weights);
  const int col = match.col_of_row[requester_row];
  if (col >= 0 && weights.at(requester_row, col) > 0.0) {
    for (const auto& c : choices[requester_row]) {
      if (c.grid == columns[col]) return c.action;
    }
  }
  return ghep_action(snapshot, courier_id, options.scoring);
}

void RandomDispatcher::begin_episode(const ProblemInstance&, std::uint64_t seed) {
  rng_.seed(seed);
}

int RandomDispatcher::decide(const Snapshot&, int) { return random_action(rng_); }

int GhavDispatcher::decide(const Snapshot& snapshot, int courier_id) {
  return ghav_action(snapshot, courier_id);
}

int GhepDispatcher::decide(const Snapshot& snapshot, int courier_id) {
  return ghep_action(snapshot, courier_id, scoring_);
}

int MbmDispatcher::decide(const Snapshot& snapshot, int courier_id) {
  return mbm_action(snapshot, courier_id, options_);
}

bool is_baseline(std::string_view name) {
  return name == "random" || name == "ghav" || name == "ghep" || name == "ghep-abs" ||
         name == "mbm";
}

std::unique_ptr<Dispatcher> make_baseline(std::string_view name) {
  if (name == "random") return std::make_unique<RandomDispatcher>();
  if (name == "ghav") return std::make_unique<GhavDispatcher>();
  if (name == "ghep") return std::make_unique<GhepDispatcher>();
  if (name == "ghep-abs") return std::make_unique<GhepDispatcher>(ProfitScoring::kAbsolute);
  if (name == "mbm") return std::make_unique<MbmDispatcher>();
  throw std::invalid_argument("unknown baseline policy '" + std::string(name) + "'");
}

FleetDispatcher::FleetDispatcher(std::vector<Dispatcher*> members,
                                 std::vector<int> member_of_courier)
    : members_(std::move(members)), member_of_courier_(std::move(member_of_courier)) {
  for (int m : member_of_courier_) {
    if (m < 0 || m >= static_cast<int>(members_.size())) {
      throw std::invalid_argument("courier mapped to a missing fleet member");
    }
  }
}

void FleetDispatcher::begin_episode(const ProblemInstance& instance, std::uint64_t seed) {
  for (std::size_t k = 0; k < members_.size(); ++k) {
    members_[k]->begin_episode(instance, derive_seed(seed, streams::kEpisode, k));
  }
}

int FleetDispatcher::decide(const Snapshot& snapshot, int courier_id) {
  return members_.at(member_of_courier_.at(courier_id))->decide(snapshot, courier_id);
}

void FleetDispatcher::on_action_complete(const ActionRecord& record) {
  members_.at(member_of_courier_.at(record.courier))->on_action_complete(record);
}

}  // namespace cdp

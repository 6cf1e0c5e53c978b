#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cdp/matching.hpp"
#include "cdp/rng.hpp"
#include "cdp/simulator.hpp"
#include "cdp/snapshot.hpp"

namespace cdp {

using ActionScores = std::array<double, kActionCount>;

inline constexpr int kWaitPatrol = 10;

// How solver-based policies turn a profit estimate into a score.
enum class ProfitScoring { kRate, kAbsolute };

// Uniform over all 100 actions.
int random_action(Rng& rng);

// Pending price of the target grid per minute of travel plus patrol. Patrol-0
// relocations score zero.
ActionScores ghav_scores(const Snapshot& snapshot, int courier_id);
int ghav_action(const Snapshot& snapshot, int courier_id);

// Solver-predicted collectible price, per minute under kRate.
ActionScores ghep_scores(const Snapshot& snapshot, const CourierView& courier,
                         ProfitScoring scoring = ProfitScoring::kRate);
int ghep_action(const Snapshot& snapshot, int courier_id,
                ProfitScoring scoring = ProfitScoring::kRate);

// First index holding the maximum score.
int argmax_action(const ActionScores& scores);

// argmax_action when some score is positive; otherwise stay in the current
// grid for `wait_patrol` minutes instead of drifting toward action 0.
int greedy_action(const ActionScores& scores, int wait_patrol = kWaitPatrol);

struct MbmOptions {
  double lookahead_minutes = 20.0;
  ProfitScoring scoring = ProfitScoring::kRate;
};

// Matches every courier free within the lookahead window to distinct target
// grids and returns the requesting courier's part of the best matching.
int mbm_action(const Snapshot& snapshot, int courier_id, const MbmOptions& options = {});

class RandomDispatcher : public Dispatcher {
 public:
  void begin_episode(const ProblemInstance& instance, std::uint64_t seed) override;
  int decide(const Snapshot& snapshot, int courier_id) override;

 private:
  Rng rng_{0};
};

class GhavDispatcher : public Dispatcher {
 public:
  int decide(const Snapshot& snapshot, int courier_id) override;
};

class GhepDispatcher : public Dispatcher {
 public:
  explicit GhepDispatcher(ProfitScoring scoring = ProfitScoring::kRate)
      : scoring_(scoring) {}
  int decide(const Snapshot& snapshot, int courier_id) override;

 private:
  ProfitScoring scoring_;
};

class MbmDispatcher : public Dispatcher {
 public:
  explicit MbmDispatcher(MbmOptions options = {}) : options_(options) {}
  int decide(const Snapshot& snapshot, int courier_id) override;

 private:
  MbmOptions options_;
};

// random | ghav | ghep | ghep-abs | mbm
std::unique_ptr<Dispatcher> make_baseline(std::string_view name);
bool is_baseline(std::string_view name);

// Routes each courier to the dispatcher of its group. Dispatchers are not
// owned.
class FleetDispatcher : public Dispatcher {
 public:
  FleetDispatcher(std::vector<Dispatcher*> members, std::vector<int> member_of_courier);
  void begin_episode(const ProblemInstance& instance, std::uint64_t seed) override;
  int decide(const Snapshot& snapshot, int courier_id) override;
  void on_action_complete(const ActionRecord& record) override;

 private:
  std::vector<Dispatcher*> members_;
  std::vector<int> member_of_courier_;
};

}  // namespace cdp

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdp/neural.hpp"
#include "cdp/scenario.hpp"
#include "cdp/simulator.hpp"
#include "cdp/state_encoding.hpp"

namespace cdp {

struct Transition {
  std::vector<double> state;
  int action = 0;
  double behavior_prob = 1.0;  // pi_old(a|s) at collection time
  double reward = 0.0;
  double shaped_reward = 0.0;
  std::vector<double> next_state;  // empty when terminal
  bool terminal = false;
  double value_target = 0.0;
  double advantage = 0.0;
  int courier = 0;
  int episode = 0;
  int step = 0;  // decision index within the courier's trajectory
};

// Fixed-capacity FIFO ring. at(0) is the oldest stored transition.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity = 20000);

  // Rejects transitions whose behavior probability is not in (0, 1].
  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Transition& at(std::size_t k) const;
  // Uniform with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest item once full
  std::vector<Transition> items_;
};

// r + alpha * mean(team), where `team` already holds the courier's own
// reward. An empty team contributes zero.
double shape_reward(double reward, std::span<const double> team, double alpha);

// Shaped rewards for every record. The team of a record is every record of
// the same group completing in (decision_time, completion_time].
std::vector<double> shaped_rewards(const std::vector<ActionRecord>& records,
                                   const std::vector<int>& group_of_record, double alpha);

// Fills value_target and advantage of one courier's complete trajectory,
// ordered by step; the last transition must be terminal.
void compute_targets(std::vector<Transition>& trajectory, const DenseNet& value_net,
                     const DenseNet& target_net, double gamma);

// Batch-mean squared error of the value head; `grad` receives its gradient.
double value_loss(const DenseNet& net, const Matrix& states, const Vector& targets,
                  Vector* grad = nullptr);

// Negated batch-mean clipped surrogate, so that descending it ascends the
// surrogate. `grad` receives the gradient of the returned value.
double ppo_loss(const DenseNet& net, const Matrix& states, std::span<const int> actions,
                const Vector& behavior_probs, const Vector& advantages, double clip,
                Vector* grad = nullptr);

enum class ImitationMode : std::uint8_t { kNone, kAll, kMixed };
const char* to_string(ImitationMode mode);
ImitationMode imitation_mode_from_string(std::string_view name);

struct ImitationConfig {
  ImitationMode mode = ImitationMode::kNone;
  int until_episode = 300;  // expert in use for episodes [0, until_episode)
  double probability = 0.2;  // per-decision expert share under kMixed
  std::string expert = "ghep";
};

// A block of consecutive couriers run by one policy. "marl" groups learn;
// any baseline name runs that baseline. Independent marl groups get their
// own networks and memory, the others share one learner.
struct FleetGroup {
  int count = 0;
  std::string policy = "marl";
  bool independent = false;
};

struct TrainConfig {
  int episodes = 10000;
  double gamma = 0.8;
  double alpha = 0.5;
  int n1 = 10;
  int n2 = 10;
  int batch = 1024;
  double lr = 5e-4;
  double clip = 0.2;
  int target_refresh = 10;
  std::size_t memory_capacity = 20000;
  int hidden = 200;
  StateVariant variant = StateVariant::kBasic;
  EncoderOptions encoder;
  ImitationConfig imitation;
  std::vector<FleetGroup> fleet;  // empty: every courier is one shared marl group
  int train_instances = 40;
  int eval_instances = 10;
  int eval_every = 50;  // episodes between greedy evaluations, 0 disables
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// Policy, value and target networks of one learner.
struct LearnerNets {
  DenseNet policy;
  DenseNet value;
  DenseNet target;
};

LearnerNets make_learner_nets(StateVariant variant, int hidden, std::uint64_t seed);

// Samples (training) or takes the most probable action (evaluation) from a
// policy network. While recording, every decision is kept for the trainer.
class MarlDispatcher : public Dispatcher {
 public:
  struct Step {
    int courier = 0;
    int step = 0;
    std::vector<double> state;
    int action = 0;
    double behavior_prob = 1.0;
    double entropy = 0.0;
  };

  MarlDispatcher(const DenseNet* policy, StateVariant variant, bool greedy,
                 EncoderOptions encoder = {});

  // Hands a share of the decisions to `expert` (not owned).
  void set_expert(Dispatcher* expert, double probability);
  void set_recording(bool on) { recording_ = on; }

  void begin_episode(const ProblemInstance& instance, std::uint64_t seed) override;
  int decide(const Snapshot& snapshot, int courier_id) override;

  std::vector<Step> take_steps() { return std::move(steps_); }

 private:
  const DenseNet* policy_;
  StateVariant variant_;
  bool greedy_;
  EncoderOptions encoder_;
  Dispatcher* expert_ = nullptr;
  double expert_probability_ = 0.0;
  bool recording_ = false;
  Rng rng_{0};
  std::vector<int> next_step_;
  std::vector<Step> steps_;
};

struct CurvePoint {
  int episode = 0;
  double train_score = 0.0;
  std::optional<double> eval_score;
  double value_loss = 0.0;
  double mean_entropy = 0.0;
  std::map<int, double> group_revenue;  // training episode revenue per fleet group
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  std::vector<LearnerNets> learners;
  std::vector<int> learner_of_group;  // -1 for baseline groups
  std::vector<FleetGroup> fleet;
  int dropped_transitions = 0;  // expert actions the policy gave probability 0
};

using ProgressFn = std::function<void(const CurvePoint&)>;

// Multi-agent actor-critic training on instances drawn from `scenario`.
TrainResult train(const ScenarioConfig& scenario, const TrainConfig& config,
                  const ProgressFn& progress = {});

// Greedy evaluation of trained learners on one instance. Courier groups
// follow `result.fleet`.
EpisodeResult evaluate_episode(const TrainResult& result, const TrainConfig& config,
                               const ProblemInstance& instance, std::uint64_t seed);

// Resolved fleet for `courier_count` couriers; throws ConfigError when the
// group sizes do not add up.
// The greedy-evaluation set of a training run and the episode seed used for
// its i-th instance.
std::vector<ProblemInstance> held_out_instances(const ScenarioConfig& scenario,
                                                const TrainConfig& config);
std::uint64_t held_out_episode_seed(const TrainConfig& config, std::size_t index);

std::vector<FleetGroup> resolve_fleet(const std::vector<FleetGroup>& fleet, int courier_count);

void write_learning_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

inline constexpr int kCheckpointVersion = 1;
void save_checkpoint(const TrainResult& result, const TrainConfig& config,
                     const ScenarioConfig& scenario, const std::string& path);
struct Checkpoint {
  TrainResult result;
  TrainConfig config;
  nlohmann::json scenario;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cdp

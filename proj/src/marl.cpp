#include "cdp/marl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cdp/baselines.hpp"

namespace cdp {

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay memory capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayMemory::push(Transition t) {
  if (!(t.behavior_prob > 0.0 && t.behavior_prob <= 1.0 + 1e-12)) {
    throw std::invalid_argument("behavior probability must lie in (0, 1]");
  }
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayMemory::at(std::size_t k) const {
  if (k >= items_.size()) throw std::out_of_range("replay memory index out of range");
  return items_.size() < capacity_ ? items_[k] : items_[(head_ + k) % capacity_];
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("cannot sample from an empty replay memory");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(count);
  for (auto& k : out) k = pick(rng);
  return out;
}

double shape_reward(double reward, std::span<const double> team, double alpha) {
  if (team.empty()) return reward;
  const double mean = std::accumulate(team.begin(), team.end(), 0.0) / team.size();
  return reward + alpha * mean;
}

std::vector<double> shaped_rewards(const std::vector<ActionRecord>& records,
                                   const std::vector<int>& group_of_record, double alpha) {
  if (group_of_record.size() != records.size()) {
    throw std::invalid_argument("every record needs a group");
  }
  std::map<int, std::vector<int>> by_group;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    by_group[group_of_record[i]].push_back(i);
  }
  std::vector<double> out(records.size(), 0.0);
  for (auto& [group, members] : by_group) {
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      return records[a].completion_time < records[b].completion_time;
    });
    std::vector<double> times(members.size());
    std::vector<double> prefix(members.size() + 1, 0.0);
    for (std::size_t k = 0; k < members.size(); ++k) {
      times[k] = records[members[k]].completion_time;
      prefix[k + 1] = prefix[k] + records[members[k]].reward;
    }
    for (int i : members) {
      const ActionRecord& r = records[i];
      const auto lo = std::upper_bound(times.begin(), times.end(), r.decision_time) - times.begin();
      const auto hi = std::upper_bound(times.begin(), times.end(), r.completion_time) - times.begin();
      double sum = prefix[hi] - prefix[lo];
      double count = static_cast<double>(hi - lo);
      if (r.completion_time <= r.decision_time) {
        // Zero-length span: the team is the action itself.
        sum += r.reward;
        count += 1.0;
      }
      out[i] = r.reward + (count > 0.0 ? alpha * sum / count : 0.0);
    }
  }
  return out;
}

namespace {

Matrix stack_states(const std::vector<const std::vector<double>*>& states, int rows) {
  Matrix x(rows, static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) {
    if (static_cast<int>(states[j]->size()) != rows) {
      throw std::invalid_argument("state size does not match the network input");
    }
    x.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Vector>(states[j]->data(), rows);
  }
  return x;
}

}  // namespace

void compute_targets(std::vector<Transition>& trajectory, const DenseNet& value_net,
                     const DenseNet& target_net, double gamma) {
  if (trajectory.empty()) return;
  const std::size_t n = trajectory.size();
  for (std::size_t t = 0; t < n; ++t) {
    const bool last = t + 1 == n;
    if (trajectory[t].terminal != last || (!last && trajectory[t].next_state.empty())) {
      throw std::logic_error("trajectory of courier " + std::to_string(trajectory[t].courier) +
                             " is incomplete at step " + std::to_string(trajectory[t].step));
    }
  }
  std::vector<const std::vector<double>*> states;
  std::vector<const std::vector<double>*> next;
  for (const auto& tr : trajectory) {
    states.push_back(&tr.state);
    if (!tr.terminal) next.push_back(&tr.next_state);
  }
  const int in = value_net.input_size();
  const Matrix v = value_net.forward_batch(stack_states(states, in));
  Matrix v_next(1, 0);
  if (!next.empty()) v_next = target_net.forward_batch(stack_states(next, in));

  double ret = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    Transition& tr = trajectory[k];
    const double bootstrap = tr.terminal ? 0.0 : v_next(0, static_cast<Eigen::Index>(k));
    tr.value_target = tr.shaped_reward + gamma * bootstrap;
    ret = tr.shaped_reward + gamma * ret;
    tr.advantage = ret - v(0, static_cast<Eigen::Index>(k));
  }
}

double value_loss(const DenseNet& net, const Matrix& states, const Vector& targets,
                  Vector* grad) {
  DenseNet::Cache cache;
  const Matrix out = net.forward_batch(states, grad != nullptr ? &cache : nullptr);
  const double b = static_cast<double>(states.cols());
  const Vector diff = out.row(0).transpose() - targets;
  if (grad != nullptr) {
    const Matrix upstream = (2.0 / b) * diff.transpose();
    *grad = net.backward_batch(states, cache, upstream);
  }
  return diff.squaredNorm() / b;
}

double ppo_loss(const DenseNet& net, const Matrix& states, std::span<const int> actions,
                const Vector& behavior_probs, const Vector& advantages, double clip,
                Vector* grad) {
  const Eigen::Index b = states.cols();
  if (static_cast<Eigen::Index>(actions.size()) != b || behavior_probs.size() != b ||
      advantages.size() != b) {
    throw std::invalid_argument("ppo batch fields differ in length");
  }
  DenseNet::Cache cache;
  const Matrix logits = net.forward_batch(states, grad != nullptr ? &cache : nullptr);
  Matrix upstream;
  if (grad != nullptr) upstream = Matrix::Zero(logits.rows(), b);
  double total = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    const Vector p = softmax(logits.col(j));
    const int a = actions[j];
    const double rho = p[a] / behavior_probs[j];
    const double adv = advantages[j];
    const double plain = rho * adv;
    const double clipped = std::clamp(rho, 1.0 - clip, 1.0 + clip) * adv;
    total += std::min(plain, clipped);
    if (grad != nullptr && plain <= clipped) {
      // d(rho)/d(logits) = rho * (onehot(a) - p)
      upstream.col(j) = (adv * rho / static_cast<double>(b)) * p;
      upstream(a, j) -= adv * rho / static_cast<double>(b);
    }
  }
  if (grad != nullptr) *grad = net.backward_batch(states, cache, upstream);
  return -total / static_cast<double>(b);
}

const char* to_string(ImitationMode mode) {
  switch (mode) {
    case ImitationMode::kNone:
      return "none";
    case ImitationMode::kAll:
      return "all";
    case ImitationMode::kMixed:
      return "mixed";
  }
  return "none";
}

ImitationMode imitation_mode_from_string(std::string_view name) {
  if (name == "none") return ImitationMode::kNone;
  if (name == "all" || name == "a") return ImitationMode::kAll;
  if (name == "mixed" || name == "b") return ImitationMode::kMixed;
  throw ConfigError("unknown imitation mode '" + std::string(name) + "'");
}

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("train: " + msg); };
  if (c.episodes < 0) fail("episodes must be >= 0");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) fail("gamma must lie in (0, 1)");
  if (!(c.alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(c.clip > 0.0 && c.clip < 1.0)) fail("clip must lie in (0, 1)");
  if (c.n1 < 0 || c.n2 < 0) fail("n1 and n2 must be >= 0");
  if (c.batch < 1) fail("batch must be >= 1");
  if (!(c.lr > 0.0)) fail("lr must be > 0");
  if (c.target_refresh < 1) fail("target_refresh must be >= 1");
  if (c.memory_capacity < 1) fail("memory_capacity must be >= 1");
  if (c.hidden < 1) fail("hidden must be >= 1");
  if (c.train_instances < 1) fail("train_instances must be >= 1");
  if (c.eval_instances < 0) fail("eval_instances must be >= 0");
  if (c.eval_every < 0) fail("eval_every must be >= 0");
  if (!(c.imitation.probability >= 0.0 && c.imitation.probability <= 1.0)) {
    fail("imitation probability must lie in [0, 1]");
  }
  if (c.imitation.mode != ImitationMode::kNone && !is_baseline(c.imitation.expert)) {
    fail("imitation expert must be a baseline policy");
  }
  for (const auto& g : c.fleet) {
    if (g.count < 1) fail("fleet group sizes must be >= 1");
    if (g.policy != "marl" && !is_baseline(g.policy)) {
      fail("unknown fleet policy '" + g.policy + "'");
    }
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json fleet = nlohmann::json::array();
  for (const auto& g : c.fleet) {
    fleet.push_back({{"count", g.count}, {"policy", g.policy}, {"independent", g.independent}});
  }
  return {{"episodes", c.episodes},
          {"gamma", c.gamma},
          {"alpha", c.alpha},
          {"n1", c.n1},
          {"n2", c.n2},
          {"batch", c.batch},
          {"lr", c.lr},
          {"clip", c.clip},
          {"target_refresh", c.target_refresh},
          {"memory_capacity", c.memory_capacity},
          {"hidden", c.hidden},
          {"variant", to_string(c.variant)},
          {"encoder",
           {{"count_norm", c.encoder.count_norm},
            {"price_norm", c.encoder.price_norm},
            {"rate_norm", c.encoder.rate_norm}}},
          {"imitation",
           {{"mode", to_string(c.imitation.mode)},
            {"until_episode", c.imitation.until_episode},
            {"probability", c.imitation.probability},
            {"expert", c.imitation.expert}}},
          {"fleet", fleet},
          {"train_instances", c.train_instances},
          {"eval_instances", c.eval_instances},
          {"eval_every", c.eval_every},
          {"seed", c.seed}};
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train: expected an object");
  const std::string w = "train";
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"episodes", "gamma", "alpha", "n1", "n2", "batch", "lr",
                                  "clip", "target_refresh", "memory_capacity", "hidden",
                                  "variant", "encoder", "imitation", "fleet",
                                  "train_instances", "eval_instances", "eval_every", "seed"};
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError("train." + key + ": unknown field");
    }
  }
  read_field(j, "episodes", c.episodes, w);
  read_field(j, "gamma", c.gamma, w);
  read_field(j, "alpha", c.alpha, w);
  read_field(j, "n1", c.n1, w);
  read_field(j, "n2", c.n2, w);
  read_field(j, "batch", c.batch, w);
  read_field(j, "lr", c.lr, w);
  read_field(j, "clip", c.clip, w);
  read_field(j, "target_refresh", c.target_refresh, w);
  read_field(j, "memory_capacity", c.memory_capacity, w);
  read_field(j, "hidden", c.hidden, w);
  read_field(j, "train_instances", c.train_instances, w);
  read_field(j, "eval_instances", c.eval_instances, w);
  read_field(j, "eval_every", c.eval_every, w);
  read_field(j, "seed", c.seed, w);
  if (j.contains("variant")) {
    c.variant = state_variant_from_string(j.at("variant").get<std::string>());
  }
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    read_field(e, "count_norm", c.encoder.count_norm, w + ".encoder");
    read_field(e, "price_norm", c.encoder.price_norm, w + ".encoder");
    read_field(e, "rate_norm", c.encoder.rate_norm, w + ".encoder");
  }
  if (j.contains("imitation")) {
    const auto& m = j.at("imitation");
    if (m.contains("mode")) c.imitation.mode = imitation_mode_from_string(m.at("mode").get<std::string>());
    read_field(m, "until_episode", c.imitation.until_episode, w + ".imitation");
    read_field(m, "probability", c.imitation.probability, w + ".imitation");
    read_field(m, "expert", c.imitation.expert, w + ".imitation");
  }
  if (j.contains("fleet")) {
    c.fleet.clear();
    for (const auto& g : j.at("fleet")) {
      FleetGroup group;
      read_field(g, "count", group.count, w + ".fleet");
      read_field(g, "policy", group.policy, w + ".fleet");
      read_field(g, "independent", group.independent, w + ".fleet");
      c.fleet.push_back(group);
    }
  }
  validate(c);
  return c;
}

LearnerNets make_learner_nets(StateVariant variant, int hidden, std::uint64_t seed) {
  const int in = state_size(variant);
  LearnerNets nets{DenseNet(in, hidden, kActionCount), DenseNet(in, hidden, 1), {}};
  nets.policy.init_uniform(derive_seed(seed, streams::kNetInit, 0));
  nets.value.init_uniform(derive_seed(seed, streams::kNetInit, 1));
  nets.target = nets.value;
  return nets;
}

MarlDispatcher::MarlDispatcher(const DenseNet* policy, StateVariant variant, bool greedy,
                               EncoderOptions encoder)
    : policy_(policy), variant_(variant), greedy_(greedy), encoder_(encoder) {
  if (policy_ == nullptr) throw std::invalid_argument("marl dispatcher needs a policy");
  if (policy_->input_size() != state_size(variant) || policy_->output_size() != kActionCount) {
    throw ConfigError("policy network shape does not match the '" +
                      std::string(to_string(variant)) + "' state");
  }
}

void MarlDispatcher::set_expert(Dispatcher* expert, double probability) {
  expert_ = expert;
  expert_probability_ = expert != nullptr ? probability : 0.0;
}

void MarlDispatcher::begin_episode(const ProblemInstance& instance, std::uint64_t seed) {
  rng_.seed(seed);
  next_step_.assign(instance.meta.courier_count, 0);
  steps_.clear();
  if (expert_ != nullptr) expert_->begin_episode(instance, derive_seed(seed, streams::kEpisode, 0));
}

int MarlDispatcher::decide(const Snapshot& snapshot, int courier_id) {
  StateFeatures features = encode_state(snapshot, courier_id, variant_, encoder_);
  const Vector probs = softmax(policy_->forward(features.data));

  bool use_expert = false;
  if (expert_ != nullptr && expert_probability_ > 0.0) {
    if (expert_probability_ >= 1.0) {
      use_expert = true;
    } else {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      use_expert = unit(rng_) < expert_probability_;
    }
  }
  int action;
  if (use_expert) {
    action = expert_->decide(snapshot, courier_id);
  } else {
    action = greedy_ ? greedy_index(probs) : sample_index(probs, rng_);
  }

  if (courier_id >= static_cast<int>(next_step_.size())) next_step_.resize(courier_id + 1, 0);
  const int step = next_step_[courier_id]++;
  if (recording_) {
    steps_.push_back(
        {courier_id, step, std::move(features.data), action, probs[action], entropy(probs)});
  }
  return action;
}

std::vector<FleetGroup> resolve_fleet(const std::vector<FleetGroup>& fleet, int courier_count) {
  if (fleet.empty()) return {FleetGroup{courier_count, "marl", false}};
  int total = 0;
  for (const auto& g : fleet) total += g.count;
  if (total != courier_count) {
    throw ConfigError("fleet groups cover " + std::to_string(total) + " couriers, scenario has " +
                      std::to_string(courier_count));
  }
  return fleet;
}

namespace {

struct FleetSetup {
  std::vector<std::unique_ptr<Dispatcher>> owned;
  std::vector<Dispatcher*> members;
  std::vector<MarlDispatcher*> marl;  // per group, null for baselines
  std::vector<int> fleet_of;          // group per courier
};

FleetSetup build_fleet(const std::vector<FleetGroup>& fleet,
                       const std::vector<int>& learner_of_group,
                       const std::vector<LearnerNets>& learners, const TrainConfig& config,
                       bool greedy) {
  FleetSetup s;
  for (std::size_t g = 0; g < fleet.size(); ++g) {
    if (learner_of_group[g] >= 0) {
      auto d = std::make_unique<MarlDispatcher>(&learners[learner_of_group[g]].policy,
                                                config.variant, greedy, config.encoder);
      s.marl.push_back(d.get());
      s.owned.push_back(std::move(d));
    } else {
      s.marl.push_back(nullptr);
      s.owned.push_back(make_baseline(fleet[g].policy));
    }
    s.members.push_back(s.owned.back().get());
    for (int k = 0; k < fleet[g].count; ++k) s.fleet_of.push_back(static_cast<int>(g));
  }
  return s;
}

ProblemInstance instance_for(const ScenarioConfig& scenario, std::uint64_t seed) {
  ScenarioConfig c = scenario;
  c.seed = seed;
  return build_instance(c);
}

struct LearnerState {
  ReplayMemory memory;
  AdamState policy_adam;
  AdamState value_adam;
};

Matrix gather_states(const ReplayMemory& memory, const std::vector<std::size_t>& idx, int rows) {
  Matrix x(rows, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto& s = memory.at(idx[j]).state;
    x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Vector>(s.data(), rows);
  }
  return x;
}

}  // namespace

EpisodeResult evaluate_episode(const TrainResult& result, const TrainConfig& config,
                               const ProblemInstance& instance, std::uint64_t seed) {
  FleetSetup setup =
      build_fleet(result.fleet, result.learner_of_group, result.learners, config, true);
  FleetDispatcher dispatcher(setup.members, setup.fleet_of);
  SimOptions options;
  options.fleet_of = setup.fleet_of;
  return run_episode(instance, dispatcher, seed, options);
}

TrainResult train(const ScenarioConfig& scenario, const TrainConfig& config,
                  const ProgressFn& progress) {
  validate(config);
  TrainResult out;
  out.fleet = resolve_fleet(config.fleet, scenario.courier_count);

  int shared = -1;
  for (const auto& g : out.fleet) {
    if (g.policy != "marl") {
      out.learner_of_group.push_back(-1);
    } else if (g.independent) {
      out.learner_of_group.push_back(static_cast<int>(out.learners.size()));
      out.learners.push_back({});
    } else {
      if (shared < 0) {
        shared = static_cast<int>(out.learners.size());
        out.learners.push_back({});
      }
      out.learner_of_group.push_back(shared);
    }
  }
  std::vector<LearnerState> states;
  for (std::size_t l = 0; l < out.learners.size(); ++l) {
    out.learners[l] = make_learner_nets(config.variant, config.hidden,
                                        derive_seed(config.seed, streams::kNetInit, l));
    states.push_back({ReplayMemory(config.memory_capacity), {}, {}});
  }

  std::vector<ProblemInstance> train_set;
  for (int i = 0; i < config.train_instances; ++i) {
    train_set.push_back(instance_for(scenario, derive_seed(config.seed, streams::kTraining, i)));
  }
  const std::vector<ProblemInstance> eval_set = held_out_instances(scenario, config);

  FleetSetup setup = build_fleet(out.fleet, out.learner_of_group, out.learners, config, false);
  FleetDispatcher dispatcher(setup.members, setup.fleet_of);
  std::vector<std::unique_ptr<Dispatcher>> experts;
  for (auto* m : setup.marl) {
    if (m == nullptr) continue;
    m->set_recording(true);
    experts.push_back(config.imitation.mode != ImitationMode::kNone
                          ? make_baseline(config.imitation.expert)
                          : nullptr);
  }
  SimOptions sim_options;
  sim_options.fleet_of = setup.fleet_of;

  Rng pick_rng(derive_seed(config.seed, streams::kInstancePick, 0));
  Rng batch_rng(derive_seed(config.seed, streams::kBatches, 0));
  std::uniform_int_distribution<int> pick(0, config.train_instances - 1);
  AdamConfig adam;
  adam.lr = config.lr;
  const int input = state_size(config.variant);

  for (int ep = 0; ep < config.episodes; ++ep) {
    const ProblemInstance& instance = train_set[pick(pick_rng)];
    double expert_share = 0.0;
    if (ep < config.imitation.until_episode) {
      if (config.imitation.mode == ImitationMode::kAll) expert_share = 1.0;
      if (config.imitation.mode == ImitationMode::kMixed) expert_share = config.imitation.probability;
    }
    for (std::size_t g = 0, e = 0; g < setup.marl.size(); ++g) {
      if (setup.marl[g] == nullptr) continue;
      setup.marl[g]->set_expert(expert_share > 0.0 ? experts[e].get() : nullptr, expert_share);
      ++e;
    }

    const EpisodeResult result = run_episode(
        instance, dispatcher, derive_seed(config.seed, streams::kEpisode, ep), sim_options);

    // Stage 1 bookkeeping: turn decisions and completions into transitions.
    std::vector<int> group_of_record(result.actions.size());
    for (std::size_t i = 0; i < result.actions.size(); ++i) {
      group_of_record[i] = result.actions[i].fleet;
    }
    const std::vector<double> shaped = shaped_rewards(result.actions, group_of_record, config.alpha);
    double entropy_sum = 0.0;
    int entropy_count = 0;
    for (std::size_t g = 0; g < setup.marl.size(); ++g) {
      if (setup.marl[g] == nullptr) continue;
      const int l = out.learner_of_group[g];
      std::vector<MarlDispatcher::Step> steps = setup.marl[g]->take_steps();
      std::map<int, std::vector<MarlDispatcher::Step*>> by_courier;
      for (auto& s : steps) {
        by_courier[s.courier].push_back(&s);
        entropy_sum += s.entropy;
        ++entropy_count;
      }
      for (auto& [courier, list] : by_courier) {
        const auto& record_ids = result.actions_by_courier.at(courier);
        if (record_ids.size() != list.size()) {
          throw std::logic_error("courier " + std::to_string(courier) + " made " +
                                 std::to_string(list.size()) + " decisions but completed " +
                                 std::to_string(record_ids.size()));
        }
        std::vector<Transition> trajectory(list.size());
        for (std::size_t k = 0; k < list.size(); ++k) {
          const ActionRecord& rec = result.actions[record_ids[k]];
          Transition& tr = trajectory[k];
          tr.state = std::move(list[k]->state);
          tr.action = list[k]->action;
          tr.behavior_prob = list[k]->behavior_prob;
          tr.reward = rec.reward;
          tr.shaped_reward = shaped[record_ids[k]];
          tr.courier = courier;
          tr.episode = ep;
          tr.step = list[k]->step;
          tr.terminal = k + 1 == list.size();
        }
        for (std::size_t k = 0; k + 1 < trajectory.size(); ++k) {
          trajectory[k].next_state = trajectory[k + 1].state;
        }
        compute_targets(trajectory, out.learners[l].value, out.learners[l].target, config.gamma);
        for (auto& tr : trajectory) {
          if (tr.behavior_prob <= 0.0) {
            ++out.dropped_transitions;
            continue;
          }
          states[l].memory.push(std::move(tr));
        }
      }
    }

    // Stage 2: value then policy updates per learner.
    double loss_sum = 0.0;
    int loss_count = 0;
    for (std::size_t l = 0; l < out.learners.size(); ++l) {
      LearnerState& st = states[l];
      LearnerNets& nets = out.learners[l];
      if (st.memory.empty()) continue;
      for (int it = 0; it < config.n1; ++it) {
        const auto idx = st.memory.sample_indices(config.batch, batch_rng);
        const Matrix x = gather_states(st.memory, idx, input);
        Vector targets(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) targets[j] = st.memory.at(idx[j]).value_target;
        Vector grad;
        loss_sum += value_loss(nets.value, x, targets, &grad);
        ++loss_count;
        adam_step(nets.value.parameters(), grad, st.value_adam, adam);
      }
      for (int it = 0; it < config.n2; ++it) {
        const auto idx = st.memory.sample_indices(config.batch, batch_rng);
        const Matrix x = gather_states(st.memory, idx, input);
        std::vector<int> actions(idx.size());
        Vector behavior(static_cast<Eigen::Index>(idx.size()));
        Vector adv(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
          const Transition& tr = st.memory.at(idx[j]);
          actions[j] = tr.action;
          behavior[j] = tr.behavior_prob;
          adv[j] = tr.advantage;
        }
        Vector grad;
        ppo_loss(nets.policy, x, actions, behavior, adv, config.clip, &grad);
        adam_step(nets.policy.parameters(), grad, st.policy_adam, adam);
      }
      if ((ep + 1) % config.target_refresh == 0) nets.target = nets.value;
    }

    CurvePoint point;
    point.episode = ep;
    point.train_score = result.score;
    point.value_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    point.mean_entropy = entropy_count > 0 ? entropy_sum / entropy_count : 0.0;
    point.group_revenue = result.fleet_revenue;
    const bool last = ep + 1 == config.episodes;
    if (!eval_set.empty() && config.eval_every > 0 && ((ep + 1) % config.eval_every == 0 || last)) {
      double sum = 0.0;
      for (std::size_t i = 0; i < eval_set.size(); ++i) {
        sum += evaluate_episode(out, config, eval_set[i], held_out_episode_seed(config, i)).score;
      }
      point.eval_score = sum / static_cast<double>(eval_set.size());
    }
    out.curve.push_back(point);
    if (progress) progress(point);
  }
  return out;
}

std::vector<ProblemInstance> held_out_instances(const ScenarioConfig& scenario,
                                                const TrainConfig& config) {
  std::vector<ProblemInstance> out;
  for (int i = 0; i < config.eval_instances; ++i) {
    out.push_back(instance_for(scenario, derive_seed(config.seed, streams::kHeldOut, i)));
  }
  return out;
}

std::uint64_t held_out_episode_seed(const TrainConfig& config, std::size_t index) {
  return derive_seed(config.seed, streams::kHeldOut, 1000 + index);
}

void write_learning_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  // One revenue column per fleet group seen anywhere in the curve.
  std::set<int> groups;
  for (const auto& p : curve) {
    for (const auto& [g, v] : p.group_revenue) groups.insert(g);
  }
  f << "episode,train_score,eval_score,value_loss,mean_entropy";
  for (int g : groups) f << ",group" << g << "_revenue";
  f << '\n';
  char buf[256];
  for (const auto& p : curve) {
    char eval[32] = "";
    if (p.eval_score) std::snprintf(eval, sizeof(eval), "%.6f", *p.eval_score);
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%s,%.6g,%.6f", p.episode, p.train_score, eval,
                  p.value_loss, p.mean_entropy);
    f << buf;
    for (int g : groups) {
      const auto it = p.group_revenue.find(g);
      std::snprintf(buf, sizeof(buf), ",%.4f", it == p.group_revenue.end() ? 0.0 : it->second);
      f << buf;
    }
    f << '\n';
  }
}

void save_checkpoint(const TrainResult& result, const TrainConfig& config,
                     const ScenarioConfig& scenario, const std::string& path) {
  nlohmann::json learners = nlohmann::json::array();
  for (const auto& l : result.learners) {
    learners.push_back({{"policy", net_to_json(l.policy)},
                        {"value", net_to_json(l.value)},
                        {"target", net_to_json(l.target)}});
  }
  nlohmann::json fleet = nlohmann::json::array();
  for (const auto& g : result.fleet) {
    fleet.push_back({{"count", g.count}, {"policy", g.policy}, {"independent", g.independent}});
  }
  const nlohmann::json j = {{"format", "cdp-marl-checkpoint"},
                            {"version", kCheckpointVersion},
                            {"train", to_json(config)},
                            {"scenario", scenario_to_json(scenario)},
                            {"fleet", fleet},
                            {"learner_of_group", result.learner_of_group},
                            {"learners", learners}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (j.value("format", "") != "cdp-marl-checkpoint") {
    throw SchemaError(path + ": not a checkpoint file");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw SchemaError(path + ": unsupported checkpoint version " +
                      std::to_string(j.value("version", 0)));
  }
  Checkpoint ck;
  ck.config = train_config_from_json(j.at("train"));
  ck.scenario = j.at("scenario");
  for (const auto& g : j.at("fleet")) {
    ck.result.fleet.push_back(
        {g.at("count").get<int>(), g.at("policy").get<std::string>(), g.at("independent").get<bool>()});
  }
  ck.result.learner_of_group = j.at("learner_of_group").get<std::vector<int>>();
  const int in = state_size(ck.config.variant);
  for (const auto& l : j.at("learners")) {
    LearnerNets nets{net_from_json(l.at("policy")), net_from_json(l.at("value")),
                     net_from_json(l.at("target"))};
    if (nets.policy.input_size() != in || nets.policy.output_size() != kActionCount ||
        nets.value.input_size() != in || nets.value.output_size() != 1) {
      throw SchemaError(path + ": network shapes do not match the '" +
                        std::string(to_string(ck.config.variant)) + "' state");
    }
    ck.result.learners.push_back(std::move(nets));
  }
  for (int l : ck.result.learner_of_group) {
    if (l >= static_cast<int>(ck.result.learners.size())) {
      throw SchemaError(path + ": fleet refers to a missing learner");
    }
  }
  return ck;
}

}  // namespace cdp

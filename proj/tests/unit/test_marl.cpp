#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "cdp/baselines.hpp"
#include "cdp/marl.hpp"
#include "support.hpp"

using namespace cdp;

namespace {

ActionRecord record(int fleet, double decided, double completed, double reward) {
  ActionRecord r;
  r.fleet = fleet;
  r.decision_time = decided;
  r.completion_time = completed;
  r.reward = reward;
  return r;
}

Transition transition(std::vector<double> state, double shaped) {
  Transition t;
  t.state = std::move(state);
  t.shaped_reward = shaped;
  t.reward = shaped;
  return t;
}

DenseNet zero_net(int input, int output) {
  DenseNet net(input, 3, output);
  net.parameters().setZero();
  return net;
}

Matrix random_matrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

ScenarioConfig tiny_scenario() {
  ScenarioConfig c = scenario_preset("desk");
  c.horizon = 120.0;
  c.periods = 2;
  c.intense_rates = {0.2, 0.2};
  c.peripheral_rates = {0.05, 0.05};
  c.rate_scale = 1.0;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.episodes = 3;
  t.hidden = 16;
  t.batch = 32;
  t.n1 = 2;
  t.n2 = 2;
  t.train_instances = 2;
  t.eval_instances = 1;
  t.eval_every = 3;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("reward shaping arithmetic") {
  const std::vector<double> team{10.0, 4.0, 8.0};
  CHECK(shape_reward(10.0, team, 0.5) == doctest::Approx(10.0 + 0.5 * 22.0 / 3.0));
  CHECK(shape_reward(10.0, team, 0.0) == 10.0);
  const std::vector<double> solo{7.0};
  CHECK(shape_reward(7.0, solo, 0.5) == doctest::Approx(10.5));
}

TEST_CASE("team rewards come from the same group inside the action span") {
  std::vector<ActionRecord> records{
      record(0, 0.0, 20.0, 10.0),  // the action being shaped
      record(0, 0.0, 5.0, 4.0),    // teammate, inside (0, 20]
      record(0, 6.0, 20.0, 8.0),   // teammate, on the closed end
      record(0, 21.0, 30.0, 50.0), // after the span
      record(1, 0.0, 10.0, 99.0),  // other group
  };
  const std::vector<int> groups{0, 0, 0, 0, 1};
  const auto shaped = shaped_rewards(records, groups, 0.5);
  CHECK(shaped[0] == doctest::Approx(10.0 + 0.5 * (10.0 + 4.0 + 8.0) / 3.0));
  CHECK(shaped[4] == doctest::Approx(99.0 * 1.5));  // alone in its group
  const auto plain = shaped_rewards(records, groups, 0.0);
  for (std::size_t k = 0; k < records.size(); ++k) CHECK(plain[k] == records[k].reward);

  std::vector<ActionRecord> instant{record(0, 3.0, 3.0, 2.0)};
  CHECK(shaped_rewards(instant, {0}, 0.5)[0] == doctest::Approx(3.0));
  CHECK_THROWS_AS(shaped_rewards(records, {0}, 0.5), std::invalid_argument);
}

TEST_CASE("targets and advantages") {
  const DenseNet zero = zero_net(2, 1);

  SUBCASE("single terminal step") {
    std::vector<Transition> traj{transition({0.0, 0.0}, 5.0)};
    traj[0].terminal = true;
    DenseNet value(2, 3, 1);
    value.init_uniform(3);
    compute_targets(traj, value, zero, 0.8);
    CHECK(traj[0].value_target == 5.0);
    CHECK(traj[0].advantage == doctest::Approx(5.0 - value.forward(traj[0].state)(0)));
  }
  SUBCASE("two steps with zero critics") {
    std::vector<Transition> traj{transition({1.0, 0.0}, 2.0), transition({0.0, 1.0}, 3.0)};
    traj[0].next_state = traj[1].state;
    traj[1].terminal = true;
    compute_targets(traj, zero, zero, 0.8);
    CHECK(traj[0].advantage == doctest::Approx(4.4));
    CHECK(traj[1].advantage == doctest::Approx(3.0));
    CHECK(traj[0].value_target == doctest::Approx(2.0));
  }
  SUBCASE("bootstrap from the target network") {
    DenseNet target = zero_net(2, 1);
    target.b2()(0) = 10.0;
    std::vector<Transition> traj{transition({1.0, 0.0}, 2.0), transition({0.0, 1.0}, 3.0)};
    traj[0].next_state = traj[1].state;
    traj[1].terminal = true;
    compute_targets(traj, zero, target, 0.8);
    CHECK(traj[0].value_target == doctest::Approx(2.0 + 0.8 * 10.0));
    CHECK(traj[1].value_target == doctest::Approx(3.0));
  }
  SUBCASE("myopic limit") {
    DenseNet value(2, 3, 1);
    value.init_uniform(4);
    std::vector<Transition> traj{transition({1.0, 0.0}, 2.0), transition({0.0, 1.0}, 3.0)};
    traj[0].next_state = traj[1].state;
    traj[1].terminal = true;
    compute_targets(traj, value, value, 0.0);
    for (const auto& t : traj) {
      CHECK(t.advantage == doctest::Approx(t.shaped_reward - value.forward(t.state)(0)));
    }
  }
  SUBCASE("an unterminated trajectory is an error") {
    std::vector<Transition> traj{transition({1.0, 0.0}, 2.0)};
    CHECK_THROWS_AS(compute_targets(traj, zero, zero, 0.8), std::logic_error);
  }
}

TEST_CASE("replay memory") {
  ReplayMemory memory(3);
  for (int k = 0; k < 5; ++k) {
    Transition t;
    t.step = k;
    memory.push(t);
  }
  CHECK(memory.size() == 3u);
  CHECK(memory.at(0).step == 2);
  CHECK(memory.at(2).step == 4);
  CHECK_THROWS_AS(memory.at(3), std::out_of_range);

  Transition zero;
  zero.behavior_prob = 0.0;
  CHECK_THROWS_AS(memory.push(zero), std::invalid_argument);
  Transition above;
  above.behavior_prob = 1.5;
  CHECK_THROWS_AS(memory.push(above), std::invalid_argument);

  Rng rng(1);
  for (std::size_t k : memory.sample_indices(50, rng)) CHECK(k < 3u);
  ReplayMemory empty(2);
  CHECK_THROWS_AS(empty.sample_indices(1, rng), std::logic_error);
}

TEST_CASE("value loss gradient") {
  Rng rng(6);
  DenseNet net(5, 8, 1);
  net.init_uniform(2);
  const Matrix x = random_matrix(rng, 5, 1);
  Vector target(1);
  target << 0.7;
  Vector grad;
  value_loss(net, x, target, &grad);
  // 2 (V - target) dV/dtheta
  DenseNet::Cache cache;
  const double v = net.forward_batch(x, &cache)(0, 0);
  const Vector dv = net.backward_batch(x, cache, Matrix::Ones(1, 1));
  CHECK((grad - 2.0 * (v - 0.7) * dv).norm() <= 1e-12 * (1.0 + grad.norm()));

  auto f = [&](const Vector& theta) {
    DenseNet probe = net;
    probe.set_parameters(theta);
    return value_loss(probe, x, target);
  };
  CHECK(max_relative_error(f, net.parameters(), grad) <= 1e-4);
}

TEST_CASE("ppo surrogate gradient") {
  Rng rng(7);
  DenseNet net(6, 10, 5);
  net.init_uniform(3);
  const int b = 8;
  const Matrix x = random_matrix(rng, 6, b);
  const Matrix logits = net.forward_batch(x);
  std::uniform_int_distribution<int> act(0, 4);
  std::vector<int> actions(b);
  Vector probs(b), adv(b);
  for (int j = 0; j < b; ++j) {
    actions[j] = act(rng);
    probs[j] = softmax(logits.col(j))[actions[j]];
    adv[j] = j % 2 == 0 ? 1.5 : -0.8;
  }

  SUBCASE("at ratio one the surrogate is the policy gradient") {
    Vector grad;
    const double loss = ppo_loss(net, x, actions, probs, adv, 0.2, &grad);
    CHECK(loss == doctest::Approx(-adv.mean()));
    DenseNet::Cache cache;
    const Matrix out = net.forward_batch(x, &cache);
    Matrix up = Matrix::Zero(5, b);
    for (int j = 0; j < b; ++j) {
      const Vector p = softmax(out.col(j));
      up.col(j) = adv[j] * p / b;
      up(actions[j], j) -= adv[j] / b;
    }
    const Vector expect = net.backward_batch(x, cache, up);  // -mean(A grad log pi)
    CHECK((grad - expect).norm() <= 1e-10 * (1.0 + expect.norm()));
  }
  SUBCASE("finite differences away from the clip edges") {
    Vector behavior = probs;
    for (int j = 0; j < b; ++j) behavior[j] = probs[j] / (j % 3 == 0 ? 1.5 : 0.95);
    Vector grad;
    ppo_loss(net, x, actions, behavior, adv, 0.2, &grad);
    auto f = [&](const Vector& theta) {
      DenseNet probe = net;
      probe.set_parameters(theta);
      return ppo_loss(probe, x, actions, behavior, adv, 0.2);
    };
    CHECK(max_relative_error(f, net.parameters(), grad) <= 1e-4);
  }
  SUBCASE("clipped positive advantage has no gradient") {
    Vector behavior = probs / 1.5;
    Vector positive = Vector::Constant(b, 2.0);
    Vector grad;
    const double loss = ppo_loss(net, x, actions, behavior, positive, 0.2, &grad);
    CHECK(loss == doctest::Approx(-1.2 * 2.0));
    CHECK(grad.isZero());
  }
  CHECK_THROWS_AS(ppo_loss(net, x, std::vector<int>{0}, probs, adv, 0.2), std::invalid_argument);
}

TEST_CASE("value network overfits a small memory") {
  Rng rng(10);
  DenseNet net(state_size(StateVariant::kBasic), 200, 1);
  net.init_uniform(1);
  const Matrix x = random_matrix(rng, net.input_size(), 10);
  Vector targets(10);
  for (int k = 0; k < 10; ++k) targets[k] = 2.0 * k - 5.0;
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  const double initial = value_loss(net, x, targets);
  double loss = initial;
  for (int it = 0; it < 200; ++it) {
    Vector grad;
    loss = value_loss(net, x, targets, &grad);
    adam_step(net.parameters(), grad, state, cfg);
  }
  loss = value_loss(net, x, targets);
  CHECK(loss < 1e-3 * initial);
}

TEST_CASE("marl dispatcher") {
  const GridWorld world = testing::empty_world(8, 8);
  const std::vector<Request> pending{
      testing::make_request(0, world.center(world.index({5, 4})), 0, 60, 2, 5, world)};
  const Snapshot s =
      testing::snapshot_of(world, pending, {testing::idle_courier(0, world, {4, 4})});
  DenseNet policy(state_size(StateVariant::kBasic), 8, kActionCount);
  policy.init_uniform(2);
  const StateFeatures f = encode_state(s, 0, StateVariant::kBasic);
  const Vector probs = softmax(policy.forward(f.data));
  ProblemInstance inst;
  inst.meta.courier_count = 1;

  SUBCASE("greedy picks the most likely action") {
    MarlDispatcher d(&policy, StateVariant::kBasic, true);
    d.begin_episode(inst, 1);
    CHECK(d.decide(s, 0) == greedy_index(probs));
  }
  SUBCASE("recorded steps carry the behavior probability") {
    MarlDispatcher d(&policy, StateVariant::kBasic, false);
    d.set_recording(true);
    d.begin_episode(inst, 1);
    const int a = d.decide(s, 0);
    const int b = d.decide(s, 0);
    const auto steps = d.take_steps();
    REQUIRE(steps.size() == 2u);
    CHECK(steps[0].action == a);
    CHECK(steps[1].action == b);
    CHECK(steps[1].step == 1);
    CHECK(steps[0].behavior_prob == doctest::Approx(probs[a]));
    CHECK(steps[0].state == f.data);
  }
  SUBCASE("an expert drives every decision at probability one") {
    GhavDispatcher expert;
    MarlDispatcher d(&policy, StateVariant::kBasic, false);
    d.set_expert(&expert, 1.0);
    d.set_recording(true);
    d.begin_episode(inst, 1);
    const int a = d.decide(s, 0);
    CHECK(a == ghav_action(s, 0));
    CHECK(d.take_steps()[0].behavior_prob == doctest::Approx(probs[a]));
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(MarlDispatcher(&policy, StateVariant::kExpectedProfit, true), ConfigError);
  }
}

TEST_CASE("training without updates reproduces a plain stochastic run") {
  const ScenarioConfig scenario = tiny_scenario();
  TrainConfig cfg = tiny_train();
  cfg.episodes = 1;
  cfg.n1 = 0;
  cfg.n2 = 0;
  cfg.train_instances = 1;
  cfg.eval_instances = 0;
  const TrainResult trained = train(scenario, cfg);
  REQUIRE(trained.curve.size() == 1u);

  const LearnerNets init =
      make_learner_nets(cfg.variant, cfg.hidden, derive_seed(cfg.seed, streams::kNetInit, 0));
  CHECK(trained.learners[0].policy.parameters() == init.policy.parameters());

  ScenarioConfig c = scenario;
  c.seed = derive_seed(cfg.seed, streams::kTraining, 0);
  const ProblemInstance inst = build_instance(c);
  MarlDispatcher marl(&init.policy, cfg.variant, false);
  FleetDispatcher fleet({&marl}, std::vector<int>(scenario.courier_count, 0));
  const EpisodeResult plain =
      run_episode(inst, fleet, derive_seed(cfg.seed, streams::kEpisode, 0));
  CHECK(trained.curve[0].train_score == plain.score);
}

TEST_CASE("mixed fleet reports revenue per group") {
  ScenarioConfig scenario = tiny_scenario();
  scenario.courier_count = 10;
  TrainConfig cfg = tiny_train();
  cfg.fleet = {{5, "marl", false}, {5, "random", false}};
  const TrainResult r = train(scenario, cfg);
  CHECK(r.learner_of_group == std::vector<int>{0, -1});
  CHECK(r.learners.size() == 1u);
  for (const auto& p : r.curve) {
    CHECK(p.group_revenue.size() <= 2u);
    for (const auto& [g, v] : p.group_revenue) {
      CHECK((g == 0 || g == 1));
      CHECK(v >= 0.0);
    }
  }
  ScenarioConfig c = scenario;
  c.seed = 77;
  const EpisodeResult e = evaluate_episode(r, cfg, build_instance(c), 1);
  double total = 0.0;
  for (const auto& [g, v] : e.fleet_revenue) total += v;
  CHECK(total == doctest::Approx(e.served_price));

  const std::string path = "mixed_curve.csv";
  write_learning_curve_csv(r.curve, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "episode,train_score,eval_score,value_loss,mean_entropy,group0_revenue,group1_revenue");
  std::remove(path.c_str());

  cfg.fleet = {{3, "marl", false}, {3, "random", false}};
  CHECK_THROWS_AS(train(scenario, cfg), ConfigError);
}

TEST_CASE("training is reproducible and checkpoints round trip") {
  const ScenarioConfig scenario = tiny_scenario();
  const TrainConfig cfg = tiny_train();
  const TrainResult a = train(scenario, cfg);
  const TrainResult b = train(scenario, cfg);
  REQUIRE(a.curve.size() == 3u);
  CHECK(a.curve.back().eval_score.has_value());
  CHECK(a.learners[0].policy.parameters() == b.learners[0].policy.parameters());
  CHECK(*a.curve.back().eval_score == *b.curve.back().eval_score);

  const std::string path = "marl_checkpoint_test.json";
  save_checkpoint(a, cfg, scenario, path);
  const Checkpoint ck = load_checkpoint(path);
  std::remove(path.c_str());
  CHECK(ck.result.learners[0].policy.parameters() == a.learners[0].policy.parameters());
  CHECK(ck.result.learners[0].value.parameters() == a.learners[0].value.parameters());
  CHECK(to_json(ck.config) == to_json(cfg));
  CHECK(ck.scenario == scenario_to_json(scenario));

  ScenarioConfig c = scenario;
  c.seed = 31;
  const ProblemInstance inst = build_instance(c);
  CHECK(evaluate_episode(ck.result, ck.config, inst, 4).score ==
        evaluate_episode(a, cfg, inst, 4).score);
  CHECK_THROWS(load_checkpoint("no_such_checkpoint.json"));
}

TEST_CASE("train config json") {
  TrainConfig cfg;
  cfg.variant = StateVariant::kExpectedProfit;
  cfg.imitation.mode = ImitationMode::kMixed;
  cfg.fleet = {{5, "marl", true}, {5, "random", false}};
  const TrainConfig back = train_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  nlohmann::json bad = to_json(cfg);
  bad["momentum"] = 0.9;
  CHECK_THROWS_AS(train_config_from_json(bad), ConfigError);
  nlohmann::json gamma = to_json(cfg);
  gamma["gamma"] = 1.5;
  CHECK_THROWS_AS(train_config_from_json(gamma), ConfigError);
  CHECK(imitation_mode_from_string("b") == ImitationMode::kMixed);
  CHECK_THROWS_AS(imitation_mode_from_string("some"), ConfigError);
}

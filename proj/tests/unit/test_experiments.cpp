#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdp/experiments.hpp"

using namespace cdp;

namespace {

std::string fixture(const char* name) { return std::string(CDP_FIXTURE_DIR) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class ScriptedDispatcher : public Dispatcher {
 public:
  explicit ScriptedDispatcher(std::vector<int> script) : script_(std::move(script)) {}
  int decide(const Snapshot&, int) override {
    return script_[std::min(next_++, script_.size() - 1)];
  }

 private:
  std::vector<int> script_;
  std::size_t next_ = 0;
};

LabConfig small_lab() {
  LabConfig lab;
  lab.scenario = scenario_preset("desk");
  lab.bench.instances = 3;
  lab.bench.seed = 4;
  lab.bench.policies = {"random", "ghav"};
  return lab;
}

}  // namespace

TEST_CASE("heat field is a trailing windowed sum") {
  ProblemInstance inst = load_instance(fixture("two_requests.json"));
  inst.requests[0].grid = 4;
  inst.requests[0].arrival = 30.0;
  inst.requests[0].price = 3.0;
  inst.requests[1].grid = 4;
  inst.requests[1].arrival = 100.0;
  inst.requests[1].price = 4.0;
  CHECK(heat_field(inst, 120.0, 120.0)[4] == 7.0);
  CHECK(heat_field(inst, 120.0, 60.0)[4] == 4.0);
  CHECK(heat_field(inst, 20.0, 120.0)[4] == 0.0);
}

TEST_CASE("trajectories of a hand-traced episode") {
  ProblemInstance inst = load_instance(fixture("two_requests.json"));
  inst.horizon = 30.0;  // two decisions fit before the day ends
  ScriptedDispatcher script({action_index({0, 0, 30}), action_index({1, 0, 30})});
  const EpisodeResult r = run_episode(inst, script, 1);
  REQUIRE(r.actions.size() == 2u);

  const std::string csv = trajectories_csv(inst.world, {{"scripted", r}});
  std::istringstream lines(csv);
  std::string header, first, second, extra;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK_FALSE(std::getline(lines, extra));
  CHECK(header ==
        "policy,courier_id,decision_time,from_gx,from_gy,to_gx,to_gy,patrol,reward,completion_time");
  CHECK(first == "scripted,0,0.000000,1,1,1,1,30,6.000000,3.600000");
  CHECK(second.rfind("scripted,0,3.600000,1,1,2,1,30,0.000000,", 0) == 0);

  const nlohmann::json j = trajectories_json(inst, {{"scripted", r}}, 120.0, 30.0);
  const auto& visits = j["policies"][0]["couriers"][0]["visits"];
  REQUIRE(visits.size() == 2u);
  CHECK(visits[0]["reward"] == 6.0);
  CHECK(visits[1]["to"] == nlohmann::json::array({2, 1}));
  CHECK(j["heat"]["times"].size() == 2u);
  CHECK(j["heat"]["fields"][0].size() == 9u);
  double last = -1.0;
  for (const auto& v : visits) {
    CHECK(v["decision_time"].get<double>() >= last);
    last = v["decision_time"].get<double>();
  }
}

TEST_CASE("an empty episode exports valid empty files") {
  ProblemInstance inst = load_instance(fixture("two_requests.json"));
  inst.requests.clear();
  const std::string prefix = "empty_export_test";
  export_trajectories(inst, {}, prefix);
  const nlohmann::json j = nlohmann::json::parse(slurp(prefix + ".json"));
  CHECK(j["policies"].empty());
  CHECK(j["world"]["width"] == 3);
  CHECK(slurp(prefix + ".csv").find('\n') == slurp(prefix + ".csv").size() - 1);
  std::remove((prefix + ".json").c_str());
  std::remove((prefix + ".csv").c_str());
}

TEST_CASE("benchmark rows are means of episode scores and repeat exactly") {
  const LabConfig lab = small_lab();
  const auto rows = run_benchmark({lab.scenario}, lab, {});
  REQUIRE(rows.size() == 2u);
  for (const auto& row : rows) {
    REQUIRE(row.scores.size() == 3u);
    double sum = 0.0;
    for (double s : row.scores) sum += s;
    CHECK(std::abs(row.mean - sum / 3.0) <= 1e-12);
    CHECK(row.route_violations == 0);
    for (int k = 0; k < 3; ++k) {
      auto d = make_policy(row.policy, lab, nullptr);
      const EpisodeResult r = run_episode(bench_instance(lab.scenario, lab.bench.seed, k), *d,
                                          derive_seed(lab.bench.seed, streams::kEpisode, k));
      CHECK(r.score == row.scores[k]);
    }
  }
  CHECK(bench_csv(rows) == bench_csv(run_benchmark({lab.scenario}, lab, {})));
  LabConfig serial = lab;
  serial.bench.threads = 1;
  CHECK(bench_csv(rows) == bench_csv(run_benchmark({lab.scenario}, serial, {})));
  CHECK(bench_csv(rows).rfind("scenario,policy,instances,mean_score,std_error,route_violations\n", 0) == 0);
  CHECK(bench_table(rows).find("ghav") != std::string::npos);
}

TEST_CASE("zero-request instances score zero with a warning") {
  LabConfig lab = small_lab();
  std::fill(lab.scenario.intense_rates.begin(), lab.scenario.intense_rates.end(), 0.0);
  std::fill(lab.scenario.peripheral_rates.begin(), lab.scenario.peripheral_rates.end(), 0.0);
  const auto rows = run_benchmark({lab.scenario}, lab, {});
  for (const auto& row : rows) {
    CHECK(row.mean == 0.0);
    CHECK(row.warnings.size() == 3u);
  }
}

TEST_CASE("learned policies need a checkpoint before anything runs") {
  LabConfig lab = small_lab();
  lab.bench.policies = {"random", "marl-b"};
  CHECK_THROWS_WITH_AS(run_benchmark({lab.scenario}, lab, {}), doctest::Contains("checkpoint"),
                       ConfigError);
  CHECK_THROWS(run_benchmark({lab.scenario}, lab, {{"marl-b", "missing_checkpoint.json"}}));
  lab.bench.policies = {"teleport"};
  CHECK_THROWS_AS(run_benchmark({lab.scenario}, lab, {}), ConfigError);
  CHECK_THROWS(make_policy("marl-ep", lab, nullptr));
}

TEST_CASE("lab config json") {
  LabConfig lab = small_lab();
  lab.train.episodes = 12;
  lab.mbm.lookahead_minutes = 15.0;
  const LabConfig back = lab_config_from_json(lab_config_to_json(lab));
  CHECK(lab_config_to_json(back) == lab_config_to_json(lab));

  // A preset name resets the scenario before other fields apply.
  const nlohmann::json partial = {{"scenario", {{"name", "median"}, {"courier_count", 7}}}};
  const LabConfig median = lab_config_from_json(partial);
  CHECK(median.scenario.rate_scale == scenario_preset("median").rate_scale);
  CHECK(median.scenario.courier_count == 7);

  const nlohmann::json unknown = {{"bench", {{"instance", 3}}}};
  CHECK_THROWS_WITH_AS(lab_config_from_json(unknown), doctest::Contains("config.bench.instance"),
                       ConfigError);
  CHECK_THROWS_AS(load_lab_config("no_such_config.json"), ConfigError);
}

TEST_CASE("policy names") {
  const auto names = policy_names();
  CHECK(names.size() == 7u);
  CHECK(is_marl_policy("marl-ep"));
  CHECK_FALSE(is_marl_policy("mbm"));
  CHECK(variant_of_policy("marl-ep") == StateVariant::kExpectedProfit);
}

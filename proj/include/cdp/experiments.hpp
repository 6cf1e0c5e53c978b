#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdp/baselines.hpp"
#include "cdp/marl.hpp"
#include "cdp/scenario.hpp"
#include "cdp/simulator.hpp"

namespace cdp {

struct BenchConfig {
  int instances = 40;
  std::uint64_t seed = 1;
  std::vector<std::string> policies{"random", "ghav", "ghep", "mbm"};
  int threads = 0;  // 0: one per hardware thread
};

// Everything a run can be configured with. The JSON form lists every field.
struct LabConfig {
  ScenarioConfig scenario;
  TrainConfig train;
  MbmOptions mbm;
  SimOptions sim;
  BenchConfig bench;
  double heat_window = 120.0;  // trailing minutes summed by the trajectory heat field
  double heat_step = 30.0;     // minutes between exported heat snapshots
};

nlohmann::json lab_config_to_json(const LabConfig& config);
// Fields missing from `j` keep their value in `base`.
LabConfig lab_config_from_json(const nlohmann::json& j, LabConfig base = {});
LabConfig load_lab_config(const std::string& path, LabConfig base = {});
void write_json(const nlohmann::json& j, const std::string& path);

// random | ghav | ghep | ghep-abs | mbm | marl-b | marl-ep
std::vector<std::string> policy_names();
bool is_marl_policy(const std::string& name);
StateVariant variant_of_policy(const std::string& name);

// A dispatcher for every courier. Learned policies run the first learner of
// `checkpoint` greedily; it must be given and match the state variant.
std::unique_ptr<Dispatcher> make_policy(const std::string& name, const LabConfig& config,
                                        const Checkpoint* checkpoint);

struct BenchRow {
  std::string scenario;
  std::string policy;
  int instances = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> scores;  // by instance index
  int route_violations = 0;
  std::vector<std::string> warnings;
};

// Instance k of every scenario uses seed derive_seed(bench.seed, kInstance, k)
// and episode seed derive_seed(bench.seed, kEpisode, k) for every policy.
std::vector<BenchRow> run_benchmark(const std::vector<ScenarioConfig>& scenarios,
                                    const LabConfig& config,
                                    const std::map<std::string, std::string>& checkpoints);

ProblemInstance bench_instance(const ScenarioConfig& scenario, std::uint64_t master, int index);

// No timing columns, so identical inputs give identical bytes.
std::string bench_csv(const std::vector<BenchRow>& rows);
std::string bench_table(const std::vector<BenchRow>& rows);

// Summed price of requests per grid that appeared in [t - window, t].
std::vector<double> heat_field(const ProblemInstance& instance, double t, double window);

struct LabeledEpisode {
  std::string label;
  EpisodeResult result;
};

nlohmann::json episode_result_to_json(const EpisodeResult& result, const GridWorld& world);

nlohmann::json trajectories_json(const ProblemInstance& instance,
                                 const std::vector<LabeledEpisode>& episodes,
                                 double heat_window, double heat_step);
std::string trajectories_csv(const GridWorld& world, const std::vector<LabeledEpisode>& episodes);
// Writes <prefix>.json and <prefix>.csv.
void export_trajectories(const ProblemInstance& instance,
                         const std::vector<LabeledEpisode>& episodes, const std::string& prefix,
                         double heat_window = 120.0, double heat_step = 30.0);

}  // namespace cdp

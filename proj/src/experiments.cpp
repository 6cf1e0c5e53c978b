#include "cdp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace cdp {

namespace {

const char* scoring_name(ProfitScoring s) { return s == ProfitScoring::kRate ? "rate" : "absolute"; }

int bench_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

ProfitScoring scoring_from(const std::string& s) {
  if (s == "rate") return ProfitScoring::kRate;
  if (s == "absolute") return ProfitScoring::kAbsolute;
  throw ConfigError("mbm.scoring: expected 'rate' or 'absolute'");
}

void check_keys(const nlohmann::json& j, const nlohmann::json& reference, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!reference.contains(key)) throw ConfigError(where + "." + key + ": unknown field");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace

nlohmann::json lab_config_to_json(const LabConfig& c) {
  return {{"scenario", scenario_to_json(c.scenario)},
          {"train", to_json(c.train)},
          {"mbm",
           {{"lookahead_minutes", c.mbm.lookahead_minutes},
            {"scoring", scoring_name(c.mbm.scoring)}}},
          {"sim",
           {{"validate_routes", c.sim.validate_routes}, {"idle_minutes", c.sim.idle_minutes}}},
          {"bench",
           {{"instances", c.bench.instances},
            {"seed", c.bench.seed},
            {"policies", c.bench.policies},
            {"threads", c.bench.threads}}},
          {"heat_window", c.heat_window},
          {"heat_step", c.heat_step}};
}

LabConfig lab_config_from_json(const nlohmann::json& j, LabConfig c) {
  const nlohmann::json ref = lab_config_to_json(LabConfig{});
  check_keys(j, ref, "config");
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    // A preset name resets the scenario before the other fields apply.
    ScenarioConfig base = c.scenario;
    if (s.is_object() && s.contains("name") && s.at("name").is_string()) {
      const std::string name = s.at("name").get<std::string>();
      const auto presets = preset_names();
      if (std::find(presets.begin(), presets.end(), name) != presets.end()) {
        base = scenario_preset(name);
      }
    }
    c.scenario = scenario_from_json(s, base);
  }
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
  if (j.contains("mbm")) {
    const auto& m = j.at("mbm");
    check_keys(m, ref.at("mbm"), "config.mbm");
    read(m, "lookahead_minutes", c.mbm.lookahead_minutes, "config.mbm");
    if (m.contains("scoring")) c.mbm.scoring = scoring_from(m.at("scoring").get<std::string>());
  }
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    check_keys(s, ref.at("sim"), "config.sim");
    read(s, "validate_routes", c.sim.validate_routes, "config.sim");
    read(s, "idle_minutes", c.sim.idle_minutes, "config.sim");
  }
  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    check_keys(b, ref.at("bench"), "config.bench");
    read(b, "instances", c.bench.instances, "config.bench");
    read(b, "seed", c.bench.seed, "config.bench");
    read(b, "policies", c.bench.policies, "config.bench");
    read(b, "threads", c.bench.threads, "config.bench");
  }
  read(j, "heat_window", c.heat_window, "config");
  read(j, "heat_step", c.heat_step, "config");
  if (c.bench.instances < 0) throw ConfigError("config.bench.instances must be >= 0");
  if (c.bench.threads < 0) throw ConfigError("config.bench.threads must be >= 0");
  if (!(c.heat_window > 0.0) || !(c.heat_step > 0.0)) {
    throw ConfigError("config.heat_window and heat_step must be positive");
  }
  if (!(c.sim.idle_minutes > 0.0)) throw ConfigError("config.sim.idle_minutes must be positive");
  return c;
}

LabConfig load_lab_config(const std::string& path, LabConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return lab_config_from_json(j, std::move(base));
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

std::vector<std::string> policy_names() {
  return {"random", "ghav", "ghep", "ghep-abs", "mbm", "marl-b", "marl-ep"};
}

bool is_marl_policy(const std::string& name) { return name == "marl-b" || name == "marl-ep"; }

StateVariant variant_of_policy(const std::string& name) {
  if (name == "marl-b") return StateVariant::kBasic;
  if (name == "marl-ep") return StateVariant::kExpectedProfit;
  throw ConfigError("'" + name + "' is not a learned policy");
}

std::unique_ptr<Dispatcher> make_policy(const std::string& name, const LabConfig& config,
                                        const Checkpoint* checkpoint) {
  if (name == "mbm") return std::make_unique<MbmDispatcher>(config.mbm);
  if (is_baseline(name)) return make_baseline(name);
  if (!is_marl_policy(name)) throw ConfigError("unknown policy '" + name + "'");
  if (checkpoint == nullptr) throw ConfigError("policy '" + name + "' needs a checkpoint");
  if (checkpoint->config.variant != variant_of_policy(name)) {
    throw ConfigError("checkpoint holds a '" + std::string(to_string(checkpoint->config.variant)) +
                      "' policy, not " + name);
  }
  if (checkpoint->result.learners.empty()) throw ConfigError("checkpoint has no learner");
  return std::make_unique<MarlDispatcher>(&checkpoint->result.learners.front().policy,
                                          checkpoint->config.variant, true,
                                          checkpoint->config.encoder);
}

ProblemInstance bench_instance(const ScenarioConfig& scenario, std::uint64_t master, int index) {
  ScenarioConfig c = scenario;
  c.seed = derive_seed(master, streams::kInstance, static_cast<std::uint64_t>(index));
  return build_instance(c);
}

std::vector<BenchRow> run_benchmark(const std::vector<ScenarioConfig>& scenarios,
                                    const LabConfig& config,
                                    const std::map<std::string, std::string>& checkpoints) {
  // Resolve every policy up front so a missing checkpoint fails before any
  // simulation runs.
  std::map<std::string, Checkpoint> loaded;
  for (const auto& p : config.bench.policies) {
    if (!is_marl_policy(p)) {
      if (!is_baseline(p)) throw ConfigError("unknown policy '" + p + "'");
      continue;
    }
    auto it = checkpoints.find(p);
    if (it == checkpoints.end() || it->second.empty()) {
      throw ConfigError("policy '" + p + "' needs --checkpoint");
    }
    loaded.emplace(p, load_checkpoint(it->second));
    make_policy(p, config, &loaded.at(p));
  }

  std::vector<BenchRow> rows;
  for (const auto& scenario : scenarios) {
    validate(scenario);
    std::vector<ProblemInstance> instances;
    for (int k = 0; k < config.bench.instances; ++k) {
      instances.push_back(bench_instance(scenario, config.bench.seed, k));
    }
    for (const auto& p : config.bench.policies) {
      BenchRow row;
      row.scenario = scenario.name;
      row.policy = p;
      row.instances = config.bench.instances;
      const auto t0 = std::chrono::steady_clock::now();
      const Checkpoint* ck = loaded.count(p) ? &loaded.at(p) : nullptr;
      const int n_inst = config.bench.instances;
      std::vector<EpisodeResult> results(n_inst);
      // Each worker owns its dispatcher per instance; results land in their
      // instance slot so the aggregate does not depend on scheduling.
      std::atomic<int> next{0};
      std::exception_ptr failure;
      std::mutex failure_mu;
      auto worker = [&] {
        for (int k = next++; k < n_inst; k = next++) {
          try {
            auto dispatcher = make_policy(p, config, ck);
            results[k] = run_episode(instances[k], *dispatcher,
                                     derive_seed(config.bench.seed, streams::kEpisode, k),
                                     config.sim);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = n_inst;
          }
        }
      };
      const int workers = std::min(bench_threads(config.bench.threads), std::max(n_inst, 1));
      if (workers <= 1) {
        worker();
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
      }
      if (failure) std::rethrow_exception(failure);
      for (int k = 0; k < n_inst; ++k) {
        if (instances[k].requests.empty()) {
          row.warnings.push_back("instance " + std::to_string(k) + " has no requests, score 0");
        }
        row.scores.push_back(results[k].score);
        row.route_violations += results[k].route_violations;
      }
      row.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const double n = static_cast<double>(row.scores.size());
      if (n > 0) {
        double sum = 0.0;
        for (double s : row.scores) sum += s;
        row.mean = sum / n;
        if (n > 1) {
          double ss = 0.0;
          for (double s : row.scores) ss += (s - row.mean) * (s - row.mean);
          row.std_error = std::sqrt(ss / (n - 1.0) / n);
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "scenario,policy,instances,mean_score,std_error,route_violations\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6f,%.6f,%d\n", r.scenario.c_str(),
                  r.policy.c_str(), r.instances, r.mean, r.std_error, r.route_violations);
    out << buf;
  }
  return out.str();
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-12s %-9s %9s %9s %8s %10s\n", "scenario", "policy",
                "instances", "score%", "stderr", "wall_s");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-12s %-9s %9d %9.2f %8.2f %10.1f\n", r.scenario.c_str(),
                  r.policy.c_str(), r.instances, 100.0 * r.mean, 100.0 * r.std_error,
                  r.wall_seconds);
    out << buf;
  }
  return out.str();
}

std::vector<double> heat_field(const ProblemInstance& instance, double t, double window) {
  std::vector<double> heat(instance.world.grid_count(), 0.0);
  for (const auto& r : instance.requests) {
    if (r.arrival >= t - window && r.arrival <= t) heat[r.grid] += r.price;
  }
  return heat;
}

nlohmann::json episode_result_to_json(const EpisodeResult& result, const GridWorld& world) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : result.actions) {
    const GridCoord from = world.coord(a.origin_grid);
    const GridCoord to = world.coord(a.target_grid);
    actions.push_back({{"courier", a.courier},
                       {"fleet", a.fleet},
                       {"decision_index", a.decision_index},
                       {"decision_time", a.decision_time},
                       {"action", a.action},
                       {"from", {from.gx, from.gy}},
                       {"to", {to.gx, to.gy}},
                       {"patrol", a.patrol},
                       {"arrival_time", a.arrival_time},
                       {"completion_time", a.completion_time},
                       {"reward", a.reward},
                       {"served", a.served}});
  }
  nlohmann::json fleets = nlohmann::json::object();
  for (const auto& [fleet, revenue] : result.fleet_revenue) fleets[std::to_string(fleet)] = revenue;
  return {{"served_price", result.served_price},
          {"total_price", result.total_price},
          {"score", result.score},
          {"request_count", result.request_count},
          {"served_count", result.served_count},
          {"expired_count", result.expired_count},
          {"pending_count", result.pending_count},
          {"courier_revenue", result.courier_revenue},
          {"fleet_revenue", fleets},
          {"route_violations", result.route_violations},
          {"actions", actions}};
}

nlohmann::json trajectories_json(const ProblemInstance& instance,
                                 const std::vector<LabeledEpisode>& episodes,
                                 double heat_window, double heat_step) {
  const GridWorld& world = instance.world;
  nlohmann::json policies = nlohmann::json::array();
  for (const auto& e : episodes) {
    nlohmann::json couriers = nlohmann::json::array();
    for (std::size_t c = 0; c < e.result.actions_by_courier.size(); ++c) {
      nlohmann::json visits = nlohmann::json::array();
      int fleet = 0;
      for (int idx : e.result.actions_by_courier[c]) {
        const ActionRecord& a = e.result.actions[idx];
        fleet = a.fleet;
        const GridCoord from = world.coord(a.origin_grid);
        const GridCoord to = world.coord(a.target_grid);
        visits.push_back({{"decision_time", a.decision_time},
                          {"from", {from.gx, from.gy}},
                          {"to", {to.gx, to.gy}},
                          {"patrol", a.patrol},
                          {"arrival_time", a.arrival_time},
                          {"completion_time", a.completion_time},
                          {"reward", a.reward}});
      }
      couriers.push_back({{"id", c}, {"fleet", fleet}, {"visits", visits}});
    }
    policies.push_back({{"label", e.label}, {"score", e.result.score}, {"couriers", couriers}});
  }
  nlohmann::json times = nlohmann::json::array();
  nlohmann::json fields = nlohmann::json::array();
  for (double t = 0.0; t <= instance.horizon + 1e-9; t += heat_step) {
    times.push_back(t);
    fields.push_back(heat_field(instance, t, heat_window));
  }
  return {{"world", {{"width", world.width()}, {"height", world.height()}, {"cell_km", world.cell_km()}}},
          {"horizon", instance.horizon},
          {"heat", {{"window", heat_window}, {"times", times}, {"fields", fields}}},
          {"policies", policies}};
}

std::string trajectories_csv(const GridWorld& world, const std::vector<LabeledEpisode>& episodes) {
  std::ostringstream out;
  out << "policy,courier_id,decision_time,from_gx,from_gy,to_gx,to_gy,patrol,reward,completion_time\n";
  char buf[256];
  for (const auto& e : episodes) {
    for (std::size_t c = 0; c < e.result.actions_by_courier.size(); ++c) {
      for (int idx : e.result.actions_by_courier[c]) {
        const ActionRecord& a = e.result.actions[idx];
        const GridCoord from = world.coord(a.origin_grid);
        const GridCoord to = world.coord(a.target_grid);
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%d,%d,%d,%d,%d,%.6f,%.6f\n", e.label.c_str(),
                      c, a.decision_time, from.gx, from.gy, to.gx, to.gy, a.patrol, a.reward,
                      a.completion_time);
        out << buf;
      }
    }
  }
  return out.str();
}

void export_trajectories(const ProblemInstance& instance,
                         const std::vector<LabeledEpisode>& episodes, const std::string& prefix,
                         double heat_window, double heat_step) {
  write_json(trajectories_json(instance, episodes, heat_window, heat_step), prefix + ".json");
  std::ofstream f(prefix + ".csv");
  if (!f) throw std::runtime_error("cannot write " + prefix + ".csv");
  f << trajectories_csv(instance.world, episodes);
}

}  // namespace cdp

// cdp: instance generation, benchmarks, training, evaluation and trajectory
// export for the courier dispatching lab.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdp/experiments.hpp"

namespace fs = std::filesystem;
using namespace cdp;

namespace {

struct Common {
  std::string scenario;
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config file first, then command-line flags on top.
LabConfig resolve(const Common& c) {
  LabConfig lab;
  if (!c.config.empty()) lab = load_lab_config(c.config);
  if (!c.scenario.empty()) {
    const auto names = split(c.scenario);
    lab.scenario = scenario_preset(names.front());
  }
  if (c.seed_set) {
    lab.bench.seed = c.seed;
    lab.train.seed = c.seed;
  }
  return lab;
}

std::vector<ScenarioConfig> scenarios_of(const Common& c, const LabConfig& lab) {
  if (c.scenario.empty()) return {lab.scenario};
  std::vector<ScenarioConfig> out;
  for (const auto& name : split(c.scenario)) {
    out.push_back(name == lab.scenario.name ? lab.scenario : scenario_preset(name));
  }
  return out;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void add_common(CLI::App* app, Common& c, bool scenario_list = false) {
  app->add_option("--scenario", c.scenario,
                  scenario_list ? "Scenario preset(s), comma separated" : "Scenario preset");
  app->add_option("--config", c.config, "JSON config file; flags override it");
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option_function<std::uint64_t>(
      "--seed",
      [&c](std::uint64_t s) {
        c.seed = s;
        c.seed_set = true;
      },
      "Master seed");
}

int cmd_gen(const Common& c, int instances) {
  LabConfig lab = resolve(c);
  if (instances >= 0) lab.bench.instances = instances;
  const fs::path out = prepare_out(c.out);
  for (int k = 0; k < lab.bench.instances; ++k) {
    const ProblemInstance inst = bench_instance(lab.scenario, lab.bench.seed, k);
    char name[64];
    std::snprintf(name, sizeof(name), "instance_%03d.json", k);
    save_instance(inst, (out / name).string());
    std::printf("%s: %zu requests, total price %.0f\n", name, inst.requests.size(),
                inst.total_price());
  }
  write_json(lab_config_to_json(lab), (out / "config.json").string());
  return 0;
}

std::map<std::string, std::string> checkpoint_map(const std::vector<std::string>& paths) {
  std::map<std::string, std::string> out;
  for (const auto& p : paths) {
    const Checkpoint ck = load_checkpoint(p);
    const std::string name = ck.config.variant == StateVariant::kBasic ? "marl-b" : "marl-ep";
    out[name] = p;
  }
  return out;
}

int cmd_bench(const Common& c, const std::string& policies, int instances,
              const std::vector<std::string>& checkpoints) {
  LabConfig lab = resolve(c);
  if (!policies.empty()) lab.bench.policies = split(policies);
  if (instances >= 0) lab.bench.instances = instances;
  const auto rows = run_benchmark(scenarios_of(c, lab), lab, checkpoint_map(checkpoints));
  const fs::path out = prepare_out(c.out);
  std::ofstream((out / "bench.csv").string()) << bench_csv(rows);
  write_json(lab_config_to_json(lab), (out / "config.json").string());
  std::cout << bench_table(rows);
  for (const auto& r : rows) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << r.scenario << "/" << r.policy << ": " << w << "\n";
  }
  return 0;
}

std::vector<FleetGroup> parse_fleet(const std::string& spec) {
  // "5:marl,5:random" or "5:marl!,5:marl!" for independent learners.
  std::vector<FleetGroup> out;
  for (const auto& part : split(spec)) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw ConfigError("fleet entry '" + part + "' needs count:policy");
    FleetGroup g;
    g.count = std::stoi(part.substr(0, colon));
    g.policy = part.substr(colon + 1);
    if (!g.policy.empty() && g.policy.back() == '!') {
      g.independent = true;
      g.policy.pop_back();
    }
    out.push_back(g);
  }
  return out;
}

int cmd_train(const Common& c, const std::string& policy, int episodes, const std::string& fleet) {
  LabConfig lab = resolve(c);
  if (!policy.empty()) lab.train.variant = variant_of_policy(policy);
  if (episodes >= 0) lab.train.episodes = episodes;
  if (!fleet.empty()) lab.train.fleet = parse_fleet(fleet);
  validate(lab.train);
  const fs::path out = prepare_out(c.out);
  write_json(lab_config_to_json(lab), (out / "config.json").string());
  const TrainResult result = train(lab.scenario, lab.train, [](const CurvePoint& p) {
    if (p.eval_score) {
      std::fprintf(stderr, "episode %d  train %.4f  eval %.4f  value_loss %.4g  entropy %.3f\n",
                   p.episode + 1, p.train_score, *p.eval_score, p.value_loss, p.mean_entropy);
    }
  });
  save_checkpoint(result, lab.train, lab.scenario, (out / "checkpoint.json").string());
  write_learning_curve_csv(result.curve, (out / "learning_curve.csv").string());
  if (!result.curve.empty()) {
    const CurvePoint& last = result.curve.back();
    std::printf("final train score %.4f", last.train_score);
    if (last.eval_score) std::printf(", held-out greedy score %.4f", *last.eval_score);
    std::printf("\n");
    if (result.fleet.size() > 1) {
      for (const auto& [g, revenue] : last.group_revenue) {
        std::printf("group %d (%d x %s) revenue %.2f\n", g, result.fleet[g].count,
                    result.fleet[g].policy.c_str(), revenue);
      }
    }
  }
  if (result.dropped_transitions > 0) {
    std::fprintf(stderr, "warning: %d expert transitions had zero policy probability\n",
                 result.dropped_transitions);
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, int instances) {
  if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  const Checkpoint ck = load_checkpoint(checkpoint);
  LabConfig lab = resolve(c);
  if (c.scenario.empty() && c.config.empty()) lab.scenario = scenario_from_json(ck.scenario);
  if (instances >= 0) lab.bench.instances = instances;

  TrainResult policy = ck.result;
  int fleet_total = 0;
  for (const auto& g : policy.fleet) fleet_total += g.count;
  if (fleet_total != lab.scenario.courier_count) {
    // Fleet layout does not fit: every courier runs the first learner.
    policy.fleet = {FleetGroup{lab.scenario.courier_count, "marl", false}};
    policy.learner_of_group = {0};
  }
  const fs::path out = prepare_out(c.out);
  std::ostringstream csv;
  csv << "instance,score,served_price,total_price";
  for (std::size_t g = 0; g < policy.fleet.size(); ++g) csv << ",group" << g << "_" << policy.fleet[g].policy << "_revenue";
  csv << "\n";
  double sum = 0.0;
  std::vector<double> group_sum(policy.fleet.size(), 0.0);
  char buf[128];
  for (int k = 0; k < lab.bench.instances; ++k) {
    const ProblemInstance inst = bench_instance(lab.scenario, lab.bench.seed, k);
    const EpisodeResult r = evaluate_episode(policy, ck.config, inst,
                                             derive_seed(lab.bench.seed, streams::kEpisode, k));
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f", k, r.score, r.served_price, r.total_price);
    csv << buf;
    for (std::size_t g = 0; g < policy.fleet.size(); ++g) {
      const auto it = r.fleet_revenue.find(static_cast<int>(g));
      const double rev = it == r.fleet_revenue.end() ? 0.0 : it->second;
      group_sum[g] += rev;
      std::snprintf(buf, sizeof(buf), ",%.6f", rev);
      csv << buf;
    }
    csv << "\n";
    sum += r.score;
  }
  std::ofstream((out / "eval.csv").string()) << csv.str();
  write_json(lab_config_to_json(lab), (out / "config.json").string());
  const double n = std::max(1, lab.bench.instances);
  std::printf("%s: mean greedy score %.4f over %d instances\n", lab.scenario.name.c_str(), sum / n,
              lab.bench.instances);
  for (std::size_t g = 0; g < policy.fleet.size(); ++g) {
    std::printf("  group %zu (%d x %s): mean revenue %.2f\n", g, policy.fleet[g].count,
                policy.fleet[g].policy.c_str(), group_sum[g] / n);
  }
  return 0;
}

int cmd_export(const Common& c, const std::string& policies, int instance,
               const std::vector<std::string>& checkpoints) {
  LabConfig lab = resolve(c);
  if (!policies.empty()) lab.bench.policies = split(policies);
  const auto ck_paths = checkpoint_map(checkpoints);
  std::map<std::string, Checkpoint> loaded;
  for (const auto& [name, path] : ck_paths) loaded.emplace(name, load_checkpoint(path));
  const ProblemInstance inst = bench_instance(lab.scenario, lab.bench.seed, instance);
  std::vector<LabeledEpisode> episodes;
  for (const auto& p : lab.bench.policies) {
    const Checkpoint* ck = loaded.count(p) ? &loaded.at(p) : nullptr;
    auto dispatcher = make_policy(p, lab, ck);
    episodes.push_back({p, run_episode(inst, *dispatcher,
                                       derive_seed(lab.bench.seed, streams::kEpisode, instance),
                                       lab.sim)});
  }
  const fs::path out = prepare_out(c.out);
  export_trajectories(inst, episodes, (out / "trajectories").string(), lab.heat_window,
                      lab.heat_step);
  write_json(lab_config_to_json(lab), (out / "config.json").string());
  for (const auto& e : episodes) std::printf("%-9s score %.4f\n", e.label.c_str(), e.result.score);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Courier dispatching lab"};
  app.require_subcommand(1);

  Common gen_c, bench_c, train_c, eval_c, export_c;
  int gen_instances = -1, bench_instances = -1, eval_instances = -1, export_instance = 0;
  int episodes = -1;
  std::string bench_policy, train_policy, export_policy, fleet, eval_checkpoint;
  std::vector<std::string> bench_checkpoints, export_checkpoints;

  auto* gen = app.add_subcommand("gen", "Generate problem instances as JSON");
  add_common(gen, gen_c);
  gen->add_option("--instances", gen_instances, "Number of instances");

  auto* bench = app.add_subcommand("bench", "Score policies on generated instances");
  add_common(bench, bench_c, true);
  bench->add_option("--policy", bench_policy,
                    "Policies, comma separated: random,ghav,ghep,ghep-abs,mbm,marl-b,marl-ep");
  bench->add_option("--instances", bench_instances, "Instances per scenario");
  bench->add_option("--checkpoint", bench_checkpoints, "Checkpoint(s) for learned policies");

  auto* tr = app.add_subcommand("train", "Train the multi-agent policy");
  add_common(tr, train_c);
  tr->add_option("--policy", train_policy, "marl-b or marl-ep");
  tr->add_option("--episodes", episodes, "Training episodes");
  tr->add_option("--fleet", fleet, "Fleet groups, e.g. 5:marl,5:random (suffix ! = own learner)");

  auto* ev = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  add_common(ev, eval_c);
  ev->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  ev->add_option("--instances", eval_instances, "Instances");

  auto* ex = app.add_subcommand("export", "Export courier trajectories of one instance");
  add_common(ex, export_c);
  ex->add_option("--policy", export_policy, "Policies, comma separated");
  ex->add_option("--instances", export_instance, "Index of the instance to export");
  ex->add_option("--checkpoint", export_checkpoints, "Checkpoint(s) for learned policies");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen(gen_c, gen_instances);
    if (*bench) return cmd_bench(bench_c, bench_policy, bench_instances, bench_checkpoints);
    if (*tr) return cmd_train(train_c, train_policy, episodes, fleet);
    if (*ev) return cmd_eval(eval_c, eval_checkpoint, eval_instances);
    if (*ex) return cmd_export(export_c, export_policy, export_instance, export_checkpoints);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

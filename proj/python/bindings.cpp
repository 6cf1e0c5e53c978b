#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cdp/experiments.hpp"
#include "cdp/marl.hpp"
#include "cdp/routing.hpp"

namespace py = pybind11;
using namespace cdp;

namespace {

// Structured values cross the boundary as JSON text; the Python package
// decodes them.

LabConfig lab_from(const std::string& config_json) {
  return config_json.empty() ? LabConfig{}
                             : lab_config_from_json(nlohmann::json::parse(config_json));
}

ScenarioConfig scenario_from(const std::string& scenario_json) {
  const auto j = nlohmann::json::parse(scenario_json);
  ScenarioConfig base;
  if (j.contains("name") && j.at("name").is_string()) {
    const auto name = j.at("name").get<std::string>();
    for (const auto& p : preset_names()) {
      if (p == name) base = scenario_preset(name);
    }
  }
  return scenario_from_json(j, base);
}

// Keeps the loaded checkpoint alive next to the dispatcher that reads it.
struct LoadedPolicy {
  std::unique_ptr<Checkpoint> checkpoint;
  std::unique_ptr<Dispatcher> dispatcher;
};

LoadedPolicy policy_for(const std::string& name, const LabConfig& lab,
                        const std::string& checkpoint) {
  LoadedPolicy out;
  if (!checkpoint.empty()) out.checkpoint = std::make_unique<Checkpoint>(load_checkpoint(checkpoint));
  out.dispatcher = make_policy(name, lab, out.checkpoint.get());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Courier dispatching lab core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<DispatchError>(m, "DispatchError", PyExc_RuntimeError);

  m.def("preset_names", &preset_names);
  m.def("policy_names", &policy_names);
  m.def("scenario_preset",
        [](const std::string& name) { return scenario_to_json(scenario_preset(name)).dump(); });
  m.def("default_config", [] { return lab_config_to_json(LabConfig{}).dump(); });

  m.def("build_instance",
        [](const std::string& scenario_json, std::uint64_t seed) {
          ScenarioConfig c = scenario_from(scenario_json);
          c.seed = seed;
          return instance_to_json(build_instance(c));
        },
        py::arg("scenario_json"), py::arg("seed"));
  m.def("bench_instance",
        [](const std::string& scenario_json, std::uint64_t master, int index) {
          return instance_to_json(bench_instance(scenario_from(scenario_json), master, index));
        });
  m.def("validate_instance",
        [](const std::string& text) { return instance_to_json(instance_from_json(text)); });

  m.def("run_episode",
        [](const std::string& instance_json, const std::string& policy, std::uint64_t seed,
           const std::string& checkpoint, const std::string& config_json) {
          const ProblemInstance inst = instance_from_json(instance_json);
          const LabConfig lab = lab_from(config_json);
          LoadedPolicy policy_run = policy_for(policy, lab, checkpoint);
          EpisodeResult r;
          {
            py::gil_scoped_release release;
            r = run_episode(inst, *policy_run.dispatcher, seed, lab.sim);
          }
          return episode_result_to_json(r, inst.world).dump();
        },
        py::arg("instance_json"), py::arg("policy"), py::arg("seed") = 0,
        py::arg("checkpoint") = "", py::arg("config_json") = "");

  m.def("benchmark",
        [](const std::vector<std::string>& scenario_jsons, const std::string& config_json,
           const std::map<std::string, std::string>& checkpoints) {
          std::vector<ScenarioConfig> scenarios;
          for (const auto& s : scenario_jsons) scenarios.push_back(scenario_from(s));
          const LabConfig lab = lab_from(config_json);
          std::vector<BenchRow> rows;
          {
            py::gil_scoped_release release;
            rows = run_benchmark(scenarios, lab, checkpoints);
          }
          nlohmann::json out = nlohmann::json::array();
          for (const auto& r : rows) {
            out.push_back({{"scenario", r.scenario},
                           {"policy", r.policy},
                           {"instances", r.instances},
                           {"mean", r.mean},
                           {"std_error", r.std_error},
                           {"wall_seconds", r.wall_seconds},
                           {"scores", r.scores},
                           {"route_violations", r.route_violations},
                           {"warnings", r.warnings}});
          }
          return py::make_tuple(out.dump(), bench_csv(rows));
        });

  m.def("plan_route",
        [](const std::string& requests_json, double x, double y, double start_time, double budget,
           double speed) {
          const auto reqs = nlohmann::json::parse(requests_json);
          // One open cell without a distance matrix: plain Euclidean legs.
          const GridWorld world(1, 1, 1.0, {GridType::kEmpty});
          std::vector<Request> cand;
          for (const auto& r : reqs) {
            Request q;
            q.id = r.at("id").get<int>();
            q.location = {r.at("x").get<double>(), r.at("y").get<double>()};
            q.earliest = r.at("earliest").get<double>();
            q.latest = r.at("latest").get<double>();
            q.service = r.at("service").get<double>();
            q.price = r.at("price").get<double>();
            cand.push_back(q);
          }
          const Route route = plan_route(world, speed, {x, y}, start_time, budget, cand);
          nlohmann::json stops = nlohmann::json::array();
          for (const auto& s : route.stops) {
            stops.push_back({{"id", s.request_id}, {"arrival", s.arrival}, {"start", s.planned_start}});
          }
          return nlohmann::json{{"stops", stops},
                                {"total_price", route.total_price},
                                {"end_time", route.end_time}}
              .dump();
        },
        py::arg("requests_json"), py::arg("x"), py::arg("y"), py::arg("start_time"),
        py::arg("budget"), py::arg("speed") = kDefaultCourierSpeed);

  m.def("max_weight_matching", [](const std::vector<std::vector<double>>& w) {
    WeightMatrix mat(static_cast<int>(w.size()), w.empty() ? 0 : static_cast<int>(w[0].size()));
    for (int r = 0; r < mat.rows; ++r) {
      if (static_cast<int>(w[r].size()) != mat.cols) throw ConfigError("ragged weight matrix");
      for (int c = 0; c < mat.cols; ++c) mat.at(r, c) = w[r][c];
    }
    const Assignment a = max_weight_matching(mat);
    return py::make_tuple(a.col_of_row, a.value);
  });

  m.def("train",
        [](const std::string& config_json, const std::string& checkpoint_path,
           const std::string& curve_path, const std::function<void(std::string)>& progress) {
          const LabConfig lab = lab_from(config_json);
          ProgressFn report;
          if (progress) {
            report = [&progress](const CurvePoint& p) {
              py::gil_scoped_acquire hold;
              nlohmann::json j = {{"episode", p.episode},
                                  {"train_score", p.train_score},
                                  {"value_loss", p.value_loss},
                                  {"mean_entropy", p.mean_entropy}};
              if (p.eval_score) j["eval_score"] = *p.eval_score;
              progress(j.dump());
            };
          }
          TrainResult result;
          {
            py::gil_scoped_release release;
            result = train(lab.scenario, lab.train, report);
          }
          if (!checkpoint_path.empty()) save_checkpoint(result, lab.train, lab.scenario, checkpoint_path);
          if (!curve_path.empty()) write_learning_curve_csv(result.curve, curve_path);
          nlohmann::json curve = nlohmann::json::array();
          for (const auto& p : result.curve) {
            nlohmann::json groups = nlohmann::json::object();
            for (const auto& [g, v] : p.group_revenue) groups[std::to_string(g)] = v;
            curve.push_back({{"episode", p.episode},
                             {"train_score", p.train_score},
                             {"eval_score", p.eval_score ? nlohmann::json(*p.eval_score) : nlohmann::json()},
                             {"value_loss", p.value_loss},
                             {"mean_entropy", p.mean_entropy},
                             {"group_revenue", groups}});
          }
          return curve.dump();
        },
        py::arg("config_json"), py::arg("checkpoint_path") = "", py::arg("curve_path") = "",
        py::arg("progress") = nullptr);

  m.def("export_trajectories",
        [](const std::string& instance_json, const std::vector<std::string>& policies,
           const std::string& prefix, std::uint64_t seed,
           const std::map<std::string, std::string>& checkpoints, const std::string& config_json) {
          const ProblemInstance inst = instance_from_json(instance_json);
          const LabConfig lab = lab_from(config_json);
          std::vector<LabeledEpisode> episodes;
          for (const auto& p : policies) {
            const auto it = checkpoints.find(p);
            LoadedPolicy run = policy_for(p, lab, it == checkpoints.end() ? "" : it->second);
            episodes.push_back({p, run_episode(inst, *run.dispatcher, seed, lab.sim)});
          }
          export_trajectories(inst, episodes, prefix, lab.heat_window, lab.heat_step);
        },
        py::arg("instance_json"), py::arg("policies"), py::arg("prefix"), py::arg("seed") = 0,
        py::arg("checkpoints") = std::map<std::string, std::string>{},
        py::arg("config_json") = "");
}

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cdp/domain.hpp"

namespace cdp {

enum class GridTypeMode : std::uint8_t { kFixed, kRandom };

struct ScenarioConfig {
  std::string name = "base";
  int width = 20;
  int height = 20;
  double cell_km = 1.0;
  double horizon = 480.0;
  int periods = 8;
  // Per-minute arrival rates for each period; empty grids never generate.
  std::vector<double> intense_rates{0.05, 0.00, 0.00, 0.10, 0.04, 0.00, 0.00, 0.05};
  std::vector<double> peripheral_rates{0.01, 0.06, 0.01, 0.01, 0.01, 0.06, 0.05, 0.01};
  double rate_scale = 1.0;
  GridTypeMode grid_type_mode = GridTypeMode::kFixed;
  // Shares of intense, peripheral and empty grids.
  std::array<double, 3> type_shares{0.05, 0.15, 0.80};
  // Explicit layout for kFixed; when empty, a compact city is drawn from
  // layout_seed with exact type counts and reused by every instance. Grids
  // are ranked by distance to the board center plus uniform noise of up to
  // layout_jitter cells.
  std::vector<GridType> fixed_layout;
  std::uint64_t layout_seed = 20190513;
  double layout_jitter = 0.5;
  double release_offset = 0.0;  // earliest = arrival + release_offset
  double window_width = 60.0;   // latest = earliest + window_width
  double dod = 0.9;
  int courier_count = 10;
  GridCoord courier_start{10, 10};
  double courier_speed = kDefaultCourierSpeed;
  std::uint64_t seed = 1;
  // "euclidean" or "matrix:<csv path>".
  std::string distance = "euclidean";
};

struct InstanceMeta {
  std::string name = "instance";
  std::uint64_t seed = 0;
  int courier_count = 1;
  GridCoord courier_start{0, 0};
  double courier_speed = kDefaultCourierSpeed;
  double release_offset = 0.0;
  double window_width = 60.0;

  friend bool operator==(const InstanceMeta&, const InstanceMeta&) = default;
};

struct ProblemInstance {
  GridWorld world;
  std::vector<Request> requests;  // sorted by (arrival, id)
  double horizon = 480.0;
  InstanceMeta meta;

  double total_price() const;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void validate(const ScenarioConfig& config);

// Every field, including defaults. Reading starts from `base` and rejects
// unknown keys with the offending path.
nlohmann::json scenario_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base = {});

std::vector<std::string> preset_names();
// base, median, large, small_tw, low_dyn, random_grid, desk
ScenarioConfig scenario_preset(std::string_view name);

// Grid type map for one instance. kFixed ignores `instance_seed`.
std::vector<GridType> grid_layout(const ScenarioConfig& config,
                                  std::uint64_t instance_seed);

GridWorld make_world(const ScenarioConfig& config, std::uint64_t instance_seed);

// Expected requests per day implied by the rates and a layout.
double expected_request_count(const ScenarioConfig& config,
                              const std::vector<GridType>& layout);

// Poisson request stream for config.seed. No dynamism rewrite is applied.
ProblemInstance generate_instance(const ScenarioConfig& config);

// Reveals ceil((1 - dod) * N) uniformly chosen requests at time 0 and
// recomputes their windows from the new arrival time.
ProblemInstance apply_dod(const ProblemInstance& instance, double dod,
                          std::uint64_t seed);

// generate_instance followed by apply_dod with a seed derived from config.seed.
ProblemInstance build_instance(const ScenarioConfig& config);

void save_instance(const ProblemInstance& instance, const std::string& path);
ProblemInstance load_instance(const std::string& path);
std::string instance_to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const std::string& text);

}  // namespace cdp

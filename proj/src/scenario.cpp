#include "cdp/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cdp/rng.hpp"

namespace cdp {

using nlohmann::json;

double ProblemInstance::total_price() const {
  double total = 0.0;
  for (const auto& r : requests) total += r.price;
  return total;
}

void validate(const ScenarioConfig& c) {
  if (c.width < 1 || c.height < 1) throw ConfigError("world size must be >= 1");
  if (!(c.cell_km > 0.0)) throw ConfigError("cell_km must be positive");
  if (c.periods < 1) throw ConfigError("periods must be >= 1");
  if (!(c.horizon > 0.0)) throw ConfigError("horizon must be positive");
  const double period = c.horizon / c.periods;
  if (std::abs(period - std::round(period)) > 1e-9) {
    throw ConfigError("horizon must be divisible by the period count");
  }
  for (const auto* rates : {&c.intense_rates, &c.peripheral_rates}) {
    if (static_cast<int>(rates->size()) != c.periods) {
      throw ConfigError("rate rows must have one entry per period");
    }
    for (double r : *rates) {
      if (!(r >= 0.0) || !std::isfinite(r)) {
        throw ConfigError("arrival rates must be finite and non-negative");
      }
    }
  }
  if (!(c.rate_scale >= 0.0)) throw ConfigError("rate_scale must be >= 0");
  double share_sum = 0.0;
  for (double s : c.type_shares) {
    if (!(s >= 0.0)) throw ConfigError("grid type shares must be >= 0");
    share_sum += s;
  }
  if (std::abs(share_sum - 1.0) > 1e-9) {
    throw ConfigError("grid type shares must sum to 1");
  }
  if (!c.fixed_layout.empty() &&
      static_cast<int>(c.fixed_layout.size()) != c.width * c.height) {
    throw ConfigError("fixed_layout must cover every grid exactly once");
  }
  if (!(c.dod >= 0.0 && c.dod <= 1.0)) throw ConfigError("dod must lie in [0, 1]");
  if (!(c.release_offset >= 0.0) || !(c.window_width >= 0.0)) {
    throw ConfigError("time window offsets must be non-negative");
  }
  if (c.courier_count < 1) throw ConfigError("courier_count must be >= 1");
  if (c.courier_start.gx < 0 || c.courier_start.gy < 0 ||
      c.courier_start.gx >= c.width || c.courier_start.gy >= c.height) {
    throw ConfigError("courier_start lies outside the board");
  }
  if (!(c.courier_speed > 0.0)) throw ConfigError("courier_speed must be positive");
  if (c.distance != "euclidean" && c.distance.rfind("matrix:", 0) != 0) {
    throw ConfigError("distance must be 'euclidean' or 'matrix:<path>'");
  }
}

nlohmann::json scenario_to_json(const ScenarioConfig& c) {
  nlohmann::json layout = nlohmann::json::array();
  for (GridType t : c.fixed_layout) layout.push_back(std::string(to_string(t)));
  return {{"name", c.name},
          {"width", c.width},
          {"height", c.height},
          {"cell_km", c.cell_km},
          {"horizon", c.horizon},
          {"periods", c.periods},
          {"intense_rates", c.intense_rates},
          {"peripheral_rates", c.peripheral_rates},
          {"rate_scale", c.rate_scale},
          {"grid_type_mode", c.grid_type_mode == GridTypeMode::kFixed ? "fixed" : "random"},
          {"type_shares", c.type_shares},
          {"fixed_layout", layout},
          {"layout_seed", c.layout_seed},
          {"layout_jitter", c.layout_jitter},
          {"release_offset", c.release_offset},
          {"window_width", c.window_width},
          {"dod", c.dod},
          {"courier_count", c.courier_count},
          {"courier_start", {c.courier_start.gx, c.courier_start.gy}},
          {"courier_speed", c.courier_speed},
          {"seed", c.seed},
          {"distance", c.distance}};
}

ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig c) {
  if (!j.is_object()) throw ConfigError("scenario: expected an object");
  auto get = [&](const std::string& key, auto& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<std::decay_t<decltype(out)>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("scenario." + key + ": wrong type");
    }
  };
  for (const auto& [key, value] : j.items()) {
    if (!scenario_to_json(ScenarioConfig{}).contains(key)) {
      throw ConfigError("scenario." + key + ": unknown field");
    }
  }
  get("name", c.name);
  get("width", c.width);
  get("height", c.height);
  get("cell_km", c.cell_km);
  get("horizon", c.horizon);
  get("periods", c.periods);
  get("intense_rates", c.intense_rates);
  get("peripheral_rates", c.peripheral_rates);
  get("rate_scale", c.rate_scale);
  get("type_shares", c.type_shares);
  get("layout_seed", c.layout_seed);
  get("layout_jitter", c.layout_jitter);
  get("release_offset", c.release_offset);
  get("window_width", c.window_width);
  get("dod", c.dod);
  get("courier_count", c.courier_count);
  get("courier_speed", c.courier_speed);
  get("seed", c.seed);
  get("distance", c.distance);
  if (j.contains("grid_type_mode")) {
    std::string mode;
    get("grid_type_mode", mode);
    if (mode == "fixed") {
      c.grid_type_mode = GridTypeMode::kFixed;
    } else if (mode == "random") {
      c.grid_type_mode = GridTypeMode::kRandom;
    } else {
      throw ConfigError("scenario.grid_type_mode: expected 'fixed' or 'random'");
    }
  }
  if (j.contains("fixed_layout")) {
    std::vector<std::string> names;
    get("fixed_layout", names);
    c.fixed_layout.clear();
    for (const auto& n : names) c.fixed_layout.push_back(grid_type_from_string(n));
  }
  if (j.contains("courier_start")) {
    std::array<int, 2> start{};
    get("courier_start", start);
    c.courier_start = {start[0], start[1]};
  }
  validate(c);
  return c;
}

std::vector<std::string> preset_names() {
  return {"base", "median", "large", "small_tw", "low_dyn", "random_grid", "desk"};
}

ScenarioConfig scenario_preset(std::string_view name) {
  ScenarioConfig c;
  c.name = std::string(name);
  if (name == "base") return c;
  if (name == "median") {
    c.courier_count = 30;
    c.rate_scale = 3.0;
    return c;
  }
  if (name == "large") {
    c.courier_count = 100;
    c.rate_scale = 15.0;
    return c;
  }
  if (name == "small_tw") {
    c.window_width = 20.0;
    return c;
  }
  if (name == "low_dyn") {
    c.dod = 0.5;
    return c;
  }
  if (name == "random_grid") {
    c.grid_type_mode = GridTypeMode::kRandom;
    return c;
  }
  if (name == "desk") {
    // 8x8 board, 3 intense and 10 peripheral grids, ~150 requests a day.
    c.width = 8;
    c.height = 8;
    c.courier_count = 4;
    c.courier_start = {4, 4};
    c.rate_scale = 150.0 / 175.2;
    return c;
  }
  throw ConfigError("unknown scenario preset '" + std::string(name) + "'");
}

std::vector<GridType> grid_layout(const ScenarioConfig& c,
                                  std::uint64_t instance_seed) {
  const int n = c.width * c.height;
  if (c.grid_type_mode == GridTypeMode::kFixed) {
    if (!c.fixed_layout.empty()) return c.fixed_layout;
    const int intense = static_cast<int>(std::lround(c.type_shares[0] * n));
    const int peripheral =
        std::min(n - intense, static_cast<int>(std::lround(c.type_shares[1] * n)));
    // A compact city: grids ranked by jittered distance to the board center,
    // the closest become intense, the next ring peripheral.
    Rng rng(c.layout_seed);
    std::uniform_real_distribution<double> jitter(0.0, c.layout_jitter);
    const double cx = 0.5 * (c.width - 1);
    const double cy = 0.5 * (c.height - 1);
    std::vector<std::pair<double, int>> rank(n);
    for (int g = 0; g < n; ++g) {
      const double d = std::hypot(g % c.width - cx, g / c.width - cy);
      rank[g] = {d + jitter(rng), g};
    }
    std::sort(rank.begin(), rank.end());
    std::vector<GridType> layout(n, GridType::kEmpty);
    for (int k = 0; k < intense + peripheral; ++k) {
      layout[rank[k].second] = k < intense ? GridType::kIntense : GridType::kPeripheral;
    }
    return layout;
  }
  Rng rng(derive_seed(instance_seed, streams::kLayout, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GridType> layout(n);
  for (auto& t : layout) {
    const double u = unit(rng);
    if (u < c.type_shares[0]) {
      t = GridType::kIntense;
    } else if (u < c.type_shares[0] + c.type_shares[1]) {
      t = GridType::kPeripheral;
    } else {
      t = GridType::kEmpty;
    }
  }
  return layout;
}

GridWorld make_world(const ScenarioConfig& c, std::uint64_t instance_seed) {
  GridWorld world(c.width, c.height, c.cell_km, grid_layout(c, instance_seed));
  if (c.distance.rfind("matrix:", 0) == 0) {
    const std::string path = c.distance.substr(7);
    world.set_distance_matrix(load_distance_matrix_csv(path, world.grid_count()),
                              path);
  }
  return world;
}

namespace {

const std::vector<double>* rates_for(const ScenarioConfig& c, GridType type) {
  switch (type) {
    case GridType::kIntense:
      return &c.intense_rates;
    case GridType::kPeripheral:
      return &c.peripheral_rates;
    case GridType::kEmpty:
      return nullptr;
  }
  return nullptr;
}

void sort_requests(std::vector<Request>& requests) {
  std::sort(requests.begin(), requests.end(), [](const Request& a, const Request& b) {
    return a.arrival != b.arrival ? a.arrival < b.arrival : a.id < b.id;
  });
}

InstanceMeta meta_for(const ScenarioConfig& c) {
  InstanceMeta meta;
  meta.name = c.name;
  meta.seed = c.seed;
  meta.courier_count = c.courier_count;
  meta.courier_start = c.courier_start;
  meta.courier_speed = c.courier_speed;
  meta.release_offset = c.release_offset;
  meta.window_width = c.window_width;
  return meta;
}

}  // namespace

double expected_request_count(const ScenarioConfig& c,
                              const std::vector<GridType>& layout) {
  const double period = c.horizon / c.periods;
  double total = 0.0;
  for (GridType t : layout) {
    if (const auto* rates = rates_for(c, t)) {
      for (double r : *rates) total += r * c.rate_scale * period;
    }
  }
  return total;
}

ProblemInstance generate_instance(const ScenarioConfig& c) {
  validate(c);
  ProblemInstance inst;
  inst.world = make_world(c, c.seed);
  inst.horizon = c.horizon;
  inst.meta = meta_for(c);

  Rng rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> service_pick(2, 4);
  std::uniform_int_distribution<int> price_pick(1, 5);
  const double period = c.horizon / c.periods;

  for (int g = 0; g < inst.world.grid_count(); ++g) {
    const auto* rates = rates_for(c, inst.world.type(g));
    if (rates == nullptr) continue;
    const GridCoord cell = inst.world.coord(g);
    for (int m = 0; m < c.periods; ++m) {
      const double lambda = (*rates)[m] * c.rate_scale;
      if (lambda <= 0.0) continue;
      std::exponential_distribution<double> gap(lambda);
      const double end = (m + 1) * period;
      double t = m * period;
      while (true) {
        t += gap(rng);
        if (t >= end) break;
        Request r;
        r.location = {(cell.gx + unit(rng)) * c.cell_km,
                      (cell.gy + unit(rng)) * c.cell_km};
        r.grid = g;
        r.arrival = t;
        r.earliest = t + c.release_offset;
        r.latest = r.earliest + c.window_width;
        r.service = service_pick(rng);
        r.price = price_pick(rng);
        inst.requests.push_back(r);
      }
    }
  }
  std::sort(inst.requests.begin(), inst.requests.end(),
            [](const Request& a, const Request& b) {
              return a.arrival != b.arrival ? a.arrival < b.arrival : a.grid < b.grid;
            });
  for (std::size_t i = 0; i < inst.requests.size(); ++i) {
    inst.requests[i].id = static_cast<int>(i);
  }
  return inst;
}

ProblemInstance apply_dod(const ProblemInstance& instance, double dod,
                          std::uint64_t seed) {
  if (!(dod >= 0.0 && dod <= 1.0)) throw ConfigError("dod must lie in [0, 1]");
  ProblemInstance out = instance;
  const std::size_t n = out.requests.size();
  // The epsilon keeps products such as (1 - 0.7) * 10 from rounding up.
  const double raw = (1.0 - dod) * static_cast<double>(n);
  const auto advanced = static_cast<std::size_t>(
      std::clamp(std::ceil(raw - 1e-9), 0.0, static_cast<double>(n)));
  if (advanced == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < advanced; ++k) {
    Request& r = out.requests[order[k]];
    r.arrival = 0.0;
    r.earliest = out.meta.release_offset;
    r.latest = r.earliest + out.meta.window_width;
  }
  sort_requests(out.requests);
  return out;
}

ProblemInstance build_instance(const ScenarioConfig& config) {
  return apply_dod(generate_instance(config), config.dod,
                   derive_seed(config.seed, streams::kDod, 0));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string key_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

const json& require(const json& obj, const std::string& key,
                    const std::string& parent) {
  if (!obj.is_object()) {
    throw SchemaError((parent.empty() ? std::string("document") : parent) +
                      ": expected an object");
  }
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError(key_path(parent, key) + ": missing required field");
  }
  return *it;
}

double require_number(const json& obj, const std::string& key,
                      const std::string& parent) {
  const json& v = require(obj, key, parent);
  if (!v.is_number()) throw SchemaError(key_path(parent, key) + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(key_path(parent, key) + ": not finite");
  return d;
}

int require_int(const json& obj, const std::string& key, const std::string& parent) {
  const json& v = require(obj, key, parent);
  if (!v.is_number_integer()) {
    throw SchemaError(key_path(parent, key) + ": expected an integer");
  }
  return v.get<int>();
}

}  // namespace

std::string instance_to_json(const ProblemInstance& inst) {
  json meta = {{"name", inst.meta.name},
               {"seed", inst.meta.seed},
               {"couriers", inst.meta.courier_count},
               {"start", {inst.meta.courier_start.gx, inst.meta.courier_start.gy}},
               {"speed", inst.meta.courier_speed},
               {"release_offset", inst.meta.release_offset},
               {"window_width", inst.meta.window_width}};
  json types = json::array();
  for (GridType t : inst.world.types()) types.push_back(std::string(to_string(t)));
  json world = {{"width", inst.world.width()},
                {"height", inst.world.height()},
                {"cell_km", inst.world.cell_km()},
                {"grid_types", std::move(types)},
                {"distance", inst.world.has_distance_matrix()
                                 ? "matrix:" + inst.world.distance_source()
                                 : std::string("euclidean")}};
  json requests = json::array();
  for (const auto& r : inst.requests) {
    requests.push_back({{"id", r.id},
                        {"x", r.location.x},
                        {"y", r.location.y},
                        {"t", r.arrival},
                        {"earliest", r.earliest},
                        {"latest", r.latest},
                        {"service", r.service},
                        {"price", r.price}});
  }
  json doc = {{"meta", std::move(meta)},
              {"world", std::move(world)},
              {"horizon", inst.horizon},
              {"requests", std::move(requests)}};
  return doc.dump(1);
}

ProblemInstance instance_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("document: invalid JSON: ") + e.what());
  }
  ProblemInstance inst;

  const json& w = require(doc, "world", "");
  const int width = require_int(w, "width", "world");
  const int height = require_int(w, "height", "world");
  const double cell = require_number(w, "cell_km", "world");
  const json& types_json = require(w, "grid_types", "world");
  if (!types_json.is_array()) throw SchemaError("world.grid_types: expected an array");
  std::vector<GridType> types;
  for (std::size_t k = 0; k < types_json.size(); ++k) {
    const std::string path = "world.grid_types[" + std::to_string(k) + "]";
    if (!types_json[k].is_string()) throw SchemaError(path + ": expected a string");
    try {
      types.push_back(grid_type_from_string(types_json[k].get<std::string>()));
    } catch (const ConfigError& e) {
      throw SchemaError(path + ": " + e.what());
    }
  }
  try {
    inst.world = GridWorld(width, height, cell, std::move(types));
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("world: ") + e.what());
  }
  if (auto it = w.find("distance"); it != w.end()) {
    if (!it->is_string()) throw SchemaError("world.distance: expected a string");
    const auto d = it->get<std::string>();
    if (d.rfind("matrix:", 0) == 0) {
      const std::string path = d.substr(7);
      inst.world.set_distance_matrix(
          load_distance_matrix_csv(path, inst.world.grid_count()), path);
    } else if (d != "euclidean") {
      throw SchemaError("world.distance: expected 'euclidean' or 'matrix:<path>'");
    }
  }

  inst.horizon = require_number(doc, "horizon", "");
  if (auto it = doc.find("meta"); it != doc.end()) {
    const json& m = *it;
    if (!m.is_object()) throw SchemaError("meta: expected an object");
    inst.meta.name = m.value("name", std::string("instance"));
    inst.meta.seed = m.value("seed", std::uint64_t{0});
    inst.meta.courier_count = m.value("couriers", 1);
    if (auto s = m.find("start"); s != m.end()) {
      if (!s->is_array() || s->size() != 2) {
        throw SchemaError("meta.start: expected [gx, gy]");
      }
      inst.meta.courier_start = {(*s)[0].get<int>(), (*s)[1].get<int>()};
    } else {
      inst.meta.courier_start = {width / 2, height / 2};
    }
    inst.meta.courier_speed = m.value("speed", kDefaultCourierSpeed);
    inst.meta.release_offset = m.value("release_offset", 0.0);
    inst.meta.window_width = m.value("window_width", 60.0);
  }

  const json& reqs = require(doc, "requests", "");
  if (!reqs.is_array()) throw SchemaError("requests: expected an array");
  std::vector<int> ids;
  for (std::size_t k = 0; k < reqs.size(); ++k) {
    const std::string path = "requests[" + std::to_string(k) + "]";
    const json& rj = reqs[k];
    Request r;
    r.id = require_int(rj, "id", path);
    r.location = {require_number(rj, "x", path), require_number(rj, "y", path)};
    r.arrival = require_number(rj, "t", path);
    r.earliest = require_number(rj, "earliest", path);
    r.latest = require_number(rj, "latest", path);
    r.service = require_number(rj, "service", path);
    r.price = require_number(rj, "price", path);
    if (!inst.world.contains(r.location)) {
      throw SchemaError(path + ": location outside the world");
    }
    if (r.latest < r.earliest) throw SchemaError(path + ": latest < earliest");
    if (r.service < 0.0) throw SchemaError(path + ".service: negative");
    if (r.price < 0.0) throw SchemaError(path + ".price: negative");
    if (r.arrival < 0.0 || r.arrival >= inst.horizon) {
      throw SchemaError(path + ".t: outside [0, horizon)");
    }
    r.grid = inst.world.grid_of(r.location);
    ids.push_back(r.id);
    inst.requests.push_back(r);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw SchemaError("requests: duplicate request id");
  }
  sort_requests(inst.requests);
  return inst;
}

void save_instance(const ProblemInstance& instance, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write instance '" + path + "'");
  out << instance_to_json(instance) << '\n';
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open instance '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return instance_from_json(buffer.str());
}

}  // namespace cdp

#include "cdp/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cdp {

std::string_view to_string(GridType type) {
  switch (type) {
    case GridType::kIntense:
      return "intense";
    case GridType::kPeripheral:
      return "peripheral";
    case GridType::kEmpty:
      return "empty";
  }
  return "empty";
}

GridType grid_type_from_string(std::string_view name) {
  if (name == "intense") return GridType::kIntense;
  if (name == "peripheral") return GridType::kPeripheral;
  if (name == "empty") return GridType::kEmpty;
  throw ConfigError("unknown grid type '" + std::string(name) + "'");
}

std::string_view to_string(CourierStatus status) {
  switch (status) {
    case CourierStatus::kFree:
      return "free";
    case CourierStatus::kWalking:
      return "walking";
    case CourierStatus::kPicking:
      return "picking";
  }
  return "free";
}

double euclidean_km(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

GridWorld::GridWorld(int width, int height, double cell_km,
                     std::vector<GridType> types)
    : width_(width), height_(height), cell_km_(cell_km), types_(std::move(types)) {
  if (width_ < 1 || height_ < 1) {
    throw ConfigError("grid world needs width >= 1 and height >= 1");
  }
  if (!(cell_km_ > 0.0) || !std::isfinite(cell_km_)) {
    throw ConfigError("cell size must be a positive number of km");
  }
  if (static_cast<int>(types_.size()) != grid_count()) {
    throw ConfigError("grid type map has " + std::to_string(types_.size()) +
                      " entries, expected " + std::to_string(grid_count()));
  }
}

GridCoord GridWorld::clip(GridCoord c) const {
  return {std::clamp(c.gx, 0, width_ - 1), std::clamp(c.gy, 0, height_ - 1)};
}

int GridWorld::grid_of(Point p) const {
  const int gx = std::clamp(static_cast<int>(std::floor(p.x / cell_km_)), 0,
                            width_ - 1);
  const int gy = std::clamp(static_cast<int>(std::floor(p.y / cell_km_)), 0,
                            height_ - 1);
  return index({gx, gy});
}

Point GridWorld::center(int grid) const {
  const GridCoord c = coord(grid);
  return {(c.gx + 0.5) * cell_km_, (c.gy + 0.5) * cell_km_};
}

bool GridWorld::contains(Point p) const {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ * cell_km_ &&
         p.y <= height_ * cell_km_;
}

void GridWorld::set_distance_matrix(std::vector<double> km, std::string source) {
  const auto n = static_cast<std::size_t>(grid_count());
  if (km.size() != n * n) {
    throw ConfigError("distance matrix has " + std::to_string(km.size()) +
                      " entries, expected " + std::to_string(n * n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = km[i * n + j];
      if (!std::isfinite(d) || d < 0.0) {
        throw ConfigError("distance matrix entry (" + std::to_string(i) + "," +
                          std::to_string(j) + ") is negative or not finite");
      }
      if (i == j && d != 0.0) {
        throw ConfigError("distance matrix diagonal entry " + std::to_string(i) +
                          " is not zero");
      }
    }
  }
  matrix_ = std::make_shared<const std::vector<double>>(std::move(km));
  distance_source_ = std::move(source);
}

double GridWorld::matrix_km(int from, int to) const {
  const int n = grid_count();
  if (!matrix_ || from < 0 || to < 0 || from >= n || to >= n) {
    throw ConfigError("distance matrix lookup (" + std::to_string(from) + "," +
                      std::to_string(to) + ") out of range");
  }
  return (*matrix_)[static_cast<std::size_t>(from) * n + to];
}

double travel_time(const GridWorld& world, Point from, Point to,
                   double speed_km_per_min) {
  if (world.has_distance_matrix()) {
    const int a = world.grid_of(from);
    const int b = world.grid_of(to);
    if (a != b) return world.matrix_km(a, b) / speed_km_per_min;
  }
  return euclidean_km(from, to) / speed_km_per_min;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace

std::vector<double> load_distance_matrix_csv(const std::string& path,
                                             int grid_count) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open distance matrix '" + path + "'");
  const auto n = static_cast<std::size_t>(grid_count);
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("distance matrix '" + path + "' is empty");
  }
  auto header = split_csv_line(line);
  // The leading corner label is optional.
  if (header.size() == n + 1) header.erase(header.begin());
  if (header.size() != n) {
    throw ConfigError("distance matrix header has " +
                      std::to_string(header.size()) + " grid columns, expected " +
                      std::to_string(n));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (std::stoul(header[j]) != j) {
      throw ConfigError("distance matrix header column " + std::to_string(j) +
                        " is '" + header[j] + "'");
    }
  }
  std::vector<double> km(n * n, -1.0);
  std::vector<bool> seen(n, false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != n + 1) {
      throw ConfigError("distance matrix row " + std::to_string(rows) + " has " +
                        std::to_string(cells.size()) + " cells");
    }
    const auto from = static_cast<std::size_t>(std::stoul(cells[0]));
    if (from >= n || seen[from]) {
      throw ConfigError("distance matrix row label '" + cells[0] +
                        "' is out of range or repeated");
    }
    seen[from] = true;
    for (std::size_t j = 0; j < n; ++j) km[from * n + j] = std::stod(cells[j + 1]);
    ++rows;
  }
  if (rows != n) {
    throw ConfigError("distance matrix has " + std::to_string(rows) +
                      " rows, expected " + std::to_string(n));
  }
  return km;
}

void save_distance_matrix_csv(const std::string& path,
                              const std::vector<double>& km, int grid_count) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write distance matrix '" + path + "'");
  out << "from";
  for (int j = 0; j < grid_count; ++j) out << ',' << j;
  out << '\n' << std::setprecision(17);
  for (int i = 0; i < grid_count; ++i) {
    out << i;
    for (int j = 0; j < grid_count; ++j) {
      out << ',' << km[static_cast<std::size_t>(i) * grid_count + j];
    }
    out << '\n';
  }
}

bool valid_action_index(int index) { return index >= 0 && index < kActionCount; }

int action_index(ActionSpec action) {
  if (action.dx < -kActionRadius || action.dx > kActionRadius ||
      action.dy < -kActionRadius || action.dy > kActionRadius ||
      action.patrol_minutes < 0 ||
      action.patrol_minutes > (kPatrolLevels - 1) * kPatrolStep ||
      action.patrol_minutes % kPatrolStep != 0) {
    throw std::out_of_range("invalid action (dx=" + std::to_string(action.dx) +
                            ", dy=" + std::to_string(action.dy) + ", patrol=" +
                            std::to_string(action.patrol_minutes) + ")");
  }
  constexpr int side = 2 * kActionRadius + 1;
  return ((action.dy + kActionRadius) * side + (action.dx + kActionRadius)) *
             kPatrolLevels +
         action.patrol_minutes / kPatrolStep;
}

ActionSpec action_decode(int index) {
  if (!valid_action_index(index)) {
    throw std::out_of_range("action index " + std::to_string(index) +
                            " outside [0, 99]");
  }
  constexpr int side = 2 * kActionRadius + 1;
  const int cell = index / kPatrolLevels;
  return {cell % side - kActionRadius, cell / side - kActionRadius,
          (index % kPatrolLevels) * kPatrolStep};
}

GridCoord action_target(const GridWorld& world, GridCoord from,
                        ActionSpec action) {
  return world.clip({from.gx + action.dx, from.gy + action.dy});
}

}  // namespace cdp

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cdp {

inline constexpr double kDefaultCourierSpeed = 0.5;  // km per minute

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GridType : std::uint8_t { kIntense, kPeripheral, kEmpty };

std::string_view to_string(GridType type);
GridType grid_type_from_string(std::string_view name);

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct GridCoord {
  int gx = 0;
  int gy = 0;

  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

double euclidean_km(Point a, Point b);

// Rectangular board of square cells. Grid indices are row-major:
// index = gy * width + gx.
class GridWorld {
 public:
  GridWorld() = default;
  GridWorld(int width, int height, double cell_km, std::vector<GridType> types);

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_km() const { return cell_km_; }
  int grid_count() const { return width_ * height_; }

  GridType type(int grid) const { return types_.at(grid); }
  const std::vector<GridType>& types() const { return types_; }

  bool in_board(GridCoord c) const {
    return c.gx >= 0 && c.gy >= 0 && c.gx < width_ && c.gy < height_;
  }
  int index(GridCoord c) const { return c.gy * width_ + c.gx; }
  GridCoord coord(int grid) const { return {grid % width_, grid / width_}; }
  GridCoord clip(GridCoord c) const;

  // Points on the far board edge belong to the last row/column.
  int grid_of(Point p) const;
  Point center(int grid) const;
  bool contains(Point p) const;

  // Grid-to-grid distances replace Euclidean legs between distinct grids.
  void set_distance_matrix(std::vector<double> km, std::string source);
  bool has_distance_matrix() const { return matrix_ != nullptr; }
  double matrix_km(int from, int to) const;
  const std::string& distance_source() const { return distance_source_; }

 private:
  int width_ = 0;
  int height_ = 0;
  double cell_km_ = 1.0;
  std::vector<GridType> types_;
  std::shared_ptr<const std::vector<double>> matrix_;
  std::string distance_source_ = "euclidean";
};

// Minutes needed to move between two points at the given speed.
double travel_time(const GridWorld& world, Point from, Point to,
                   double speed_km_per_min = kDefaultCourierSpeed);

// CSV with a header row of grid indices; each following row starts with the
// origin grid index. Values are km.
std::vector<double> load_distance_matrix_csv(const std::string& path,
                                             int grid_count);
void save_distance_matrix_csv(const std::string& path,
                              const std::vector<double>& km, int grid_count);

enum class RequestStatus : std::uint8_t { kPending, kLocked, kServed, kExpired };

struct Request {
  int id = 0;
  Point location;
  int grid = 0;
  double arrival = 0.0;   // minute the request becomes known
  double earliest = 0.0;  // earliest service start
  double latest = 0.0;    // latest service start
  double service = 0.0;   // minutes on site
  double price = 0.0;     // dollars
  RequestStatus status = RequestStatus::kPending;
};

enum class CourierStatus : std::uint8_t { kFree, kWalking, kPicking };

std::string_view to_string(CourierStatus status);

struct Courier {
  int id = 0;
  Point position;
  CourierStatus status = CourierStatus::kFree;
  double speed = kDefaultCourierSpeed;
  int fleet = 0;
  double busy_until = 0.0;
  double revenue = 0.0;
};

// One dispatching decision: a target offset inside the 5x5 neighbourhood
// plus a patrol budget.
struct ActionSpec {
  int dx = 0;
  int dy = 0;
  int patrol_minutes = 0;

  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

inline constexpr int kActionCount = 100;
inline constexpr int kActionRadius = 2;
inline constexpr int kPatrolLevels = 4;
inline constexpr int kPatrolStep = 10;

int action_index(ActionSpec action);
ActionSpec action_decode(int index);
bool valid_action_index(int index);

// Target grid of an action taken from `from`, clipped to the board.
GridCoord action_target(const GridWorld& world, GridCoord from,
                        ActionSpec action);

}  // namespace cdp

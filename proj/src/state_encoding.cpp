#include "cdp/state_encoding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdp/baselines.hpp"

namespace cdp {

int channel_count(StateVariant variant) {
  return variant == StateVariant::kBasic ? 4 : 4 + kPatrolLevels;
}

int state_size(StateVariant variant) { return channel_count(variant) * kStateCells; }

const char* to_string(StateVariant variant) {
  return variant == StateVariant::kBasic ? "basic" : "ep";
}

StateVariant state_variant_from_string(std::string_view name) {
  if (name == "basic" || name == "b") return StateVariant::kBasic;
  if (name == "ep") return StateVariant::kExpectedProfit;
  throw ConfigError("unknown state variant '" + std::string(name) + "'");
}

StateFeatures encode_state(const Snapshot& snapshot, int courier_id, StateVariant variant,
                           const EncoderOptions& options) {
  const GridWorld& world = *snapshot.world;
  const CourierView& courier = snapshot.courier(courier_id);
  const GridCoord here = world.coord(courier.grid);
  const int home = courier.grid;

  StateFeatures out;
  out.variant = variant;
  out.courier = courier_id;
  out.time = snapshot.now;
  out.data.assign(state_size(variant), 0.0);
  auto cell = [&](int channel, int row, int col) -> double& {
    return out.data[(channel * kStateSide + row) * kStateSide + col];
  };

  const double fleet = static_cast<double>(snapshot.couriers.size());
  double max_distance = 0.0;
  for (int row = 0; row < kStateSide; ++row) {
    for (int col = 0; col < kStateSide; ++col) {
      const GridCoord c{here.gx + col - kStateRadius, here.gy + row - kStateRadius};
      if (!world.in_board(c)) continue;
      const int g = world.index(c);
      cell(0, row, col) = snapshot.courier_count[g] / fleet;
      cell(1, row, col) = snapshot.pending_count[g] / options.count_norm;
      cell(2, row, col) = snapshot.pending_price[g] / options.price_norm;
      const double d = world.has_distance_matrix()
                           ? (g == home ? 0.0 : world.matrix_km(home, g))
                           : euclidean_km(world.center(home), world.center(g));
      cell(3, row, col) = d;
      max_distance = std::max(max_distance, d);
    }
  }
  if (max_distance > 0.0) {
    for (int k = 0; k < kStateCells; ++k) out.data[3 * kStateCells + k] /= max_distance;
  }

  if (variant == StateVariant::kExpectedProfit) {
    const ActionScores rates = ghep_scores(snapshot, courier, ProfitScoring::kRate);
    for (int a = 0; a < kActionCount; ++a) {
      const ActionSpec spec = action_decode(a);
      const GridCoord c{here.gx + spec.dx, here.gy + spec.dy};
      // Clipped actions land on another cell; they stay unrepresented.
      if (!world.in_board(c)) continue;
      cell(4 + spec.patrol_minutes / kPatrolStep, kStateRadius + spec.dy,
           kStateRadius + spec.dx) = rates[a] / options.rate_norm;
    }
  }
  return out;
}

}  // namespace cdp

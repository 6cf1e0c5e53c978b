#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "cdp/snapshot.hpp"

namespace cdp {

// kBasic: couriers, pending count, pending price, distance.
// kExpectedProfit adds one predicted-rate map per patrol level.
enum class StateVariant : std::uint8_t { kBasic, kExpectedProfit };

inline constexpr int kStateRadius = 4;
inline constexpr int kStateSide = 2 * kStateRadius + 1;
inline constexpr int kStateCells = kStateSide * kStateSide;

int channel_count(StateVariant variant);
int state_size(StateVariant variant);
const char* to_string(StateVariant variant);
StateVariant state_variant_from_string(std::string_view name);

// Divisors applied to raw channel values. The courier channel is divided by
// the fleet size and the distance channel by its largest in-window value.
struct EncoderOptions {
  double count_norm = 10.0;
  double price_norm = 30.0;
  double rate_norm = 1.0;
};

// Channel-major, then row (dy = -4..4), then column (dx = -4..4), relative
// to the courier's current grid. Off-board cells are zero in every channel.
struct StateFeatures {
  StateVariant variant = StateVariant::kBasic;
  int courier = 0;
  double time = 0.0;
  std::vector<double> data;

  double at(int channel, int row, int col) const {
    return data[(channel * kStateSide + row) * kStateSide + col];
  }
};

StateFeatures encode_state(const Snapshot& snapshot, int courier_id, StateVariant variant,
                           const EncoderOptions& options = {});

}  // namespace cdp

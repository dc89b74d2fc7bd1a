#pragma once

#include <array>

#include "ridepool/config.hpp"
#include "ridepool/routing.hpp"

namespace ridepool {

struct RewardParams {
  std::array<double, 5> beta = {1.0, 1.0, 1.0, 0.5, 0.1};
  double fare_base = 2.0;
  double fare_per_km = 1.0;
  double payout_per_km = 0.6;

  static RewardParams from(const SimConfig& cfg) {
    return {cfg.beta, cfg.fare_base, cfg.fare_per_km, cfg.payout_per_km};
  }
};

// Reward for one accepted driver-order pair:
//   b1 + b2 * fare - b3 * payout - b4 * late_count - b5 * delay_minutes
// fare   = fare_base + fare_per_km * direct trip km
// payout = payout_per_km * added vehicle km
// Drivers without a new order this step receive exactly 0 (not computed here).
double compute_reward(const InsertionResult& insertion, double direct_km,
                      const RewardParams& params);

}  // namespace ridepool

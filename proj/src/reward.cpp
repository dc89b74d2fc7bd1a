#include "ridepool/reward.hpp"

namespace ridepool {

double compute_reward(const InsertionResult& insertion, double direct_km,
                      const RewardParams& params) {
  const auto& b = params.beta;
  const double fare = params.fare_base + params.fare_per_km * direct_km;
  const double payout = params.payout_per_km * insertion.added_vehicle_km;
  const double delay_minutes = insertion.added_passenger_time / 60.0;
  return b[0] + b[1] * fare - b[2] * payout - b[3] * insertion.late_count -
         b[4] * delay_minutes;
}

}  // namespace ridepool

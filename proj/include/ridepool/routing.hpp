#pragma once

#include <limits>
#include <vector>

#include "ridepool/common.hpp"

namespace ridepool {

// Planar Manhattan travel at constant speed.
class TravelModel {
 public:
  explicit TravelModel(double speed_kmh) : speed_kmh_(speed_kmh) {}

  double speed_kmh() const { return speed_kmh_; }
  double time(Point a, Point b) const { return km_to_seconds(manhattan_km(a, b)); }
  double km_to_seconds(double km) const { return km * 3600.0 / speed_kmh_; }
  double seconds_to_km(double s) const { return s * speed_kmh_ / 3600.0; }

 private:
  double speed_kmh_;
};

enum class StopKind { kPickup, kDropoff };

struct Stop {
  StopKind kind = StopKind::kPickup;
  int order_id = -1;
  Point loc;
  double eta = 0.0;
  // Frozen scheduled dropoff for dropoff stops; +inf for pickups and for
  // dropoffs of orders that have not been scheduled yet.
  double deadline = std::numeric_limits<double>::infinity();
};

// Stops in visiting order. ETAs are absolute seconds and non-decreasing;
// total_time is measured from the planning instant.
struct RoutePlan {
  std::vector<Stop> stops;
  double total_time = 0.0;

  bool empty() const { return stops.empty(); }
};

struct NewRequest {
  int order_id = -1;
  Point origin;
  Point dest;
};

struct InsertionResult {
  RoutePlan route;
  double added_vehicle_time = 0.0;    // seconds, >= 0
  double added_passenger_time = 0.0;  // rho: summed per-order delay, seconds
  int late_count = 0;                 // chi
  double added_vehicle_km = 0.0;
  double new_pickup_eta = 0.0;
  double new_dropoff_eta = 0.0;
};

// Largest existing stop count solved by exact enumeration (2 stops per order,
// capacity 5). Larger routes fall back to cheapest insertion.
inline constexpr int kMaxExactStops = 10;

// Re-times `stops` from `pos` at time `now`; returns the route duration.
double retime(const TravelModel& travel, std::vector<Stop>& stops, Point pos,
              double now);

// True when every pickup precedes its dropoff and ETAs are non-decreasing.
bool route_is_valid(const RoutePlan& route);

// Minimum-duration route visiting the existing stops plus the new pickup and
// dropoff, with pickup-before-dropoff precedence. Exact enumeration for up to
// kMaxExactStops existing stops. Ties: fewer reordered existing stops, then
// earlier new pickup.
InsertionResult best_insertion(const TravelModel& travel, const RoutePlan& route,
                               Point vehicle_pos, double now,
                               const NewRequest& request);

// Heuristic used past the exact bound: keep the existing sequence and try
// every (pickup, dropoff) slot pair.
InsertionResult cheapest_insertion(const TravelModel& travel,
                                   const RoutePlan& route, Point vehicle_pos,
                                   double now, const NewRequest& request);

struct StopEvent {
  StopKind kind;
  int order_id;
  double time;
};

// Moves the vehicle `dt` seconds along its route (x leg first, then y).
// Reached stops are removed and reported in visiting order.
std::vector<StopEvent> advance_vehicle(const TravelModel& travel, Point& pos,
                                       RoutePlan& route, double now, double dt);

}  // namespace ridepool

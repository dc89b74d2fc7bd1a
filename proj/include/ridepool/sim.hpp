#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "ridepool/config.hpp"
#include "ridepool/matching.hpp"
#include "ridepool/reward.hpp"
#include "ridepool/routing.hpp"

namespace ridepool {

enum class OrderStatus { kPending, kAssigned, kOnboard, kCompleted, kCancelled };

struct Order {
  int id = -1;
  Point origin;
  Point dest;
  double arrival_t = 0.0;
  std::optional<double> assigned_t;
  std::optional<double> pickup_t;
  std::optional<double> dropoff_t;
  std::optional<double> scheduled_dropoff;
  double direct_time = 0.0;
  OrderStatus status = OrderStatus::kPending;
};

// One row of an ingested order file.
struct OrderRecord {
  double arrival_s = 0.0;
  Point origin;
  Point dest;

  friend bool operator==(const OrderRecord&, const OrderRecord&) = default;
};

struct SyntheticSource {};

struct ReplaySource {
  std::shared_ptr<const std::vector<OrderRecord>> records;  // sorted by arrival
};

using OrderSource = std::variant<SyntheticSource, ReplaySource>;

inline double direct_time(const TravelModel& travel, const Order& order) {
  return travel.time(order.origin, order.dest);
}

// Orders arriving in [t * step_len, (t + 1) * step_len). Synthetic output is a
// pure function of (seed, t); replay output is exactly the records in the
// window. Ids are assigned consecutively from first_id.
std::vector<Order> spawn_orders(int t, const OrderSource& source,
                                const SimConfig& cfg, uint64_t seed, int first_id);

// Removes orders that have waited longer than max_wait and returns them,
// marked cancelled.
std::vector<Order> expire_orders(std::vector<Order>& pool, double t_now,
                                 double max_wait);

struct VehicleState {
  int id = -1;
  Point pos;
  RoutePlan route;
  std::vector<int> onboard;   // picked up, not yet delivered
  std::vector<int> assigned;  // accepted, not yet picked up
  double cum_reward = 0.0;
  int capacity = 0;

  int remaining_capacity() const {
    return capacity - static_cast<int>(onboard.size() + assigned.size());
  }
};

// Pair feature layout (dimension 10 + 5c):
//   order   [o_x, o_y, d_x, d_y, age]
//   driver  [v_x, v_y, remaining/c, cum_reward, group_avg_cum_reward]
//   c slots [dest_x, dest_y, est_total_delivery, remaining_delivery, occupied]
// Coordinates are divided by the city extent, times by the episode length and
// rewards by `reward_scale`. Slots hold the vehicle's committed orders
// (onboard first, then accepted) and are zero-padded.
void encode_pair(const SimConfig& cfg, const VehicleState& driver,
                 const Order& order, std::span<const Order> orders,
                 double group_avg_cum_reward, double reward_scale, double now,
                 std::span<double> out);

std::vector<double> encode_pair(const SimConfig& cfg, const VehicleState& driver,
                                const Order& order, std::span<const Order> orders,
                                double group_avg_cum_reward, double reward_scale,
                                double now);

struct EpisodeMetrics {
  int spawned = 0;
  int served = 0;
  int cancelled = 0;
  double total_reward = 0.0;
  // Means over completed orders; empty when nothing completed.
  std::optional<double> mean_delivery_time;
  std::optional<double> mean_detour_time;
  std::optional<double> mean_pickup_time;
  std::optional<double> mean_confirmation_time;
};

EpisodeMetrics collect_metrics(std::span<const Order> orders, double total_reward);

struct StepOutcome {
  std::vector<double> rewards;      // one per driver, 0 when idle
  std::vector<int> accepted_order;  // order id per driver, -1 when idle
  std::vector<StopEvent> events;
  double spread_before = 0.0;  // population std of cumulative rewards
  double spread_after = 0.0;
};

// Discrete-time fleet world. Step t makes its dispatch decision at
// now() = (t + 1) * step_len, after the orders of window t have arrived;
// vehicles then move one step_len.
class World {
 public:
  World(const SimConfig& cfg, OrderSource source, uint64_t episode_seed);

  // Spawns window t into the pool and cancels orders past max_wait.
  void prepare_step();

  // Applies a driver x pool-position assignment, advances all vehicles and
  // checks the world invariants. Constraint violations throw Error(kInvariant).
  StepOutcome step(const Assignment& assignment);

  bool done() const { return t_ >= cfg_.horizon; }
  int t() const { return t_; }
  double now() const { return (t_ + 1) * cfg_.step_len_s; }

  const SimConfig& config() const { return cfg_; }
  const TravelModel& travel() const { return travel_; }
  std::span<const int> pool() const { return pool_; }
  std::span<const Order> orders() const { return orders_; }
  std::span<const VehicleState> vehicles() const { return vehicles_; }

  double group_avg_cum_reward() const;
  double reward_scale() const { return reward_scale_; }
  double cum_reward_spread() const;

  bool pair_feasible(int driver, int order_id) const;
  void encode(int driver, int order_id, std::span<double> out) const;

  // Feasibility mask for the current pool (scores left at 0).
  ScoreMatrix feasibility() const;

  Assignment greedy() const;

  EpisodeMetrics metrics() const;
  void check_invariants() const;

 private:
  SimConfig cfg_;
  TravelModel travel_;
  RewardParams reward_params_;
  OrderSource source_;
  uint64_t seed_;
  int t_ = 0;
  bool prepared_ = false;
  std::vector<Order> orders_;
  std::vector<int> pool_;
  std::vector<VehicleState> vehicles_;
  double total_reward_ = 0.0;
  double reward_scale_ = 1.0;
};

}  // namespace ridepool

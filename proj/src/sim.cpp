#include "ridepool/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace ridepool {
namespace {

constexpr uint64_t kFleetStream = 0xF1EE7ULL;

Point clamp_to_city(Point p, const SimConfig& cfg) {
  return {std::clamp(p.x, 0.0, cfg.extent_x_km), std::clamp(p.y, 0.0, cfg.extent_y_km)};
}

Point uniform_point(std::mt19937_64& rng, const SimConfig& cfg) {
  std::uniform_real_distribution<double> ux(0.0, cfg.extent_x_km);
  std::uniform_real_distribution<double> uy(0.0, cfg.extent_y_km);
  const double x = ux(rng);
  return {x, uy(rng)};
}

Point near_hotspot(std::mt19937_64& rng, const SimConfig& cfg, size_t h) {
  std::normal_distribution<double> noise(0.0, cfg.hotspot_sigma_km);
  const double dx = noise(rng);
  const double dy = noise(rng);
  const Point c = cfg.hotspots[h].center;
  return clamp_to_city({c.x + dx, c.y + dy}, cfg);
}

std::pair<Point, Point> sample_od(std::mt19937_64& rng, const SimConfig& cfg) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const bool hot = !cfg.hotspots.empty() && u01(rng) < cfg.hotspot_weight;
  for (int attempt = 0; attempt < 32; ++attempt) {
    Point o, d;
    if (hot) {
      const size_t k = cfg.hotspots.size();
      std::uniform_int_distribution<size_t> pick(0, k - 1);
      const size_t a = pick(rng);
      size_t b = a;
      if (k > 1) {
        std::uniform_int_distribution<size_t> other(0, k - 2);
        b = other(rng);
        if (b >= a) ++b;
      }
      o = near_hotspot(rng, cfg, a);
      d = near_hotspot(rng, cfg, b);
    } else {
      o = uniform_point(rng, cfg);
      d = uniform_point(rng, cfg);
    }
    if (manhattan_km(o, d) > 1e-6) return {o, d};
  }
  // Degenerate configuration (e.g. tiny extent); fall back to opposite corners.
  return {Point{0.0, 0.0}, Point{cfg.extent_x_km, cfg.extent_y_km}};
}

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

[[noreturn]] void invariant(const std::string& msg) {
  throw Error(ErrorCode::kInvariant, msg);
}

void erase_value(std::vector<int>& v, int value) {
  v.erase(std::remove(v.begin(), v.end(), value), v.end());
}

}  // namespace

std::vector<Order> spawn_orders(int t, const OrderSource& source,
                                const SimConfig& cfg, uint64_t seed, int first_id) {
  const double lo = t * cfg.step_len_s;
  const double hi = (t + 1) * cfg.step_len_s;
  const TravelModel travel(cfg.speed_kmh);
  std::vector<Order> out;

  auto make = [&](double arrival, Point o, Point d) {
    Order order;
    order.id = first_id + static_cast<int>(out.size());
    order.origin = o;
    order.dest = d;
    order.arrival_t = arrival;
    order.direct_time = travel.time(o, d);
    out.push_back(order);
  };

  if (const auto* replay = std::get_if<ReplaySource>(&source)) {
    if (!replay->records) return out;
    const auto& recs = *replay->records;
    auto it = std::lower_bound(recs.begin(), recs.end(), lo,
                               [](const OrderRecord& r, double v) { return r.arrival_s < v; });
    for (; it != recs.end() && it->arrival_s < hi; ++it) {
      make(it->arrival_s, it->origin, it->dest);
    }
    return out;
  }

  if (cfg.arrival_rate <= 0.0) return out;
  std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(t)));
  std::poisson_distribution<int> count_dist(cfg.arrival_rate);
  const int count = count_dist(rng);
  std::uniform_real_distribution<double> when(lo, hi);
  std::vector<double> arrivals(count);
  for (double& a : arrivals) a = when(rng);
  std::sort(arrivals.begin(), arrivals.end());
  for (double a : arrivals) {
    auto [o, d] = sample_od(rng, cfg);
    make(a, o, d);
  }
  return out;
}

std::vector<Order> expire_orders(std::vector<Order>& pool, double t_now,
                                 double max_wait) {
  std::vector<Order> cancelled;
  std::vector<Order> kept;
  kept.reserve(pool.size());
  for (Order& o : pool) {
    if (t_now - o.arrival_t > max_wait) {
      o.status = OrderStatus::kCancelled;
      cancelled.push_back(o);
    } else {
      kept.push_back(o);
    }
  }
  pool = std::move(kept);
  return cancelled;
}

void encode_pair(const SimConfig& cfg, const VehicleState& driver,
                 const Order& order, std::span<const Order> orders,
                 double group_avg_cum_reward, double reward_scale, double now,
                 std::span<double> out) {
  if (order.status != OrderStatus::kPending) {
    throw Error(ErrorCode::kInvalidArgument,
                "encode_pair: order " + std::to_string(order.id) + " is not pending");
  }
  if (driver.remaining_capacity() < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "encode_pair: driver " + std::to_string(driver.id) + " is full");
  }
  if (out.size() != static_cast<size_t>(cfg.feature_dim())) {
    throw Error(ErrorCode::kShapeMismatch, "encode_pair: output size mismatch");
  }
  const double ex = cfg.extent_x_km;
  const double ey = cfg.extent_y_km;
  const double horizon = cfg.episode_seconds();
  const double scale = std::max(1.0, reward_scale);

  size_t k = 0;
  out[k++] = order.origin.x / ex;
  out[k++] = order.origin.y / ey;
  out[k++] = order.dest.x / ex;
  out[k++] = order.dest.y / ey;
  out[k++] = (now - order.arrival_t) / horizon;

  out[k++] = driver.pos.x / ex;
  out[k++] = driver.pos.y / ey;
  out[k++] = static_cast<double>(driver.remaining_capacity()) / cfg.capacity;
  out[k++] = driver.cum_reward / scale;
  out[k++] = group_avg_cum_reward / scale;

  auto fill_slot = [&](int order_id) {
    const Order& o = orders[order_id];
    double eta = now;
    for (const Stop& s : driver.route.stops) {
      if (s.kind == StopKind::kDropoff && s.order_id == order_id) eta = s.eta;
    }
    out[k++] = o.dest.x / ex;
    out[k++] = o.dest.y / ey;
    out[k++] = (eta - o.arrival_t) / horizon;
    out[k++] = (eta - now) / horizon;
    out[k++] = 1.0;
  };
  for (int id : driver.onboard) fill_slot(id);
  for (int id : driver.assigned) fill_slot(id);
  while (k < out.size()) out[k++] = 0.0;
}

std::vector<double> encode_pair(const SimConfig& cfg, const VehicleState& driver,
                                const Order& order, std::span<const Order> orders,
                                double group_avg_cum_reward, double reward_scale,
                                double now) {
  std::vector<double> v(static_cast<size_t>(cfg.feature_dim()));
  encode_pair(cfg, driver, order, orders, group_avg_cum_reward, reward_scale, now, v);
  return v;
}

EpisodeMetrics collect_metrics(std::span<const Order> orders, double total_reward) {
  EpisodeMetrics m;
  m.spawned = static_cast<int>(orders.size());
  m.total_reward = total_reward;
  double delivery = 0.0, detour = 0.0, pickup = 0.0, confirmation = 0.0;
  for (const Order& o : orders) {
    if (o.status == OrderStatus::kCancelled) ++m.cancelled;
    if (o.status != OrderStatus::kCompleted) continue;
    ++m.served;
    const double d = *o.dropoff_t - *o.pickup_t;
    delivery += d;
    detour += std::max(0.0, d - o.direct_time);
    pickup += *o.pickup_t - o.arrival_t;
    confirmation += *o.assigned_t - o.arrival_t;
  }
  if (m.served > 0) {
    const double n = m.served;
    m.mean_delivery_time = delivery / n;
    m.mean_detour_time = detour / n;
    m.mean_pickup_time = pickup / n;
    m.mean_confirmation_time = confirmation / n;
  }
  return m;
}

World::World(const SimConfig& cfg, OrderSource source, uint64_t episode_seed)
    : cfg_(cfg),
      travel_(cfg.speed_kmh),
      reward_params_(RewardParams::from(cfg)),
      source_(std::move(source)),
      seed_(episode_seed) {
  std::mt19937_64 rng(mix_seed(episode_seed ^ kFleetStream, 0));
  vehicles_.resize(static_cast<size_t>(cfg.n_drivers));
  for (int i = 0; i < cfg.n_drivers; ++i) {
    vehicles_[i].id = i;
    vehicles_[i].capacity = cfg.capacity;
    vehicles_[i].pos = uniform_point(rng, cfg);
  }
}

void World::prepare_step() {
  if (done()) throw Error(ErrorCode::kInvalidArgument, "episode already finished");
  if (prepared_) return;
  auto fresh = spawn_orders(t_, source_, cfg_, seed_, static_cast<int>(orders_.size()));
  for (Order& o : fresh) {
    pool_.push_back(o.id);
    orders_.push_back(std::move(o));
  }
  const double t_now = now();
  std::vector<int> kept;
  kept.reserve(pool_.size());
  for (int id : pool_) {
    Order& o = orders_[id];
    if (t_now - o.arrival_t > cfg_.max_wait_s) {
      o.status = OrderStatus::kCancelled;
    } else {
      kept.push_back(id);
    }
  }
  pool_ = std::move(kept);
  prepared_ = true;
}

double World::group_avg_cum_reward() const {
  double s = 0.0;
  for (const auto& v : vehicles_) s += v.cum_reward;
  return s / static_cast<double>(vehicles_.size());
}

double World::cum_reward_spread() const {
  std::vector<double> c;
  c.reserve(vehicles_.size());
  for (const auto& v : vehicles_) c.push_back(v.cum_reward);
  return population_std(c);
}

bool World::pair_feasible(int driver, int order_id) const {
  const VehicleState& v = vehicles_[driver];
  const Order& o = orders_[order_id];
  if (o.status != OrderStatus::kPending || v.remaining_capacity() < 1) return false;
  return cfg_.pickup_radius_km <= 0.0 ||
         manhattan_km(v.pos, o.origin) <= cfg_.pickup_radius_km;
}

void World::encode(int driver, int order_id, std::span<double> out) const {
  encode_pair(cfg_, vehicles_[driver], orders_[order_id], orders_,
              group_avg_cum_reward(), reward_scale_, now(), out);
}

ScoreMatrix World::feasibility() const {
  ScoreMatrix m(cfg_.n_drivers, static_cast<int>(pool_.size()));
  for (int i = 0; i < cfg_.n_drivers; ++i) {
    for (size_t j = 0; j < pool_.size(); ++j) {
      if (pair_feasible(i, pool_[j])) m.set(i, static_cast<int>(j), 0.0);
    }
  }
  return m;
}

Assignment World::greedy() const {
  std::vector<DriverSlot> drivers;
  drivers.reserve(vehicles_.size());
  for (const auto& v : vehicles_) drivers.push_back({v.pos, v.remaining_capacity()});
  std::vector<PendingOrder> pending;
  pending.reserve(pool_.size());
  for (int id : pool_) pending.push_back({orders_[id].origin, orders_[id].arrival_t});
  return greedy_assignment(travel_, drivers, pending, cfg_.pickup_radius_km);
}

StepOutcome World::step(const Assignment& assignment) {
  if (!prepared_) {
    throw Error(ErrorCode::kInvalidArgument, "World::step called before prepare_step");
  }
  const int n = cfg_.n_drivers;
  const int w = static_cast<int>(pool_.size());
  std::vector<bool> driver_used(n, false), order_used(w, false);
  for (auto [i, j] : assignment.pairs) {
    if (i < 0 || i >= n || j < 0 || j >= w) invariant("assignment pair out of range");
    if (driver_used[i]) invariant("driver " + std::to_string(i) + " assigned twice");
    if (order_used[j]) invariant("pool order " + std::to_string(j) + " assigned twice");
    if (!pair_feasible(i, pool_[j])) {
      invariant("infeasible pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    driver_used[i] = true;
    order_used[j] = true;
  }

  StepOutcome out;
  out.rewards.assign(n, 0.0);
  out.accepted_order.assign(n, -1);
  out.spread_before = cum_reward_spread();
  const double t_now = now();

  auto pairs = assignment.pairs;
  std::sort(pairs.begin(), pairs.end());
  for (auto [i, j] : pairs) {
    VehicleState& v = vehicles_[i];
    Order& o = orders_[pool_[j]];
    const InsertionResult ins =
        best_insertion(travel_, v.route, v.pos, t_now, {o.id, o.origin, o.dest});
    const double r = compute_reward(ins, manhattan_km(o.origin, o.dest), reward_params_);
    v.route = ins.route;
    v.assigned.push_back(o.id);
    v.cum_reward += r;
    o.status = OrderStatus::kAssigned;
    o.assigned_t = t_now;
    o.scheduled_dropoff = ins.new_dropoff_eta;
    out.rewards[i] = r;
    out.accepted_order[i] = o.id;
    total_reward_ += r;
  }
  std::vector<int> remaining;
  remaining.reserve(pool_.size());
  for (int j = 0; j < w; ++j) {
    if (!order_used[j]) remaining.push_back(pool_[j]);
  }
  pool_ = std::move(remaining);
  out.spread_after = cum_reward_spread();

  for (auto& v : vehicles_) {
    auto events = advance_vehicle(travel_, v.pos, v.route, t_now, cfg_.step_len_s);
    for (const StopEvent& e : events) {
      Order& o = orders_[e.order_id];
      if (e.kind == StopKind::kPickup) {
        erase_value(v.assigned, o.id);
        v.onboard.push_back(o.id);
        o.status = OrderStatus::kOnboard;
        o.pickup_t = e.time;
      } else {
        erase_value(v.onboard, o.id);
        o.status = OrderStatus::kCompleted;
        o.dropoff_t = e.time;
      }
      out.events.push_back(e);
    }
  }

  for (const auto& v : vehicles_) {
    reward_scale_ = std::max(reward_scale_, std::abs(v.cum_reward));
  }
  ++t_;
  prepared_ = false;
  check_invariants();
  return out;
}

EpisodeMetrics World::metrics() const { return collect_metrics(orders_, total_reward_); }

void World::check_invariants() const {
  std::vector<int> owner(orders_.size(), -1);
  for (const auto& v : vehicles_) {
    const int committed = static_cast<int>(v.onboard.size() + v.assigned.size());
    if (static_cast<int>(v.onboard.size()) > v.capacity || committed > v.capacity) {
      invariant("vehicle " + std::to_string(v.id) + " over capacity");
    }
    if (!route_is_valid(v.route)) {
      invariant("vehicle " + std::to_string(v.id) + " has an invalid route");
    }
    auto count_stops = [&](int id, StopKind kind) {
      return std::count_if(v.route.stops.begin(), v.route.stops.end(),
                           [&](const Stop& s) { return s.order_id == id && s.kind == kind; });
    };
    for (int id : v.onboard) {
      if (orders_[id].status != OrderStatus::kOnboard || count_stops(id, StopKind::kDropoff) != 1 ||
          count_stops(id, StopKind::kPickup) != 0) {
        invariant("onboard order " + std::to_string(id) + " inconsistent with route");
      }
      owner[id] = v.id;
    }
    for (int id : v.assigned) {
      if (orders_[id].status != OrderStatus::kAssigned ||
          count_stops(id, StopKind::kDropoff) != 1 || count_stops(id, StopKind::kPickup) != 1) {
        invariant("assigned order " + std::to_string(id) + " inconsistent with route");
      }
      owner[id] = v.id;
    }
    if (v.route.stops.size() != v.onboard.size() + 2 * v.assigned.size()) {
      invariant("vehicle " + std::to_string(v.id) + " route has foreign stops");
    }
  }

  size_t pending = 0;
  for (const Order& o : orders_) {
    const bool owned = owner[o.id] >= 0;
    const bool active = o.status == OrderStatus::kAssigned || o.status == OrderStatus::kOnboard;
    if (owned != active) invariant("order " + std::to_string(o.id) + " ownership mismatch");
    if (o.status == OrderStatus::kPending) ++pending;
    double last = o.arrival_t;
    for (const auto& ts : {o.assigned_t, o.pickup_t, o.dropoff_t}) {
      if (!ts) continue;
      if (*ts < last) {
        invariant("order " + std::to_string(o.id) + " timestamps not monotone");
      }
      last = *ts;
    }
  }
  // After a step the pool holds exactly the pending orders.
  if (pending != pool_.size()) invariant("pool does not match pending orders");
}

}  // namespace ridepool

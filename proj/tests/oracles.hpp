#pragma once

// Independent reference implementations used only by tests. Each one is the
// slowest obvious way to compute its answer and shares no code with the
// library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "ridepool/matching.hpp"
#include "ridepool/mlp.hpp"
#include "ridepool/routing.hpp"

namespace oracle {

using ridepool::Point;
using ridepool::Stop;
using ridepool::StopKind;

inline double seconds_between(Point a, Point b, double speed_kmh) {
  return (std::abs(a.x - b.x) + std::abs(a.y - b.y)) / speed_kmh * 3600.0;
}

// Best total over every partial matching, by recursion over drivers.
inline double best_matching_total(const ridepool::ScoreMatrix& m) {
  const int n = m.drivers();
  const int w = m.orders();
  std::vector<bool> used(static_cast<size_t>(w), false);
  std::function<double(int)> go = [&](int i) -> double {
    if (i == n) return 0.0;
    double best = go(i + 1);
    for (int j = 0; j < w; ++j) {
      if (used[j] || !m.feasible(i, j)) continue;
      used[j] = true;
      best = std::max(best, m.score(i, j) + go(i + 1));
      used[j] = false;
    }
    return best;
  };
  return go(0);
}

struct InsertionAnswer {
  double total_time = std::numeric_limits<double>::infinity();
  int late = 0;
  double delay = 0.0;  // seconds
  std::vector<int> sequence;
};

// Tries every permutation of existing stops plus the new pickup/dropoff,
// keeps precedence-valid ones and picks the shortest. Equal durations (within
// 1e-6 s) prefer fewer existing stops out of their old rank, then an earlier
// new pickup; remaining ties keep the lexicographically first sequence.
inline InsertionAnswer naive_insertion(double speed_kmh, Point pos, double now,
                                       const std::vector<Stop>& existing, Point origin,
                                       Point dest) {
  const int n = static_cast<int>(existing.size());
  std::vector<Point> loc;
  for (const Stop& s : existing) loc.push_back(s.loc);
  loc.push_back(origin);
  loc.push_back(dest);

  // Old dropoff times along the existing order.
  std::vector<double> old_eta(static_cast<size_t>(n));
  {
    double t = now;
    Point at = pos;
    for (int k = 0; k < n; ++k) {
      t += seconds_between(at, loc[k], speed_kmh);
      old_eta[k] = t;
      at = loc[k];
    }
  }

  auto valid = [&](const std::vector<int>& perm) {
    std::vector<int> where(perm.size());
    for (size_t p = 0; p < perm.size(); ++p) where[perm[p]] = static_cast<int>(p);
    if (where[n] > where[n + 1]) return false;
    for (int a = 0; a < n; ++a) {
      if (existing[a].kind != StopKind::kPickup) continue;
      for (int b = 0; b < n; ++b) {
        if (existing[b].kind == StopKind::kDropoff && existing[b].order_id == existing[a].order_id &&
            where[a] > where[b]) {
          return false;
        }
      }
    }
    return true;
  };

  InsertionAnswer best;
  int best_changes = 0, best_pickup = 0;
  std::vector<int> perm(static_cast<size_t>(n + 2));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    if (!valid(perm)) continue;
    double t = 0.0;
    Point at = pos;
    for (int s : perm) {
      t += seconds_between(at, loc[s], speed_kmh);
      at = loc[s];
    }
    int changes = 0, rank = 0, pickup = 0;
    for (size_t p = 0; p < perm.size(); ++p) {
      if (perm[p] == n) pickup = static_cast<int>(p);
      if (perm[p] >= n) continue;
      if (perm[p] != rank) ++changes;
      ++rank;
    }
    bool take;
    if (t < best.total_time - 1e-6) {
      take = true;
    } else if (t > best.total_time + 1e-6) {
      take = false;
    } else if (changes != best_changes) {
      take = changes < best_changes;
    } else {
      take = pickup < best_pickup;
    }
    if (!take) continue;
    best.total_time = t;
    best.sequence = perm;
    best_changes = changes;
    best_pickup = pickup;
  } while (std::next_permutation(perm.begin(), perm.end()));

  // Lateness and delay of the chosen sequence.
  double t = now;
  Point at = pos;
  best.late = 0;
  best.delay = 0.0;
  for (int s : best.sequence) {
    t += seconds_between(at, loc[s], speed_kmh);
    at = loc[s];
    if (s < n && existing[s].kind == StopKind::kDropoff) {
      best.delay += std::max(0.0, t - old_eta[s]);
      if (t > existing[s].deadline) ++best.late;
    }
  }
  return best;
}

// Discounted normalised sum written as the textbook double loop.
inline double grpo_direct(const std::vector<std::vector<double>>& rewards, int t, int agent,
                          double mean, double sigma, double gamma, double alpha,
                          const std::vector<double>& spread_delta) {
  double sum = 0.0;
  double discount = 1.0;
  for (size_t tau = static_cast<size_t>(t); tau < rewards.size(); ++tau) {
    sum += discount * (rewards[tau][agent] - mean) / sigma;
    discount *= gamma;
  }
  return sum - alpha * spread_delta[t];
}

// Central finite difference of f with respect to parameter k.
inline double central_difference(ridepool::Mlp& net, size_t k, double h,
                                 const std::function<double(const ridepool::Mlp&)>& f) {
  const double saved = net.param(k);
  net.param(k) = saved + h;
  const double up = f(net);
  net.param(k) = saved - h;
  const double down = f(net);
  net.param(k) = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// Random existing route for a vehicle: `onboard` dropoff-only orders and
// `accepted` pickup+dropoff orders in a random precedence-valid order.
// Dropoff deadlines sit around their current ETA so some insertions run late.
inline ridepool::RoutePlan random_route(std::mt19937_64& rng, const ridepool::TravelModel& travel,
                                        Point pos, double now, int onboard, int accepted,
                                        double extent, bool grid) {
  std::uniform_real_distribution<double> coord(0.0, extent);
  std::uniform_int_distribution<int> cell(0, static_cast<int>(extent));
  auto point = [&]() -> Point {
    if (grid) return {static_cast<double>(cell(rng)), static_cast<double>(cell(rng))};
    return {coord(rng), coord(rng)};
  };
  std::vector<Stop> pool;
  int id = 100;
  for (int k = 0; k < onboard; ++k) pool.push_back({StopKind::kDropoff, id++, point(), 0.0});
  for (int k = 0; k < accepted; ++k) {
    pool.push_back({StopKind::kPickup, id, point(), 0.0});
    pool.push_back({StopKind::kDropoff, id, point(), 0.0});
    ++id;
  }
  // Random topological order: repeatedly pick any stop whose pickup is done.
  std::vector<Stop> ordered;
  std::vector<bool> done(pool.size(), false);
  while (ordered.size() < pool.size()) {
    std::vector<size_t> ready;
    for (size_t a = 0; a < pool.size(); ++a) {
      if (done[a]) continue;
      bool blocked = false;
      if (pool[a].kind == StopKind::kDropoff) {
        for (size_t b = 0; b < pool.size(); ++b) {
          if (!done[b] && pool[b].kind == StopKind::kPickup && pool[b].order_id == pool[a].order_id) {
            blocked = true;
          }
        }
      }
      if (!blocked) ready.push_back(a);
    }
    std::uniform_int_distribution<size_t> pick(0, ready.size() - 1);
    const size_t a = ready[pick(rng)];
    done[a] = true;
    ordered.push_back(pool[a]);
  }
  ridepool::RoutePlan plan;
  plan.stops = ordered;
  plan.total_time = ridepool::retime(travel, plan.stops, pos, now);
  std::uniform_real_distribution<double> slack(-60.0, 400.0);
  for (Stop& s : plan.stops) {
    if (s.kind == StopKind::kDropoff) s.deadline = s.eta + slack(rng);
  }
  return plan;
}

}  // namespace oracle

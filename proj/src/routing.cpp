#include "ridepool/routing.hpp"

#include <algorithm>
#include <cmath>

namespace ridepool {
namespace {

constexpr double kTieTolerance = 1e-6;  // seconds

struct Candidate {
  std::vector<int> sequence;  // indices into the combined stop list
  double total = std::numeric_limits<double>::infinity();
  int position_changes = 0;
  int pickup_index = 0;
};

// Lexicographic (total, position_changes, pickup_index) with a small
// tolerance on the duration.
bool better(const Candidate& a, const Candidate& b) {
  if (a.total < b.total - kTieTolerance) return true;
  if (a.total > b.total + kTieTolerance) return false;
  if (a.position_changes != b.position_changes) {
    return a.position_changes < b.position_changes;
  }
  return a.pickup_index < b.pickup_index;
}

int count_position_changes(const std::vector<int>& seq, int n_existing) {
  int rank = 0;
  int changes = 0;
  for (int s : seq) {
    if (s >= n_existing) continue;
    if (s != rank) ++changes;
    ++rank;
  }
  return changes;
}

int pickup_index_of(const std::vector<int>& seq, int pickup_stop) {
  return static_cast<int>(std::find(seq.begin(), seq.end(), pickup_stop) - seq.begin());
}

std::vector<Stop> combined_stops(const RoutePlan& route, const NewRequest& req) {
  std::vector<Stop> all = route.stops;
  all.push_back({StopKind::kPickup, req.order_id, req.origin, 0.0,
                 std::numeric_limits<double>::infinity()});
  all.push_back({StopKind::kDropoff, req.order_id, req.dest, 0.0,
                 std::numeric_limits<double>::infinity()});
  return all;
}

// predecessor[s] is the stop that must be visited before s, or -1.
std::vector<int> precedence(const std::vector<Stop>& all) {
  std::vector<int> pred(all.size(), -1);
  for (size_t d = 0; d < all.size(); ++d) {
    if (all[d].kind != StopKind::kDropoff) continue;
    for (size_t p = 0; p < all.size(); ++p) {
      if (all[p].kind == StopKind::kPickup && all[p].order_id == all[d].order_id) {
        pred[d] = static_cast<int>(p);
      }
    }
  }
  return pred;
}

class ExactSearch {
 public:
  ExactSearch(const TravelModel& travel, const std::vector<Stop>& all,
              Point start, int n_existing)
      : travel_(travel),
        all_(all),
        pred_(precedence(all)),
        start_(start),
        n_existing_(n_existing),
        placed_(all.size(), false) {
    seq_.reserve(all.size());
  }

  Candidate run() {
    dfs(start_, 0.0);
    return best_;
  }

 private:
  void dfs(Point at, double elapsed) {
    if (elapsed > best_.total + kTieTolerance) return;
    if (seq_.size() == all_.size()) {
      Candidate c;
      c.sequence = seq_;
      c.total = elapsed;
      c.position_changes = count_position_changes(seq_, n_existing_);
      c.pickup_index = pickup_index_of(seq_, n_existing_);
      if (better(c, best_)) best_ = std::move(c);
      return;
    }
    for (size_t s = 0; s < all_.size(); ++s) {
      if (placed_[s]) continue;
      if (pred_[s] >= 0 && !placed_[pred_[s]]) continue;
      placed_[s] = true;
      seq_.push_back(static_cast<int>(s));
      dfs(all_[s].loc, elapsed + travel_.time(at, all_[s].loc));
      seq_.pop_back();
      placed_[s] = false;
    }
  }

  const TravelModel& travel_;
  const std::vector<Stop>& all_;
  std::vector<int> pred_;
  Point start_;
  int n_existing_;
  std::vector<bool> placed_;
  std::vector<int> seq_;
  Candidate best_;
};

InsertionResult finalize(const TravelModel& travel, const RoutePlan& route,
                         Point pos, double now, const std::vector<Stop>& all,
                         const std::vector<int>& sequence) {
  std::vector<Stop> old_stops = route.stops;
  const double old_total = retime(travel, old_stops, pos, now);

  InsertionResult out;
  out.route.stops.reserve(sequence.size());
  for (int s : sequence) out.route.stops.push_back(all[s]);
  out.route.total_time = retime(travel, out.route.stops, pos, now);

  for (const Stop& old_stop : old_stops) {
    if (old_stop.kind != StopKind::kDropoff) continue;
    for (const Stop& s : out.route.stops) {
      if (s.kind == StopKind::kDropoff && s.order_id == old_stop.order_id) {
        out.added_passenger_time += std::max(0.0, s.eta - old_stop.eta);
        if (s.eta > s.deadline) ++out.late_count;
        break;
      }
    }
  }
  out.added_vehicle_time = std::max(0.0, out.route.total_time - old_total);
  out.added_vehicle_km = travel.seconds_to_km(out.added_vehicle_time);

  const int n_existing = static_cast<int>(route.stops.size());
  for (Stop& s : out.route.stops) {
    if (s.order_id != all[n_existing].order_id) continue;
    if (s.kind == StopKind::kPickup) {
      out.new_pickup_eta = s.eta;
    } else {
      out.new_dropoff_eta = s.eta;
      s.deadline = s.eta;  // scheduled dropoff is frozen at admission
    }
  }
  return out;
}

}  // namespace

double retime(const TravelModel& travel, std::vector<Stop>& stops, Point pos,
              double now) {
  double t = now;
  Point at = pos;
  for (Stop& s : stops) {
    t += travel.time(at, s.loc);
    s.eta = t;
    at = s.loc;
  }
  return t - now;
}

bool route_is_valid(const RoutePlan& route) {
  const auto& st = route.stops;
  for (size_t i = 0; i < st.size(); ++i) {
    if (i > 0 && st[i].eta < st[i - 1].eta) return false;
    if (st[i].kind != StopKind::kDropoff) continue;
    for (size_t j = i + 1; j < st.size(); ++j) {
      if (st[j].kind == StopKind::kPickup && st[j].order_id == st[i].order_id) {
        return false;
      }
    }
  }
  return true;
}

InsertionResult best_insertion(const TravelModel& travel, const RoutePlan& route,
                               Point vehicle_pos, double now,
                               const NewRequest& request) {
  const int n_existing = static_cast<int>(route.stops.size());
  if (n_existing > kMaxExactStops) {
    return cheapest_insertion(travel, route, vehicle_pos, now, request);
  }
  const auto all = combined_stops(route, request);
  ExactSearch search(travel, all, vehicle_pos, n_existing);
  const Candidate best = search.run();
  if (best.sequence.empty()) {
    throw Error(ErrorCode::kInternal, "best_insertion: no feasible route");
  }
  return finalize(travel, route, vehicle_pos, now, all, best.sequence);
}

InsertionResult cheapest_insertion(const TravelModel& travel,
                                   const RoutePlan& route, Point vehicle_pos,
                                   double now, const NewRequest& request) {
  const int n_existing = static_cast<int>(route.stops.size());
  const auto all = combined_stops(route, request);
  Candidate best;
  for (int a = 0; a <= n_existing; ++a) {
    for (int b = a + 1; b <= n_existing + 1; ++b) {
      Candidate c;
      for (int k = 0, e = 0; k < n_existing + 2; ++k) {
        if (k == a) {
          c.sequence.push_back(n_existing);
        } else if (k == b) {
          c.sequence.push_back(n_existing + 1);
        } else {
          c.sequence.push_back(e++);
        }
      }
      Point at = vehicle_pos;
      c.total = 0.0;
      for (int s : c.sequence) {
        c.total += travel.time(at, all[s].loc);
        at = all[s].loc;
      }
      c.pickup_index = a;
      if (better(c, best)) best = std::move(c);
    }
  }
  return finalize(travel, route, vehicle_pos, now, all, best.sequence);
}

std::vector<StopEvent> advance_vehicle(const TravelModel& travel, Point& pos,
                                       RoutePlan& route, double now, double dt) {
  std::vector<StopEvent> events;
  double elapsed = 0.0;
  size_t reached = 0;
  while (reached < route.stops.size()) {
    const Stop& next = route.stops[reached];
    const double leg = travel.time(pos, next.loc);
    if (elapsed + leg <= dt + 1e-9) {
      elapsed += leg;
      pos = next.loc;
      events.push_back({next.kind, next.order_id, now + elapsed});
      ++reached;
      continue;
    }
    // Partial leg: x first, then y.
    double budget = travel.seconds_to_km(dt - elapsed);
    const double dx = next.loc.x - pos.x;
    const double step_x = std::min(std::abs(dx), budget);
    pos.x += std::copysign(step_x, dx);
    budget -= step_x;
    const double dy = next.loc.y - pos.y;
    pos.y += std::copysign(std::min(std::abs(dy), budget), dy);
    break;
  }
  route.stops.erase(route.stops.begin(), route.stops.begin() + reached);
  route.total_time =
      route.stops.empty() ? 0.0 : std::max(0.0, route.stops.back().eta - (now + dt));
  return events;
}

}  // namespace ridepool

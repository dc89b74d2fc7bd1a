#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ridepool/routing.hpp"

using namespace ridepool;

namespace {

const TravelModel kTravel(60.0);

RoutePlan timed(std::vector<Stop> stops, Point pos, double now) {
  RoutePlan r;
  r.stops = std::move(stops);
  r.total_time = retime(kTravel, r.stops, pos, now);
  return r;
}

}  // namespace

TEST_SUITE("routing") {

TEST_CASE("travel time is Manhattan distance over speed") {
  CHECK(kTravel.time({3, 4}, {3, 4}) == 0.0);
  CHECK(kTravel.time({0, 0}, {1, 2}) == doctest::Approx(180.0));
  CHECK(kTravel.time({1, 2}, {0, 0}) == kTravel.time({0, 0}, {1, 2}));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const Point a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    CHECK(kTravel.time(a, c) <= kTravel.time(a, b) + kTravel.time(b, c) + 1e-9);
  }
}

TEST_CASE("insertion into an empty route") {
  const auto r = best_insertion(kTravel, {}, {0, 0}, 100.0, {7, {1, 0}, {1, 2}});
  REQUIRE(r.route.stops.size() == 2);
  CHECK(r.route.stops[0].kind == StopKind::kPickup);
  CHECK(r.route.stops[1].kind == StopKind::kDropoff);
  CHECK(r.route.stops[0].eta == doctest::Approx(160.0));
  CHECK(r.route.stops[1].eta == doctest::Approx(280.0));
  CHECK(r.route.total_time == doctest::Approx(180.0));
  CHECK(r.added_passenger_time == 0.0);
  CHECK(r.late_count == 0);
  CHECK(r.added_vehicle_km == doctest::Approx(3.0));
  CHECK(r.new_pickup_eta == doctest::Approx(160.0));
  CHECK(r.new_dropoff_eta == doctest::Approx(280.0));
  CHECK(r.route.stops[1].deadline == r.new_dropoff_eta);
}

TEST_CASE("short ride picked up on the way to an onboard dropoff") {
  const Point pos{0, 0};
  const auto route = timed({{StopKind::kDropoff, 1, {0, 1}, 0.0, 1e9}}, pos, 0.0);
  const auto r = best_insertion(kTravel, route, pos, 0.0, {2, {0, 0}, {0, 0.5}});
  REQUIRE(r.route.stops.size() == 3);
  CHECK(r.route.stops[0].order_id == 2);
  CHECK(r.route.stops[1].order_id == 2);
  CHECK(r.route.stops[2].order_id == 1);
  CHECK(r.route.total_time == doctest::Approx(60.0));
  CHECK(r.added_passenger_time == doctest::Approx(0.0));

  const auto naive = oracle::naive_insertion(60.0, pos, 0.0, route.stops, {0, 0}, {0, 0.5});
  CHECK(naive.sequence == std::vector<int>{1, 2, 0});
  CHECK(r.route.total_time == doctest::Approx(naive.total_time));
}

TEST_CASE("insertion that delays an onboard order past its schedule counts as late") {
  // Onboard dropoff 2 km east, due exactly at its current ETA. Serving the new
  // 1 km ride first is 2 minutes shorter overall but delivers it 2 minutes late.
  const Point pos{0, 0};
  auto route = timed({{StopKind::kDropoff, 1, {2, 0}, 0.0}}, pos, 0.0);
  route.stops[0].deadline = route.stops[0].eta;
  const auto r = best_insertion(kTravel, route, pos, 0.0, {2, {0, 1}, {1, 1}});
  CHECK(r.route.total_time == doctest::Approx(240.0));
  CHECK(r.route.stops.back().order_id == 1);
  CHECK(r.late_count == 1);
  CHECK(r.added_passenger_time == doctest::Approx(120.0));

  const auto naive = oracle::naive_insertion(60.0, pos, 0.0, route.stops, {0, 1}, {1, 1});
  CHECK(naive.late == 1);
  CHECK(naive.delay == doctest::Approx(120.0));
}

TEST_CASE("equal-length routes prefer the earlier new pickup") {
  // Dropping off first and serving the new ride first both take 6 minutes.
  const Point pos{0, 0};
  const auto route = timed({{StopKind::kDropoff, 1, {2, 0}, 0.0, 1e9}}, pos, 0.0);
  const auto r = best_insertion(kTravel, route, pos, 0.0, {2, {0, 1}, {0, 2}});
  CHECK(r.route.total_time == doctest::Approx(360.0));
  CHECK(r.route.stops.front().order_id == 2);
  CHECK(r.route.stops.front().kind == StopKind::kPickup);
}

TEST_CASE("exact search agrees with exhaustive enumeration") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(0, 3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const bool grid = trial % 3 == 0;
    const int onboard = count(rng);
    const int accepted = std::uniform_int_distribution<int>(0, 3 - onboard)(rng);
    const Point pos = grid ? Point{2, 2} : Point{u(rng), u(rng)};
    const double now = 600.0;
    const auto route = oracle::random_route(rng, kTravel, pos, now, onboard, accepted,
                                            grid ? 4.0 : 10.0, grid);
    Point o{u(rng), u(rng)}, d{u(rng), u(rng)};
    if (grid) {
      o = {std::round(o.x / 2.5), std::round(o.y / 2.5)};
      d = {std::round(d.x / 2.5), std::round(d.y / 2.5) + 0.5};
    }
    const auto r = best_insertion(kTravel, route, pos, now, {999, o, d});
    const auto naive = oracle::naive_insertion(60.0, pos, now, route.stops, o, d);
    INFO("trial " << trial);
    CHECK(r.route.total_time == doctest::Approx(naive.total_time).epsilon(1e-12));
    CHECK(r.late_count == naive.late);
    CHECK(r.added_passenger_time == doctest::Approx(naive.delay).epsilon(1e-12));
    CHECK(r.added_passenger_time >= 0.0);
    CHECK(r.late_count >= 0);
    CHECK(r.late_count <= onboard + accepted);
    CHECK(route_is_valid(r.route));
    CHECK(r.route.total_time == doctest::Approx(r.route.stops.back().eta - now));
  }
}

TEST_CASE("long routes fall back to cheapest insertion") {
  std::vector<Stop> stops;
  for (int k = 0; k < kMaxExactStops + 1; ++k) {
    stops.push_back({StopKind::kDropoff, k, {static_cast<double>(k % 5), static_cast<double>(k / 5)}, 0.0, 1e9});
  }
  const auto route = timed(stops, {0, 0}, 0.0);
  const auto r = best_insertion(kTravel, route, {0, 0}, 0.0, {50, {1, 1}, {3, 2}});
  const auto c = cheapest_insertion(kTravel, route, {0, 0}, 0.0, {50, {1, 1}, {3, 2}});
  CHECK(r.route.stops.size() == stops.size() + 2);
  CHECK(r.route.total_time == c.route.total_time);
  CHECK(route_is_valid(r.route));
  // Existing stops keep their relative order.
  int last = -1;
  for (const Stop& s : r.route.stops) {
    if (s.order_id == 50) continue;
    CHECK(s.order_id > last);
    last = s.order_id;
  }
}

TEST_CASE("route validity checks precedence and time order") {
  RoutePlan bad;
  bad.stops = {{StopKind::kDropoff, 1, {0, 0}, 10.0}, {StopKind::kPickup, 1, {1, 0}, 20.0}};
  CHECK_FALSE(route_is_valid(bad));
  RoutePlan backwards;
  backwards.stops = {{StopKind::kDropoff, 1, {0, 0}, 20.0}, {StopKind::kDropoff, 2, {1, 0}, 10.0}};
  CHECK_FALSE(route_is_valid(backwards));
  CHECK(route_is_valid(RoutePlan{}));
}

TEST_CASE("idle vehicle stays put") {
  Point pos{4, 4};
  RoutePlan route;
  const auto ev = advance_vehicle(kTravel, pos, route, 0.0, 60.0);
  CHECK(ev.empty());
  CHECK(pos == Point{4, 4});
}

TEST_CASE("stop exactly one step away fires at the step boundary") {
  Point pos{0, 0};
  auto route = timed({{StopKind::kDropoff, 3, {0.5, 0.5}, 0.0}}, pos, 120.0);
  const auto ev = advance_vehicle(kTravel, pos, route, 120.0, 60.0);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].time == doctest::Approx(180.0));
  CHECK(route.empty());
  CHECK(pos == Point{0.5, 0.5});
}

TEST_CASE("two stops within one step fire in order") {
  Point pos{0, 0};
  auto route = timed({{StopKind::kPickup, 1, {1.0 / 3.0, 0}, 0.0},
                      {StopKind::kDropoff, 1, {1.0 / 3.0 + 0.5, 0}, 0.0}},
                     pos, 0.0);
  const auto ev = advance_vehicle(kTravel, pos, route, 0.0, 60.0);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].kind == StopKind::kPickup);
  CHECK(ev[0].time == doctest::Approx(20.0));
  CHECK(ev[1].kind == StopKind::kDropoff);
  CHECK(ev[1].time == doctest::Approx(50.0));
}

TEST_CASE("partial legs move along x before y") {
  Point pos{0, 0};
  auto route = timed({{StopKind::kDropoff, 1, {0.5, 2.0}, 0.0}}, pos, 0.0);
  const auto ev = advance_vehicle(kTravel, pos, route, 0.0, 60.0);
  CHECK(ev.empty());
  CHECK(pos.x == doctest::Approx(0.5));
  CHECK(pos.y == doctest::Approx(0.5));
  CHECK(route.total_time == doctest::Approx(90.0));
}

TEST_CASE("advancing keeps routes valid") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Point pos{5, 5};
    double now = 0.0;
    auto route = oracle::random_route(rng, kTravel, pos, now, 2, 1, 10.0, false);
    int events = 0;
    while (!route.empty()) {
      const auto ev = advance_vehicle(kTravel, pos, route, now, 60.0);
      now += 60.0;
      for (size_t k = 1; k < ev.size(); ++k) CHECK(ev[k].time >= ev[k - 1].time);
      events += static_cast<int>(ev.size());
      CHECK(route_is_valid(route));
      CHECK(pos.x >= 0.0);
      CHECK(pos.x <= 10.0);
    }
    CHECK(events == 4);
  }
}

}  // TEST_SUITE

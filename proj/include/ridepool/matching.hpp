#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ridepool/routing.hpp"

namespace ridepool {

// Dense driver x order score table. Infeasible pairs carry a flag instead of
// a numeric -inf so they never enter arithmetic.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(int n_drivers, int n_orders)
      : n_(n_drivers),
        w_(n_orders),
        scores_(static_cast<size_t>(n_drivers) * n_orders, 0.0),
        feasible_(static_cast<size_t>(n_drivers) * n_orders, 0) {}

  int drivers() const { return n_; }
  int orders() const { return w_; }

  bool feasible(int i, int j) const { return feasible_[idx(i, j)] != 0; }
  double score(int i, int j) const { return scores_[idx(i, j)]; }

  void set(int i, int j, double score) {
    scores_[idx(i, j)] = score;
    feasible_[idx(i, j)] = 1;
  }
  void mark_infeasible(int i, int j) {
    scores_[idx(i, j)] = 0.0;
    feasible_[idx(i, j)] = 0;
  }

 private:
  size_t idx(int i, int j) const { return static_cast<size_t>(i) * w_ + j; }

  int n_ = 0;
  int w_ = 0;
  std::vector<double> scores_;
  std::vector<uint8_t> feasible_;
};

struct Assignment {
  // (driver, order) pairs, sorted by driver.
  std::vector<std::pair<int, int>> pairs;

  bool empty() const { return pairs.empty(); }
  size_t size() const { return pairs.size(); }
};

// Sum of pair scores, accumulated in (order, driver) order so equal pair sets
// produce bit-identical totals.
double total_score(const ScoreMatrix& scores, const Assignment& a);

// Throws Error(kInvariant) if a pair repeats a driver or an order, sits on an
// infeasible entry, or is out of range.
void check_assignment(const ScoreMatrix& scores, const Assignment& a);

// Maximum-score partial matching (each driver and each order used at most
// once). Shortest-augmenting-path Hungarian method on a driver x (orders +
// per-driver "unmatched" slot) cost table; zero-score pairs are dropped.
Assignment solve_assignment(const ScoreMatrix& scores);

// Exhaustive search for tests; limited to 8 x 8. Among equal totals picks the
// lexicographically smallest (order, driver) pair sequence.
Assignment brute_force_assignment(const ScoreMatrix& scores);

struct DriverSlot {
  Point pos;
  int remaining_capacity = 0;
};

struct PendingOrder {
  Point origin;
  double arrival_t = 0.0;
};

// Nearest-available-driver dispatch. Orders are taken in arrival order (ties
// by index); drivers already used this step or without capacity are skipped;
// ties by lower driver index. `radius_km` > 0 bounds the pickup distance.
Assignment greedy_assignment(const TravelModel& travel,
                             std::span<const DriverSlot> drivers,
                             std::span<const PendingOrder> orders,
                             double radius_km = 0.0);

}  // namespace ridepool

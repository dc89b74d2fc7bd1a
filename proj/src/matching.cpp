#include "ridepool/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ridepool {
namespace {

std::vector<std::pair<int, int>> by_order(const Assignment& a) {
  std::vector<std::pair<int, int>> v;
  v.reserve(a.pairs.size());
  for (auto [i, j] : a.pairs) v.emplace_back(j, i);
  std::sort(v.begin(), v.end());
  return v;
}

class BruteForce {
 public:
  explicit BruteForce(const ScoreMatrix& s)
      : s_(s), used_(static_cast<size_t>(s.orders()), false) {}

  Assignment run() {
    recurse(0);
    Assignment a;
    for (auto [j, i] : best_) a.pairs.emplace_back(i, j);
    std::sort(a.pairs.begin(), a.pairs.end());
    return a;
  }

 private:
  void recurse(int driver) {
    if (driver == s_.drivers()) {
      auto key = current_;
      std::sort(key.begin(), key.end());
      double total = 0.0;
      for (auto [j, i] : key) total += s_.score(i, j);
      if (!have_best_ || total > best_total_ ||
          (total == best_total_ && key < best_)) {
        have_best_ = true;
        best_total_ = total;
        best_ = std::move(key);
      }
      return;
    }
    recurse(driver + 1);
    for (int j = 0; j < s_.orders(); ++j) {
      if (used_[j] || !s_.feasible(driver, j)) continue;
      used_[j] = true;
      current_.emplace_back(j, driver);
      recurse(driver + 1);
      current_.pop_back();
      used_[j] = false;
    }
  }

  const ScoreMatrix& s_;
  std::vector<bool> used_;
  std::vector<std::pair<int, int>> current_;  // (order, driver)
  std::vector<std::pair<int, int>> best_;
  double best_total_ = 0.0;
  bool have_best_ = false;
};

}  // namespace

double total_score(const ScoreMatrix& scores, const Assignment& a) {
  double total = 0.0;
  for (auto [j, i] : by_order(a)) total += scores.score(i, j);
  return total;
}

void check_assignment(const ScoreMatrix& scores, const Assignment& a) {
  std::vector<bool> driver_used(static_cast<size_t>(scores.drivers()), false);
  std::vector<bool> order_used(static_cast<size_t>(scores.orders()), false);
  for (auto [i, j] : a.pairs) {
    if (i < 0 || i >= scores.drivers() || j < 0 || j >= scores.orders()) {
      throw Error(ErrorCode::kInvariant, "assignment pair out of range");
    }
    if (driver_used[i]) {
      throw Error(ErrorCode::kInvariant,
                  "driver " + std::to_string(i) + " assigned more than one order");
    }
    if (order_used[j]) {
      throw Error(ErrorCode::kInvariant,
                  "order " + std::to_string(j) + " assigned to more than one driver");
    }
    if (!scores.feasible(i, j)) {
      throw Error(ErrorCode::kInvariant, "assignment uses an infeasible pair (" +
                                             std::to_string(i) + "," +
                                             std::to_string(j) + ")");
    }
    driver_used[i] = true;
    order_used[j] = true;
  }
}

Assignment solve_assignment(const ScoreMatrix& scores) {
  const int n = scores.drivers();
  const int w = scores.orders();
  Assignment out;
  if (n == 0 || w == 0) return out;

  double max_abs = 0.0;
  bool any_feasible = false;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!scores.feasible(i, j)) continue;
      any_feasible = true;
      max_abs = std::max(max_abs, std::abs(scores.score(i, j)));
    }
  }
  if (!any_feasible) return out;

  // Columns: w real orders followed by n zero-cost "unmatched" slots, so every
  // driver can always be left out.
  const int m = w + n;
  const double blocked = (max_abs + 1.0) * (n + 1);
  auto cost = [&](int i, int j) {
    if (j >= w) return 0.0;
    return scores.feasible(i, j) ? -scores.score(i, j) : blocked;
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (int row = 1; row <= n; ++row) {
    p[0] = row;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (int j = 1; j <= w; ++j) {
    if (p[j] == 0) continue;
    const int i = p[j] - 1;
    const int order = j - 1;
    if (scores.feasible(i, order) && scores.score(i, order) > 0.0) {
      out.pairs.emplace_back(i, order);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

Assignment brute_force_assignment(const ScoreMatrix& scores) {
  if (scores.drivers() > 8 || scores.orders() > 8) {
    throw Error(ErrorCode::kInvalidArgument,
                "brute_force_assignment: matrix larger than 8x8");
  }
  return BruteForce(scores).run();
}

Assignment greedy_assignment(const TravelModel& travel,
                             std::span<const DriverSlot> drivers,
                             std::span<const PendingOrder> orders,
                             double radius_km) {
  std::vector<int> order_idx(orders.size());
  std::iota(order_idx.begin(), order_idx.end(), 0);
  std::stable_sort(order_idx.begin(), order_idx.end(), [&](int a, int b) {
    return orders[a].arrival_t < orders[b].arrival_t;
  });

  std::vector<bool> taken(drivers.size(), false);
  Assignment out;
  for (int j : order_idx) {
    int best = -1;
    double best_time = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < drivers.size(); ++i) {
      if (taken[i] || drivers[i].remaining_capacity < 1) continue;
      if (radius_km > 0.0 && manhattan_km(drivers[i].pos, orders[j].origin) > radius_km) {
        continue;
      }
      const double t = travel.time(drivers[i].pos, orders[j].origin);
      if (t < best_time) {
        best_time = t;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      taken[best] = true;
      out.pairs.emplace_back(best, j);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

}  // namespace ridepool

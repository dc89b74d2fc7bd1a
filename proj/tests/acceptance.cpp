// Acceptance suite: one PASS/FAIL line per criterion. The process exits 0
// whenever every criterion ran to a verdict; the lines carry the outcome.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oracles.hpp"
#include "ridepool/advantage.hpp"
#include "ridepool/checkpoint.hpp"
#include "ridepool/harness.hpp"
#include "ridepool/matching.hpp"
#include "ridepool/routing.hpp"
#include "ridepool/trainer.hpp"

using namespace ridepool;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// 1. Hungarian against brute force.
Verdict matching_criterion() {
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  const auto t0 = Clock::now();
  for (int k = 0; k < 1000; ++k) {
    ScoreMatrix m(dim(rng), dim(rng));
    for (int i = 0; i < m.drivers(); ++i) {
      for (int j = 0; j < m.orders(); ++j) {
        if (u(rng) >= 0.2) m.set(i, j, u(rng));
      }
    }
    const Assignment a = solve_assignment(m);
    check_assignment(m, a);
    if (total_score(m, a) != total_score(m, brute_force_assignment(m))) ++mismatches;
  }
  const double dt = seconds_since(t0);
  return {mismatches == 0 && dt < 10.0,
          "mismatches=" + std::to_string(mismatches) + " time_s=" + fmt(dt)};
}

// 2. Exact insertion against exhaustive permutations.
Verdict insertion_criterion() {
  const TravelModel travel(60.0);
  std::mt19937_64 rng(20240102);
  std::uniform_int_distribution<int> count(0, 3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  int mismatches = 0;
  const auto t0 = Clock::now();
  for (int k = 0; k < 1000; ++k) {
    const int onboard = count(rng);
    const int accepted = std::uniform_int_distribution<int>(0, 3 - onboard)(rng);
    const Point pos{u(rng), u(rng)};
    const double now = 60.0 * (1 + k % 30);
    const RoutePlan route = oracle::random_route(rng, travel, pos, now, onboard, accepted, 10.0, false);
    const Point o{u(rng), u(rng)}, d{u(rng), u(rng)};
    const InsertionResult r = best_insertion(travel, route, pos, now, {9999, o, d});
    const auto naive = oracle::naive_insertion(60.0, pos, now, route.stops, o, d);
    const bool same_time = std::abs(r.route.total_time - naive.total_time) <= 1e-9 * std::max(1.0, naive.total_time);
    const bool same_late = r.late_count == naive.late;
    const bool same_delay = std::abs(r.added_passenger_time - naive.delay) <= 1e-9 * std::max(1.0, naive.delay);
    if (!(same_time && same_late && same_delay)) ++mismatches;
  }
  const double dt = seconds_since(t0);
  return {mismatches == 0 && dt < 30.0,
          "mismatches=" + std::to_string(mismatches) + " time_s=" + fmt(dt)};
}

// 3. Backpropagation against central differences.
Verdict gradient_criterion() {
  Config cfg;
  const std::vector<int> sizes = policy_layer_sizes(cfg);
  std::mt19937_64 rng(20240103);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int checked = 0;
  for (int n = 0; n < 50; ++n) {
    Mlp net = Mlp::he_uniform(sizes, 5000 + n);
    for (int l = 0; l < net.layers(); ++l) {
      for (Eigen::Index k = 0; k < net.bias(l).size(); ++k) net.bias(l)(k) = 0.1 * u(rng);
    }
    Eigen::MatrixXd x(sizes.front(), 4);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = u(rng);
    Eigen::RowVectorXd w(4);
    for (int k = 0; k < 4; ++k) w(k) = u(rng);
    auto loss = [&](const Mlp& m) { return m.forward_batch(x).dot(w); };
    MlpGrads g = MlpGrads::zeros_like(net);
    net.backward_batch(x, w, g);
    std::uniform_int_distribution<size_t> pick(0, net.parameter_count() - 1);
    for (int k = 0; k < 12; ++k) {
      const size_t p = pick(rng);
      const double numeric = oracle::central_difference(net, p, 1e-5, loss);
      worst = std::max(worst, oracle::relative_error(g.param(p), numeric));
      ++checked;
    }
  }
  return {worst < 1e-4, "params=" + std::to_string(checked) + " max_rel_err=" + fmt(worst, 3)};
}

// 4. Advantage invariants over simulated episodes.
Verdict advantage_criterion() {
  Config cfg;
  cfg.sim.n_drivers = 20;
  cfg.sim.horizon = 15;
  cfg.sim.arrival_rate = 8.0;
  cfg.sim.pickup_radius_km = 3.0;
  const Mlp policy = Mlp::he_uniform(policy_layer_sizes(cfg), 77);
  double ospo_mean = 0.0, ospo_std = 0.0, grpo_mean = 0.0, grpo_std = 0.0, equal = 0.0;
  int groups = 0;
  auto check_group = [](const std::vector<double>& v, double& worst_mean, double& worst_std) {
    worst_mean = std::max(worst_mean, std::abs(mean_of(v)));
    worst_std = std::max(worst_std, std::abs(std::sqrt(variance_of(v)) - 1.0));
  };
  for (int e = 0; e < 100; ++e) {
    EpisodeBuffer buf;
    RolloutOptions opts;
    opts.policy = &policy;
    opts.buffer = &buf;
    opts.noise = 0.1;
    opts.noise_seed = 300 + e;
    run_episode(cfg.sim, SyntheticSource{}, 9000 + e, opts);
    const Eigen::MatrixXd& r = buf.rewards;

    const auto step = ospo_step_advantage(r, buf.spread_delta, 0.0);
    for (Eigen::Index t = 0; t < r.rows(); ++t) {
      std::vector<double> raw, adv;
      for (Eigen::Index i = 0; i < r.cols(); ++i) {
        if (r(t, i) == 0.0) continue;
        raw.push_back(r(t, i));
        adv.push_back(step.values(t, i));
      }
      if (raw.size() < 2 || population_std(raw) <= kSigmaFloor) continue;
      check_group(adv, ospo_mean, ospo_std);
      ++groups;
    }

    const auto grpo = grpo_advantage(r, buf.spread_delta, 0.0, 0.0);
    const auto episode = ospo_episode_advantage(r, buf.spread_delta, 0.0);
    if (grpo.stats.count < 2) continue;
    std::vector<double> adv;
    for (Eigen::Index k = 0; k < r.size(); ++k) {
      if (r.data()[k] != 0.0) adv.push_back(grpo.values.data()[k]);
    }
    check_group(adv, grpo_mean, grpo_std);

    const auto with_penalty = grpo_advantage(r, buf.spread_delta, 0.0, 0.1);
    const auto episode_penalty = ospo_episode_advantage(r, buf.spread_delta, 0.1);
    equal = std::max(equal, (grpo.values - episode.values).cwiseAbs().maxCoeff());
    equal = std::max(equal, (with_penalty.values - episode_penalty.values).cwiseAbs().maxCoeff());
  }
  const bool pass = groups > 0 && ospo_mean < 1e-9 && ospo_std <= 1e-6 && grpo_mean < 1e-9 &&
                    grpo_std <= 1e-6 && equal <= 1e-12;
  return {pass, "step_groups=" + std::to_string(groups) + " ospo_mean=" + fmt(ospo_mean, 3) +
                    " ospo_std_dev=" + fmt(ospo_std, 3) + " grpo_mean=" + fmt(grpo_mean, 3) +
                    " grpo_std_dev=" + fmt(grpo_std, 3) + " gamma0_diff=" + fmt(equal, 3)};
}

// Independent feasibility and bookkeeping checks on every training step.
class StepChecker {
 public:
  void before(const World& w, const Assignment& a) {
    ++steps_;
    const auto pool = w.pool();
    const auto vehicles = w.vehicles();
    const auto orders = w.orders();
    const double radius = w.config().pickup_radius_km;
    std::set<int> drivers, columns;
    for (auto [i, j] : a.pairs) {
      if (i < 0 || i >= static_cast<int>(vehicles.size()) || j < 0 ||
          j >= static_cast<int>(pool.size())) {
        flag("pair out of range");
        continue;
      }
      if (!drivers.insert(i).second) flag("driver matched twice");
      if (!columns.insert(j).second) flag("order matched twice");
      const VehicleState& v = vehicles[i];
      const Order& o = orders[pool[j]];
      if (o.status != OrderStatus::kPending) flag("order not pending");
      if (v.remaining_capacity() < 1) flag("driver has no free seat");
      if (radius > 0.0 && manhattan_km(v.pos, o.origin) > radius + 1e-9) flag("pickup beyond radius");
      if (o.arrival_t > w.now()) flag("order matched before it arrived");
    }
    last_now_ = w.now();
  }

  void after(const World& w, const Assignment& a, const StepOutcome& out) {
    int accepted = 0;
    std::set<int> ids;
    for (int id : out.accepted_order) {
      if (id < 0) continue;
      ++accepted;
      if (!ids.insert(id).second) flag("order accepted by two drivers");
    }
    if (accepted != static_cast<int>(a.size())) flag("accepted count differs from assignment");
    for (const VehicleState& v : w.vehicles()) {
      if (v.onboard.size() + v.assigned.size() > static_cast<size_t>(v.capacity)) flag("capacity exceeded");
      if (v.remaining_capacity() < 0) flag("negative remaining capacity");
      double prev = -1.0;
      for (const Stop& s : v.route.stops) {
        if (s.eta < prev) flag("route eta decreases");
        prev = s.eta;
      }
    }
    for (const StopEvent& e : out.events) {
      if (e.time < last_now_ - 1e-9 || e.time > w.now() + 1e-9) flag("event outside its step");
    }
    for (const Order& o : w.orders()) {
      double t = o.arrival_t;
      for (const auto& stamp : {o.assigned_t, o.pickup_t, o.dropoff_t}) {
        if (!stamp) continue;
        if (*stamp < t - 1e-9) flag("timestamps out of order");
        t = *stamp;
      }
      if (o.pickup_t && !o.assigned_t) flag("picked up without assignment");
      if (o.dropoff_t && !o.pickup_t) flag("dropped off without pickup");
    }
  }

  void flag(const std::string& what) {
    ++violations_;
    if (first_.empty()) first_ = what;
  }

  long steps() const { return steps_; }
  long violations() const { return violations_; }
  const std::string& first() const { return first_; }

 private:
  long steps_ = 0;
  long violations_ = 0;
  double last_now_ = 0.0;
  std::string first_;
};

struct MethodRuns {
  std::vector<double> best_reward, best_pickup, final_reward, final_pickup;
  double wall_s = 0.0;
};

struct Study {
  Config base;
  std::vector<uint64_t> test_seeds;
  EvalReport greedy;
  std::map<std::string, MethodRuns> runs;
  StepChecker checker;
  std::string error;
};

EvalReport eval_checkpoint(const Config& cfg, const fs::path& ckpt, const std::vector<uint64_t>& seeds) {
  const Checkpoint c = load_checkpoint(ckpt.string());
  require_layer_sizes(c.net, policy_layer_sizes(cfg));
  return evaluate_report(cfg, SyntheticSource{}, &c.net, seeds);
}

void run_study(Study& s, const fs::path& out, const std::vector<std::string>& methods) {
  const std::vector<uint64_t> train_seeds{1, 2, 3};
  s.greedy = evaluate_report(s.base, SyntheticSource{}, nullptr, s.test_seeds);
  for (const std::string& method : methods) {
    MethodRuns& mr = s.runs[method];
    const auto t0 = Clock::now();
    for (uint64_t seed : train_seeds) {
      Config cfg = s.base;
      cfg.trainer.method = parse_method(method);
      cfg.sim.seed = seed;
      RunOptions opts;
      opts.run_dir = out / ("train-" + method + "-seed" + std::to_string(seed));
      fs::remove_all(*opts.run_dir);
      opts.pre_step_observer = [&](const World& w, const Assignment& a) { s.checker.before(w, a); };
      opts.step_observer = [&](const World& w, const Assignment& a, const StepOutcome& o) {
        s.checker.after(w, a, o);
      };
      TrainResult tr;
      try {
        tr = run_training(cfg, opts);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kInvariant) s.checker.flag(std::string("world rejected a step: ") + e.what());
        throw;
      }
      const EvalReport best = eval_checkpoint(cfg, tr.run_dir / "best.ckpt", s.test_seeds);
      const EvalReport fin = eval_checkpoint(cfg, tr.run_dir / "final.ckpt", s.test_seeds);
      mr.best_reward.push_back(best.total_reward.mean);
      mr.best_pickup.push_back(best.pickup.mean);
      mr.final_reward.push_back(fin.total_reward.mean);
      mr.final_pickup.push_back(fin.pickup.mean);
      std::cerr << "  " << method << " seed " << seed << ": best " << fmt(best.total_reward.mean, 6)
                << " (episode " << tr.best_episode << ") final " << fmt(fin.total_reward.mean, 6)
                << " pickup " << fmt(best.pickup.mean, 5) << "\n";
    }
    mr.wall_s = seconds_since(t0);
  }
}

Verdict improvement_criterion(const Study& s) {
  if (!s.error.empty()) return {false, "study failed: " + s.error};
  const double g = s.greedy.total_reward.mean, gp = s.greedy.pickup.mean;
  bool pass = true;
  std::string detail = "greedy=" + fmt(g, 6) + " greedy_pickup=" + fmt(gp, 5);
  for (const char* m : {"ospo", "grpo"}) {
    const MethodRuns& r = s.runs.at(m);
    const double reward = mean_of(r.best_reward), pickup = mean_of(r.best_pickup);
    const bool ok = reward >= 1.05 * g && pickup <= gp && r.wall_s < 1800.0;
    pass = pass && ok;
    detail += std::string(" ") + m + "=" + fmt(reward, 6) + " (x" + fmt(reward / g, 4) +
              ", pickup " + fmt(pickup, 5) + ", " + fmt(r.wall_s, 4) + " s)";
  }
  return {pass, detail};
}

Verdict stability_criterion(const Study& s) {
  if (!s.error.empty()) return {false, "study failed: " + s.error};
  const MethodRuns& o = s.runs.at("ospo");
  const MethodRuns& g = s.runs.at("grpo");
  const MethodRuns& i = s.runs.at("ipg");
  const double om = mean_of(o.final_reward), gm = mean_of(g.final_reward);
  const double ov = variance_of(o.final_reward), iv = variance_of(i.final_reward);
  const bool pass = om >= gm - 0.02 * std::abs(gm) && iv > ov;
  return {pass, "ospo_final=" + fmt(om, 6) + " grpo_final=" + fmt(gm, 6) + " ipg_var=" + fmt(iv, 4) +
                    " ospo_var=" + fmt(ov, 4)};
}

Verdict invariant_criterion(const Study& s) {
  const bool pass = s.checker.steps() > 0 && s.checker.violations() == 0 && s.error.empty();
  std::string detail = "steps_checked=" + std::to_string(s.checker.steps()) +
                       " violations=" + std::to_string(s.checker.violations());
  if (!s.checker.first().empty()) detail += " first=\"" + s.checker.first() + "\"";
  if (!s.error.empty()) detail += " error=\"" + s.error + "\"";
  return {pass, detail};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 7. Byte-identical artifacts for the same config and seed.
Verdict reproducibility_criterion(const fs::path& out, const fs::path& config) {
  Config cfg = Config::load(config.string());
  const fs::path a = out / "repro-a", b = out / "repro-b";
  fs::remove_all(a);
  fs::remove_all(b);
  RunOptions oa, ob;
  oa.run_dir = a;
  ob.run_dir = b;
  run_training(cfg, oa);
  run_training(cfg, ob);
  int compared = 0, differ = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string ext = entry.path().extension().string();
    if (ext != ".csv" && ext != ".ckpt") continue;
    ++compared;
    if (read_file(entry.path()) != read_file(b / entry.path().filename())) ++differ;
  }
  return {compared >= 4 && differ == 0,
          "files_compared=" + std::to_string(compared) + " differing=" + std::to_string(differ)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string out = "acceptance-runs";
  std::string source_dir = RIDEPOOL_SOURCE_DIR;
  std::vector<int> only;
  app.add_option("--out", out, "Directory for training runs");
  app.add_option("--source-dir", source_dir, "Repository root (for configs/)");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path out_dir = fs::absolute(out);
  fs::create_directories(out_dir);
  const fs::path configs = fs::path(source_dir) / "configs";
  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  std::vector<std::pair<int, Verdict>> results;
  auto run = [&](int k, const std::function<Verdict()>& f) {
    if (!wanted(k)) return;
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << " " << v.detail << std::endl;
    results.emplace_back(k, v);
  };

  run(1, matching_criterion);
  run(2, insertion_criterion);
  run(3, gradient_criterion);
  run(4, advantage_criterion);

  Study study;
  if (wanted(5) || wanted(6) || wanted(8)) {
    try {
      study.base = Config::load((configs / "synthetic_city.txt").string());
      for (uint64_t s = 2000; s < 2010; ++s) study.test_seeds.push_back(s);
      run_study(study, out_dir, {"ospo", "grpo", "ipg"});
    } catch (const std::exception& e) {
      study.error = e.what();
    }
  }
  run(5, [&] { return improvement_criterion(study); });
  run(6, [&] { return stability_criterion(study); });
  run(7, [&] { return reproducibility_criterion(out_dir, configs / "smoke.txt"); });
  run(8, [&] { return invariant_criterion(study); });

  json summary = json::object();
  for (const auto& [k, v] : results) {
    summary[std::to_string(k)] = {{"pass", v.pass}, {"detail", v.detail}};
  }
  if (!study.runs.empty()) {
    json runs = json::object();
    for (const auto& [m, r] : study.runs) {
      runs[m] = {{"best_reward", r.best_reward}, {"best_pickup", r.best_pickup},
                 {"final_reward", r.final_reward}, {"final_pickup", r.final_pickup},
                 {"wall_s", r.wall_s}};
    }
    summary["study"] = {{"greedy_reward", study.greedy.total_reward.mean},
                        {"greedy_pickup", study.greedy.pickup.mean},
                        {"test_seeds", study.test_seeds},
                        {"runs", runs}};
  }
  std::ofstream(out_dir / "acceptance.json") << summary.dump(2) << "\n";
  return 0;
}

#include "ridepool/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ridepool/checkpoint.hpp"
#include "ridepool/common.hpp"

namespace ridepool {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : "NA"; }

std::string fmt_summary(const MetricSummary& m) {
  return m.count ? fmt_double(m.mean) : "NA";
}

json summary_json(const MetricSummary& m) {
  if (m.count == 0) return json{{"mean", nullptr}, {"std", nullptr}, {"count", 0}};
  return json{{"mean", m.mean}, {"std", m.std}, {"count", m.count}};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const EpisodeMetrics& m) {
  return json{{"spawned", m.spawned},
              {"served", m.served},
              {"cancelled", m.cancelled},
              {"total_reward", m.total_reward},
              {"mean_delivery_time", opt_json(m.mean_delivery_time)},
              {"mean_detour_time", opt_json(m.mean_detour_time)},
              {"mean_pickup_time", opt_json(m.mean_pickup_time)},
              {"mean_confirmation_time", opt_json(m.mean_confirmation_time)}};
}

MetricSummary summarize_values(const std::vector<double>& v) {
  MetricSummary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  return s;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + p.string() + "'");
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::string seeds_text(std::span<const uint64_t> seeds) {
  std::string s;
  for (size_t k = 0; k < seeds.size(); ++k) s += (k ? "," : "") + std::to_string(seeds[k]);
  return s;
}

json checkpoint_entry(const fs::path& dir, const std::string& name, const Mlp& net,
                      const Adam& adam, const CheckpointMeta& meta) {
  const auto bytes = serialize_checkpoint(net, adam, meta);
  write_file_bytes((dir / name).string(), bytes);
  return json{{"path", name}, {"hash", git_blob_hash(bytes)}, {"episode", meta.episode}};
}

Mlp load_policy(const Config& cfg, const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  require_layer_sizes(ck.net, policy_layer_sizes(cfg));
  return std::move(ck.net);
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<OrderRecord> parse_orders_csv(std::string_view text, const SimConfig& cfg) {
  std::vector<OrderRecord> out;
  size_t line_no = 0;
  bool header_seen = false;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "orders csv line " + std::to_string(line_no) + ": ";
    if (!header_seen) {
      if (line != "arrival_s,ox,oy,dx,dy") {
        throw Error(ErrorCode::kFormat, where + "expected header 'arrival_s,ox,oy,dx,dy'");
      }
      header_seen = true;
      continue;
    }
    double f[5];
    size_t start = 0;
    for (int k = 0; k < 5; ++k) {
      size_t comma = line.find(',', start);
      if ((comma == std::string_view::npos) != (k == 4)) {
        throw Error(ErrorCode::kFormat, where + "expected 5 fields");
      }
      if (comma == std::string_view::npos) comma = line.size();
      const std::string_view field = trim(line.substr(start, comma - start));
      const char* end = field.data() + field.size();
      auto [ptr, ec] = std::from_chars(field.data(), end, f[k]);
      if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(f[k])) {
        throw Error(ErrorCode::kFormat, where + "bad number '" + std::string(field) + "'");
      }
      start = comma + 1;
    }
    if (f[0] < 0.0 || f[0] >= cfg.episode_seconds()) {
      throw Error(ErrorCode::kFormat, where + "arrival_s outside [0, episode length)");
    }
    for (int k = 1; k < 5; ++k) {
      const double limit = (k % 2 == 1) ? cfg.extent_x_km : cfg.extent_y_km;
      if (f[k] < 0.0 || f[k] > limit) {
        throw Error(ErrorCode::kFormat, where + "coordinate outside the city extent");
      }
    }
    OrderRecord r{f[0], {f[1], f[2]}, {f[3], f[4]}};
    if (r.origin == r.dest) throw Error(ErrorCode::kFormat, where + "origin equals destination");
    out.push_back(r);
  }
  if (!header_seen) throw Error(ErrorCode::kFormat, "orders csv is empty");
  std::stable_sort(out.begin(), out.end(), [](const OrderRecord& a, const OrderRecord& b) {
    return a.arrival_s < b.arrival_s;
  });
  return out;
}

std::vector<OrderRecord> load_orders_csv(const std::string& path, const SimConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open orders csv '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_orders_csv(ss.str(), cfg);
}

OrderSource make_order_source(const SimConfig& cfg) {
  if (cfg.orders_csv.empty()) return SyntheticSource{};
  return ReplaySource{std::make_shared<const std::vector<OrderRecord>>(
      load_orders_csv(cfg.orders_csv, cfg))};
}

std::string git_blob_hash(std::span<const uint8_t> bytes) {
  const std::string head = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error(ErrorCode::kInternal, "sha1 context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, head.data(), head.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error(ErrorCode::kInternal, "sha1 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int k = 0; k < len; ++k) {
    hex += kHex[md[k] >> 4];
    hex += kHex[md[k] & 15];
  }
  return hex;
}

fs::path make_run_dir(const fs::path& root, std::string_view kind, std::string_view fingerprint) {
  const std::vector<uint8_t> bytes(fingerprint.begin(), fingerprint.end());
  const std::string base =
      std::string(kind) + "-" + timestamp_utc() + "-" + git_blob_hash(bytes).substr(0, 8);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + root.string() + "': " + ec.message());
  for (int k = 0; k < 1000; ++k) {
    const fs::path p = root / (k == 0 ? base : base + "-" + std::to_string(k));
    if (fs::create_directory(p, ec)) return p;
    if (ec) throw Error(ErrorCode::kIo, "cannot create '" + p.string() + "': " + ec.message());
  }
  throw Error(ErrorCode::kIo, "no free run directory name under '" + root.string() + "'");
}

static fs::path resolve_run_dir(const RunOptions& opts, std::string_view kind,
                                std::string_view fingerprint) {
  if (!opts.run_dir) return make_run_dir(opts.out_root, kind, fingerprint);
  std::error_code ec;
  fs::create_directories(*opts.run_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + opts.run_dir->string() + "'");
  return *opts.run_dir;
}

EvalReport summarize(std::span<const uint64_t> seeds, std::span<const EpisodeMetrics> metrics) {
  if (seeds.size() != metrics.size()) {
    throw Error(ErrorCode::kShapeMismatch, "summarize: one metrics entry per seed required");
  }
  std::vector<size_t> order(seeds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return seeds[a] < seeds[b]; });
  EvalReport r;
  std::vector<double> reward, served, cancelled, delivery, detour, pickup, confirmation;
  for (size_t k : order) {
    const EpisodeMetrics& m = metrics[k];
    r.seeds.push_back(seeds[k]);
    r.per_seed.push_back(m);
    reward.push_back(m.total_reward);
    served.push_back(m.served);
    cancelled.push_back(m.cancelled);
    if (m.mean_delivery_time) delivery.push_back(*m.mean_delivery_time);
    if (m.mean_detour_time) detour.push_back(*m.mean_detour_time);
    if (m.mean_pickup_time) pickup.push_back(*m.mean_pickup_time);
    if (m.mean_confirmation_time) confirmation.push_back(*m.mean_confirmation_time);
  }
  r.total_reward = summarize_values(reward);
  r.served = summarize_values(served);
  r.cancelled = summarize_values(cancelled);
  r.delivery = summarize_values(delivery);
  r.detour = summarize_values(detour);
  r.pickup = summarize_values(pickup);
  r.confirmation = summarize_values(confirmation);
  return r;
}

EvalReport evaluate_report(const Config& cfg, const OrderSource& source, const Mlp* policy,
                           std::span<const uint64_t> seeds) {
  const auto metrics = evaluate(cfg.sim, source, policy, seeds, cfg.trainer.idle_action);
  return summarize(seeds, metrics);
}

std::string eval_report_json(const EvalReport& r) {
  json per_seed = json::array();
  for (size_t k = 0; k < r.seeds.size(); ++k) {
    json m = metrics_json(r.per_seed[k]);
    m["seed"] = r.seeds[k];
    per_seed.push_back(std::move(m));
  }
  json j{{"seeds", r.seeds},
         {"total_reward", summary_json(r.total_reward)},
         {"served", summary_json(r.served)},
         {"cancelled", summary_json(r.cancelled)},
         {"delivery_time", summary_json(r.delivery)},
         {"detour_time", summary_json(r.detour)},
         {"pickup_time", summary_json(r.pickup)},
         {"confirmation_time", summary_json(r.confirmation)},
         {"per_seed", std::move(per_seed)}};
  return j.dump();
}

std::string eval_report_csv(const EvalReport& r) {
  std::string out =
      "seed,served,cancelled,total_reward,mean_delivery_time,mean_detour_time,"
      "mean_pickup_time,mean_confirmation_time\n";
  for (size_t k = 0; k < r.seeds.size(); ++k) {
    const EpisodeMetrics& m = r.per_seed[k];
    out += std::to_string(r.seeds[k]) + "," + std::to_string(m.served) + "," +
           std::to_string(m.cancelled) + "," + fmt_double(m.total_reward) + "," +
           fmt_opt(m.mean_delivery_time) + "," + fmt_opt(m.mean_detour_time) + "," +
           fmt_opt(m.mean_pickup_time) + "," + fmt_opt(m.mean_confirmation_time) + "\n";
  }
  return out;
}

TrainResult run_training(const Config& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cfg.trainer.method == Method::kGreedy) {
    throw Error(ErrorCode::kConfig, "method: greedy is evaluation-only and cannot be trained");
  }
  const auto wall_start = std::chrono::steady_clock::now();
  const std::string config_text = cfg.to_text();
  const OrderSource source = make_order_source(cfg.sim);
  const fs::path dir = resolve_run_dir(opts, "train", config_text);
  write_text(dir / "config.txt", config_text);

  Trainer trainer(cfg, source);
  trainer.set_step_observer(opts.step_observer);
  trainer.set_pre_step_observer(opts.pre_step_observer);
  const std::string method(method_name(cfg.trainer.method));
  auto meta = [&]() {
    return CheckpointMeta{cfg.sim.seed, static_cast<uint64_t>(trainer.episode()), method};
  };
  json checkpoints = json::object();
  checkpoints["init"] = checkpoint_entry(dir, "init.ckpt", trainer.policy(), trainer.optimizer(), meta());

  std::string train_log =
      "episode,eval_reward_mean,eval_reward_std,served,pickup,confirmation,delivery,detour,"
      "kl,loss,epsilon\n";
  std::string episode_log =
      "episode,epsilon,samples,skipped,loss,kl,critic_loss,rollout_reward,served,cancelled,noise_flips\n";
  BestCheckpointTracker best;
  const int episodes = cfg.trainer.episodes;
  for (int e = 0; e < episodes; ++e) {
    const EpisodeReport rep = trainer.train_episode();
    episode_log += std::to_string(rep.episode) + "," + fmt_double(rep.noise) + "," +
                   std::to_string(rep.samples) + "," + (rep.skipped ? "1" : "0") + "," +
                   fmt_double(rep.loss) + "," + fmt_double(rep.kl) + "," +
                   fmt_double(rep.critic_loss) + "," + fmt_double(rep.rollout.total_reward) + "," +
                   std::to_string(rep.rollout.served) + "," +
                   std::to_string(rep.rollout.cancelled) + "," + std::to_string(rep.noise_flips) +
                   "\n";
    const int done = e + 1;
    if (done % cfg.trainer.eval_every != 0 && done != episodes) continue;

    const EvalReport ev = evaluate_report(cfg, source, &trainer.policy(), cfg.trainer.eval_seeds);
    train_log += std::to_string(done) + "," + fmt_double(ev.total_reward.mean) + "," +
                 fmt_double(ev.total_reward.std) + "," + fmt_summary(ev.served) + "," +
                 fmt_summary(ev.pickup) + "," + fmt_summary(ev.confirmation) + "," +
                 fmt_summary(ev.delivery) + "," + fmt_summary(ev.detour) + "," +
                 fmt_double(rep.kl) + "," + fmt_double(rep.loss) + "," + fmt_double(rep.noise) + "\n";
    const bool improved = best.offer(ev.total_reward.mean, done);
    if (improved) {
      trainer.install_reference();
      checkpoints["best"] = checkpoint_entry(dir, "best.ckpt", trainer.policy(), trainer.optimizer(), meta());
      write_text(dir / "best.txt", "best.ckpt episode=" + std::to_string(done) +
                                       " score=" + fmt_double(ev.total_reward.mean) + "\n");
    }
    if (opts.progress) {
      *opts.progress << "episode " << done << "/" << episodes << " eval_reward "
                     << fmt_double(ev.total_reward.mean) << (improved ? " best" : "") << "\n";
    }
  }
  write_text(dir / "train_log.csv", train_log);
  write_text(dir / "episodes.csv", episode_log);
  if (episodes > 0) {
    checkpoints["final"] = checkpoint_entry(dir, "final.ckpt", trainer.policy(), trainer.optimizer(), meta());
  }

  TrainResult result;
  result.run_dir = dir;
  result.best_score = best.best();
  result.best_episode = best.best_episode();
  result.episodes = episodes;
  json manifest{{"kind", "train"},
                {"method", method},
                {"seed", cfg.sim.seed},
                {"episodes", episodes},
                {"eval_seeds", cfg.trainer.eval_seeds},
                {"config", config_text},
                {"checkpoints", checkpoints},
                {"best_episode", best.best_episode()},
                {"best_score", opt_json(best.best())},
                {"metrics", {"train_log.csv", "episodes.csv"}},
                {"wall_clock_s", elapsed_s(wall_start)},
                {"run_dir", dir.string()}};
  result.manifest_json = manifest.dump();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

CommandResult run_eval(const Config& cfg, const std::string& checkpoint,
                       std::span<const uint64_t> seeds, const RunOptions& opts) {
  cfg.validate();
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "seeds: at least one seed required");
  const OrderSource source = make_order_source(cfg.sim);
  std::optional<Mlp> policy;
  std::string ck_hash = "greedy";
  if (!checkpoint.empty()) {
    ck_hash = git_blob_hash(read_file_bytes(checkpoint));
    policy = load_policy(cfg, checkpoint);
  }
  const EvalReport report =
      evaluate_report(cfg, source, policy ? &*policy : nullptr, seeds);
  const fs::path dir =
      resolve_run_dir(opts, "eval", cfg.to_text() + ck_hash + seeds_text(seeds));
  write_text(dir / "config.txt", cfg.to_text());
  write_text(dir / "eval.csv", eval_report_csv(report));
  json j = json::parse(eval_report_json(report));
  j["policy"] = checkpoint.empty() ? "greedy" : checkpoint;
  j["checkpoint_hash"] = ck_hash;
  j["run_dir"] = dir.string();
  write_text(dir / "report.json", j.dump(2) + "\n");
  return {dir, j.dump()};
}

CommandResult run_simulate(const Config& cfg, const std::string& checkpoint,
                           const RunOptions& opts) {
  cfg.validate();
  const OrderSource source = make_order_source(cfg.sim);
  std::optional<Mlp> policy;
  if (!checkpoint.empty()) policy = load_policy(cfg, checkpoint);

  std::string trace = "step,time_s,pool,assigned,step_reward,onboard,completed_events\n";
  RolloutOptions ro;
  ro.policy = policy ? &*policy : nullptr;
  ro.idle_action = cfg.trainer.idle_action;
  ro.on_step = [&](const World& w, const Assignment& a, const StepOutcome& o) {
    double reward = 0.0;
    for (double r : o.rewards) reward += r;
    size_t onboard = 0;
    for (const auto& v : w.vehicles()) onboard += v.onboard.size();
    const auto dropoffs = std::count_if(o.events.begin(), o.events.end(), [](const StopEvent& e) {
      return e.kind == StopKind::kDropoff;
    });
    trace += std::to_string(w.t() - 1) + "," + fmt_double(w.t() * cfg.sim.step_len_s) + "," +
             std::to_string(w.pool().size() + a.size()) + "," + std::to_string(a.size()) + "," +
             fmt_double(reward) + "," + std::to_string(onboard) + "," + std::to_string(dropoffs) +
             "\n";
  };
  const EpisodeMetrics m = run_episode(cfg.sim, source, cfg.sim.seed, ro);

  const fs::path dir = resolve_run_dir(opts, "simulate", cfg.to_text() + checkpoint);
  write_text(dir / "config.txt", cfg.to_text());
  write_text(dir / "trace.csv", trace);
  json j = metrics_json(m);
  j["policy"] = checkpoint.empty() ? "greedy" : checkpoint;
  j["seed"] = cfg.sim.seed;
  j["run_dir"] = dir.string();
  write_text(dir / "summary.json", j.dump(2) + "\n");
  return {dir, j.dump()};
}

CommandResult run_bench(const Config& cfg, int episodes, const RunOptions& opts) {
  cfg.validate();
  if (episodes < 1) throw Error(ErrorCode::kInvalidArgument, "episodes: must be >= 1");
  const OrderSource source = make_order_source(cfg.sim);
  std::vector<double> per_episode;
  StepTimings timings;
  if (cfg.trainer.method == Method::kGreedy) {
    for (int e = 0; e < episodes; ++e) {
      RolloutOptions ro;
      ro.timings = &timings;
      const auto start = std::chrono::steady_clock::now();
      run_episode(cfg.sim, source, training_world_seed(cfg.sim.seed, e), ro);
      per_episode.push_back(elapsed_s(start));
    }
  } else {
    Trainer trainer(cfg, source);
    for (int e = 0; e < episodes; ++e) {
      const auto start = std::chrono::steady_clock::now();
      trainer.train_episode();
      per_episode.push_back(elapsed_s(start));
    }
    timings = trainer.timings();
  }
  const double parts = timings.scoring_s + timings.matching_s + timings.routing_s + timings.learning_s;
  auto share = [&](double v) { return parts > 0.0 ? 100.0 * v / parts : 0.0; };
  const double total = std::accumulate(per_episode.begin(), per_episode.end(), 0.0);
  json j{{"method", std::string(method_name(cfg.trainer.method))},
         {"episodes", episodes},
         {"n_drivers", cfg.sim.n_drivers},
         {"episode_seconds", per_episode},
         {"mean_episode_s", total / episodes},
         {"total_s", total},
         {"breakdown_s",
          {{"scoring", timings.scoring_s},
           {"matching", timings.matching_s},
           {"routing", timings.routing_s},
           {"learning", timings.learning_s}}},
         {"breakdown_pct",
          {{"scoring", share(timings.scoring_s)},
           {"matching", share(timings.matching_s)},
           {"routing", share(timings.routing_s)},
           {"learning", share(timings.learning_s)}}}};
  const fs::path dir = resolve_run_dir(opts, "bench", cfg.to_text() + std::to_string(episodes));
  write_text(dir / "config.txt", cfg.to_text());
  j["run_dir"] = dir.string();
  write_text(dir / "bench.json", j.dump(2) + "\n");
  return {dir, j.dump()};
}

}  // namespace ridepool

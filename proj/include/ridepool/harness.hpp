#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ridepool/config.hpp"
#include "ridepool/sim.hpp"
#include "ridepool/trainer.hpp"

namespace ridepool {

// Reads `arrival_s,ox,oy,dx,dy` rows. Rows are validated against the city
// extent and episode length and returned stably sorted by arrival. Errors name
// the 1-based line.
std::vector<OrderRecord> load_orders_csv(const std::string& path, const SimConfig& cfg);
std::vector<OrderRecord> parse_orders_csv(std::string_view text, const SimConfig& cfg);

OrderSource make_order_source(const SimConfig& cfg);

// Git blob hash: sha1("blob <size>\0" + bytes), lowercase hex.
std::string git_blob_hash(std::span<const uint8_t> bytes);

// <root>/<kind>-<YYYYmmdd-HHMMSS>-<first 8 hex of sha1(fingerprint)>, created.
std::filesystem::path make_run_dir(const std::filesystem::path& root, std::string_view kind,
                                   std::string_view fingerprint);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population, across seeds
  int count = 0;     // seeds that produced a value
};

struct EvalReport {
  std::vector<uint64_t> seeds;  // ascending
  std::vector<EpisodeMetrics> per_seed;
  MetricSummary total_reward;
  MetricSummary served;
  MetricSummary cancelled;
  MetricSummary delivery;
  MetricSummary detour;
  MetricSummary pickup;
  MetricSummary confirmation;
};

// Aggregates per-seed metrics. Sorted by seed first, so the report does not
// depend on the order the seeds were given in.
EvalReport summarize(std::span<const uint64_t> seeds, std::span<const EpisodeMetrics> metrics);

EvalReport evaluate_report(const Config& cfg, const OrderSource& source, const Mlp* policy,
                           std::span<const uint64_t> seeds);

std::string eval_report_json(const EvalReport& r);
std::string eval_report_csv(const EvalReport& r);

struct RunOptions {
  std::filesystem::path out_root = "runs";
  std::optional<std::filesystem::path> run_dir;  // used as-is when set
  std::ostream* progress = nullptr;
  // Training only: called after every step of every training rollout.
  std::function<void(const World&, const Assignment&, const StepOutcome&)> step_observer;
  std::function<void(const World&, const Assignment&)> pre_step_observer;
};

struct TrainResult {
  std::filesystem::path run_dir;
  std::string manifest_json;
  std::optional<double> best_score;
  int best_episode = -1;
  int episodes = 0;
};

// Full training run: episodes with periodic noise-free evaluation, best
// checkpoint tracking, CSV logs, init/final/best checkpoints and a manifest.
TrainResult run_training(const Config& cfg, const RunOptions& opts);

struct CommandResult {
  std::filesystem::path run_dir;
  std::string json;
};

// `checkpoint` empty evaluates the greedy dispatcher.
CommandResult run_eval(const Config& cfg, const std::string& checkpoint,
                       std::span<const uint64_t> seeds, const RunOptions& opts);

// One episode at the configured seed with a per-step trace.
CommandResult run_simulate(const Config& cfg, const std::string& checkpoint,
                           const RunOptions& opts);

// Times `episodes` training episodes (or greedy rollouts for method=greedy)
// and reports the per-step breakdown.
CommandResult run_bench(const Config& cfg, int episodes, const RunOptions& opts);

}  // namespace ridepool

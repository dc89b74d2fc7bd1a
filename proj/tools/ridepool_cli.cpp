#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ridepool/ridepool.h"

namespace {

struct CliFailure {
  rp_status status;
  std::string message;
};

void check(rp_status s) {
  if (s != RP_OK) throw CliFailure{s, rp_last_error()};
}

int report_failure(rp_status status, const std::string& message) {
  const nlohmann::json line{{"error", rp_status_name(status)},
                            {"code", static_cast<int>(status)},
                            {"message", message}};
  std::cerr << line.dump() << std::endl;
  return static_cast<int>(status);
}

struct ConfigHandle {
  rp_config* ptr = nullptr;
  ~ConfigHandle() { rp_config_free(ptr); }
};

struct ResultHandle {
  rp_result* ptr = nullptr;
  ~ResultHandle() { rp_result_free(ptr); }
};

void load_config(ConfigHandle& h, const std::string& path, const std::vector<std::string>& sets) {
  if (path.empty()) {
    check(rp_config_new(&h.ptr));
  } else {
    check(rp_config_load(path.c_str(), &h.ptr));
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CliFailure{RP_ERR_INVALID_ARGUMENT, "--set expects key=value, got '" + kv + "'"};
    }
    check(rp_config_set(h.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  size_t count = 0;
  check(rp_parse_seeds(text.c_str(), nullptr, 0, &count));
  std::vector<uint64_t> seeds(count);
  check(rp_parse_seeds(text.c_str(), seeds.data(), seeds.size(), &count));
  return seeds;
}

void emit(const ResultHandle& r) { std::cout << rp_result_json(r.ptr) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ride-pooling dispatch trainer and simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rp_version()));

  std::string config_path, checkpoint, orders, seeds_text, policy = "greedy";
  std::string out_root = "runs", run_dir;
  std::vector<std::string> sets;
  bool synthetic = false, verbose = false;
  int episodes = 3;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--set", sets, "Override a config key (key=value), repeatable");
    sub->add_option("--out", out_root, "Parent directory for run directories");
    sub->add_option("--run-dir", run_dir, "Exact output directory");
    sub->add_flag("-v,--verbose", verbose, "Progress on stderr");
  };

  auto* train = app.add_subcommand("train", "Train a dispatch policy");
  train->add_option("--config", config_path, "Config file")->required();
  add_common(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (or greedy) on seeds");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file; omit for greedy");
  eval->add_option("--config", config_path, "Config file");
  auto* orders_opt = eval->add_option("--orders", orders, "Orders CSV to replay");
  auto* synth_opt = eval->add_flag("--synthetic", synthetic, "Use the synthetic order generator");
  orders_opt->excludes(synth_opt);
  eval->add_option("--seeds", seeds_text, "Seeds: a,b,c or lo..hi")->required();
  add_common(eval);

  auto* simulate = app.add_subcommand("simulate", "Run one episode and write a step trace");
  simulate->add_option("--policy", policy, "greedy or checkpoint")
      ->check(CLI::IsMember({"greedy", "checkpoint"}));
  simulate->add_option("--checkpoint", checkpoint, "Checkpoint file for --policy checkpoint");
  simulate->add_option("--config", config_path, "Config file");
  add_common(simulate);

  auto* bench = app.add_subcommand("bench", "Time training episodes");
  bench->add_option("--config", config_path, "Config file")->required();
  bench->add_option("--episodes", episodes, "Episodes to time")->check(CLI::PositiveNumber);
  add_common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_failure(RP_ERR_INVALID_ARGUMENT, e.what());
  }

  try {
    ConfigHandle cfg;
    load_config(cfg, config_path, sets);
    rp_run_options opts{out_root.c_str(), run_dir.empty() ? nullptr : run_dir.c_str(),
                        verbose ? 1 : 0};
    ResultHandle result;

    if (train->parsed()) {
      check(rp_train(cfg.ptr, &opts, &result.ptr));
    } else if (eval->parsed()) {
      if (!orders.empty()) check(rp_config_set(cfg.ptr, "orders_csv", orders.c_str()));
      if (synthetic) check(rp_config_set(cfg.ptr, "orders_csv", ""));
      const auto seeds = parse_seeds(seeds_text);
      check(rp_eval(cfg.ptr, checkpoint.empty() ? nullptr : checkpoint.c_str(), seeds.data(),
                    seeds.size(), &opts, &result.ptr));
    } else if (simulate->parsed()) {
      if (policy == "checkpoint" && checkpoint.empty()) {
        throw CliFailure{RP_ERR_INVALID_ARGUMENT, "--policy checkpoint requires --checkpoint"};
      }
      if (policy == "greedy" && !checkpoint.empty()) {
        throw CliFailure{RP_ERR_INVALID_ARGUMENT, "--checkpoint requires --policy checkpoint"};
      }
      check(rp_simulate(cfg.ptr, policy == "greedy" ? nullptr : checkpoint.c_str(), &opts,
                        &result.ptr));
    } else if (bench->parsed()) {
      check(rp_bench(cfg.ptr, episodes, &opts, &result.ptr));
    }
    emit(result);
    return 0;
  } catch (const CliFailure& f) {
    return report_failure(f.status, f.message);
  }
}

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ridepool/common.hpp"

namespace ridepool {

struct Hotspot {
  Point center;
};

// World parameters. Distances in km, times in seconds unless noted.
struct SimConfig {
  int n_drivers = 1000;
  int capacity = 3;
  double speed_kmh = 60.0;
  double step_len_s = 60.0;
  int horizon = 30;
  double extent_x_km = 10.0;
  double extent_y_km = 10.0;
  double max_wait_s = 300.0;
  // Drivers farther than this from an order's origin may not be matched to
  // it. 0 disables the limit.
  double pickup_radius_km = 0.0;

  double fare_base = 2.0;
  double fare_per_km = 1.0;
  double payout_per_km = 0.6;
  std::array<double, 5> beta = {1.0, 1.0, 1.0, 0.5, 0.1};

  // Order source: replay when orders_csv is set, synthetic otherwise.
  std::string orders_csv;
  double arrival_rate = 10.0;  // expected orders per step
  double hotspot_weight = 0.5;
  double hotspot_sigma_km = 1.0;
  std::vector<Hotspot> hotspots = {{{2.5, 2.5}}, {{7.5, 7.5}}, {{2.5, 7.5}}};

  uint64_t seed = 1;

  int feature_dim() const { return 10 + 5 * capacity; }
  double episode_seconds() const { return horizon * step_len_s; }
};

enum class Method { kGrpo, kOspo, kOspoEpisodeNorm, kIppo, kIpg, kGreedy };

std::string_view method_name(Method m);
Method parse_method(std::string_view s);

struct TrainerConfig {
  Method method = Method::kOspo;
  double gamma = 0.95;
  double alpha = 0.1;
  double clip_low = 0.2;    // epsilon
  double clip_high = 0.28;  // epsilon'
  double kl_weight = 0.01;
  int epochs = 4;
  int batch_size = 256;
  int episodes = 1000;
  int eval_every = 10;
  std::vector<uint64_t> eval_seeds = {1000, 1001, 1002, 1003, 1004,
                                      1005, 1006, 1007, 1008, 1009};
  double learning_rate = 1e-4;
  double lr_decay = 0.99;
  double noise_initial = 0.05;
  double noise_decay = 0.99;
  double noise_floor = 0.0;
  double gae_lambda = 0.95;
  double critic_learning_rate = 1e-3;
  int hidden_width = 128;
  int hidden_layers = 3;
  // Adds a fixed zero logit ("stay idle") to every driver's softmax, so a
  // driver's score for an order is not forced up when it has few candidates.
  bool idle_action = false;
};

struct Config {
  SimConfig sim;
  TrainerConfig trainer;

  // Applies one `key = value` assignment. Unknown keys and malformed values
  // throw Error(kConfig) naming the key.
  void set(std::string_view key, std::string_view value);

  // Throws Error(kConfig) naming the first offending field.
  void validate() const;

  // Canonical text form: every key, fixed order, round-trippable values.
  std::string to_text() const;

  static Config parse(std::string_view text);
  static Config load(const std::string& path);
};

std::vector<uint64_t> parse_seed_list(std::string_view s);

}  // namespace ridepool

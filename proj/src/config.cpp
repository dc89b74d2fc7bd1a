#include "ridepool/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

namespace ridepool {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void config_error(std::string_view key, const std::string& msg) {
  throw Error(ErrorCode::kConfig, std::string(key) + ": " + msg);
}

double to_double(std::string_view key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    config_error(key, "expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  v = trim(v);
  Int out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    config_error(key, "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  config_error(key, "expected true or false, got '" + std::string(v) + "'");
}

std::vector<Hotspot> parse_hotspots(std::string_view key, std::string_view v) {
  std::vector<Hotspot> out;
  v = trim(v);
  if (v.empty() || v == "none") return out;
  while (!v.empty()) {
    const auto semi = v.find(';');
    const auto item = trim(v.substr(0, semi));
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      config_error(key, "expected 'x:y' entries separated by ';'");
    }
    out.push_back({{to_double(key, item.substr(0, colon)),
                    to_double(key, item.substr(colon + 1))}});
    if (semi == std::string_view::npos) break;
    v = v.substr(semi + 1);
  }
  return out;
}

struct Field {
  std::string_view key;
  std::function<void(Config&, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

template <typename T>
Field double_field(std::string_view key, T member_ptr_fn) {
  return {key,
          [key, member_ptr_fn](Config& c, std::string_view v) {
            member_ptr_fn(c) = to_double(key, v);
          },
          [member_ptr_fn](const Config& c) {
            return fmt_double(member_ptr_fn(const_cast<Config&>(c)));
          }};
}

template <typename Int, typename T>
Field int_field(std::string_view key, T member_ptr_fn) {
  return {key,
          [key, member_ptr_fn](Config& c, std::string_view v) {
            member_ptr_fn(c) = to_int<Int>(key, v);
          },
          [member_ptr_fn](const Config& c) {
            return std::to_string(member_ptr_fn(const_cast<Config&>(c)));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field<int>("n_drivers", [](Config& c) -> int& { return c.sim.n_drivers; }));
    f.push_back(int_field<int>("capacity", [](Config& c) -> int& { return c.sim.capacity; }));
    f.push_back(double_field("speed_kmh", [](Config& c) -> double& { return c.sim.speed_kmh; }));
    f.push_back(double_field("step_len_s", [](Config& c) -> double& { return c.sim.step_len_s; }));
    f.push_back(int_field<int>("horizon", [](Config& c) -> int& { return c.sim.horizon; }));
    f.push_back(double_field("extent_x_km", [](Config& c) -> double& { return c.sim.extent_x_km; }));
    f.push_back(double_field("extent_y_km", [](Config& c) -> double& { return c.sim.extent_y_km; }));
    f.push_back(double_field("max_wait_s", [](Config& c) -> double& { return c.sim.max_wait_s; }));
    f.push_back(double_field("pickup_radius_km", [](Config& c) -> double& { return c.sim.pickup_radius_km; }));
    f.push_back(double_field("fare_base", [](Config& c) -> double& { return c.sim.fare_base; }));
    f.push_back(double_field("fare_per_km", [](Config& c) -> double& { return c.sim.fare_per_km; }));
    f.push_back(double_field("payout_per_km", [](Config& c) -> double& { return c.sim.payout_per_km; }));
    f.push_back(double_field("beta1", [](Config& c) -> double& { return c.sim.beta[0]; }));
    f.push_back(double_field("beta2", [](Config& c) -> double& { return c.sim.beta[1]; }));
    f.push_back(double_field("beta3", [](Config& c) -> double& { return c.sim.beta[2]; }));
    f.push_back(double_field("beta4", [](Config& c) -> double& { return c.sim.beta[3]; }));
    f.push_back(double_field("beta5", [](Config& c) -> double& { return c.sim.beta[4]; }));
    f.push_back({"orders_csv",
                 [](Config& c, std::string_view v) { c.sim.orders_csv = std::string(trim(v)); },
                 [](const Config& c) { return c.sim.orders_csv; }});
    f.push_back(double_field("arrival_rate", [](Config& c) -> double& { return c.sim.arrival_rate; }));
    f.push_back(double_field("hotspot_weight", [](Config& c) -> double& { return c.sim.hotspot_weight; }));
    f.push_back(double_field("hotspot_sigma_km", [](Config& c) -> double& { return c.sim.hotspot_sigma_km; }));
    f.push_back({"hotspots",
                 [](Config& c, std::string_view v) { c.sim.hotspots = parse_hotspots("hotspots", v); },
                 [](const Config& c) {
                   if (c.sim.hotspots.empty()) return std::string("none");
                   std::string s;
                   for (size_t i = 0; i < c.sim.hotspots.size(); ++i) {
                     if (i) s += ';';
                     s += fmt_double(c.sim.hotspots[i].center.x) + ":" +
                          fmt_double(c.sim.hotspots[i].center.y);
                   }
                   return s;
                 }});
    f.push_back(int_field<uint64_t>("seed", [](Config& c) -> uint64_t& { return c.sim.seed; }));

    f.push_back({"method",
                 [](Config& c, std::string_view v) { c.trainer.method = parse_method(trim(v)); },
                 [](const Config& c) { return std::string(method_name(c.trainer.method)); }});
    f.push_back(double_field("gamma", [](Config& c) -> double& { return c.trainer.gamma; }));
    f.push_back(double_field("alpha", [](Config& c) -> double& { return c.trainer.alpha; }));
    f.push_back(double_field("clip_low", [](Config& c) -> double& { return c.trainer.clip_low; }));
    f.push_back(double_field("clip_high", [](Config& c) -> double& { return c.trainer.clip_high; }));
    f.push_back(double_field("kl_weight", [](Config& c) -> double& { return c.trainer.kl_weight; }));
    f.push_back(int_field<int>("epochs", [](Config& c) -> int& { return c.trainer.epochs; }));
    f.push_back(int_field<int>("batch_size", [](Config& c) -> int& { return c.trainer.batch_size; }));
    f.push_back(int_field<int>("episodes", [](Config& c) -> int& { return c.trainer.episodes; }));
    f.push_back(int_field<int>("eval_every", [](Config& c) -> int& { return c.trainer.eval_every; }));
    f.push_back({"eval_seeds",
                 [](Config& c, std::string_view v) { c.trainer.eval_seeds = parse_seed_list(v); },
                 [](const Config& c) {
                   std::string s;
                   for (size_t i = 0; i < c.trainer.eval_seeds.size(); ++i) {
                     if (i) s += ',';
                     s += std::to_string(c.trainer.eval_seeds[i]);
                   }
                   return s;
                 }});
    f.push_back(double_field("learning_rate", [](Config& c) -> double& { return c.trainer.learning_rate; }));
    f.push_back(double_field("lr_decay", [](Config& c) -> double& { return c.trainer.lr_decay; }));
    f.push_back(double_field("noise_initial", [](Config& c) -> double& { return c.trainer.noise_initial; }));
    f.push_back(double_field("noise_decay", [](Config& c) -> double& { return c.trainer.noise_decay; }));
    f.push_back(double_field("noise_floor", [](Config& c) -> double& { return c.trainer.noise_floor; }));
    f.push_back(double_field("gae_lambda", [](Config& c) -> double& { return c.trainer.gae_lambda; }));
    f.push_back(double_field("critic_learning_rate", [](Config& c) -> double& { return c.trainer.critic_learning_rate; }));
    f.push_back(int_field<int>("hidden_width", [](Config& c) -> int& { return c.trainer.hidden_width; }));
    f.push_back(int_field<int>("hidden_layers", [](Config& c) -> int& { return c.trainer.hidden_layers; }));
    f.push_back({"idle_action",
                 [](Config& c, std::string_view v) { c.trainer.idle_action = parse_bool("idle_action", v); },
                 [](const Config& c) { return std::string(c.trainer.idle_action ? "true" : "false"); }});
    return f;
  }();
  return table;
}

void require(bool ok, std::string_view key, const std::string& msg) {
  if (!ok) config_error(key, msg);
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kGrpo: return "grpo";
    case Method::kOspo: return "ospo";
    case Method::kOspoEpisodeNorm: return "ospo_episode";
    case Method::kIppo: return "ippo";
    case Method::kIpg: return "ipg";
    case Method::kGreedy: return "greedy";
  }
  return "unknown";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::kGrpo, Method::kOspo, Method::kOspoEpisodeNorm,
                   Method::kIppo, Method::kIpg, Method::kGreedy}) {
    if (s == method_name(m)) return m;
  }
  config_error("method", "unknown method '" + std::string(s) +
                             "' (grpo|ospo|ospo_episode|ippo|ipg|greedy)");
}

std::vector<uint64_t> parse_seed_list(std::string_view s) {
  std::vector<uint64_t> out;
  s = trim(s);
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    const auto range = item.find("..");
    if (range != std::string_view::npos) {
      const auto lo = to_int<uint64_t>("eval_seeds", item.substr(0, range));
      const auto hi = to_int<uint64_t>("eval_seeds", item.substr(range + 2));
      if (hi < lo) config_error("eval_seeds", "descending range");
      for (uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(to_int<uint64_t>("eval_seeds", item));
    }
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

void Config::set(std::string_view key, std::string_view value) {
  key = trim(key);
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  config_error(key, "unknown key");
}

void Config::validate() const {
  const auto& s = sim;
  const auto& t = trainer;
  require(s.n_drivers >= 1, "n_drivers", "must be >= 1");
  require(s.capacity >= 1, "capacity", "must be >= 1");
  require(s.speed_kmh > 0, "speed_kmh", "must be > 0");
  require(s.step_len_s > 0, "step_len_s", "must be > 0");
  require(s.horizon >= 1, "horizon", "must be >= 1");
  require(s.extent_x_km > 0, "extent_x_km", "must be > 0");
  require(s.extent_y_km > 0, "extent_y_km", "must be > 0");
  require(s.max_wait_s >= 0, "max_wait_s", "must be >= 0");
  require(s.pickup_radius_km >= 0, "pickup_radius_km", "must be >= 0");
  require(s.fare_base >= 0, "fare_base", "must be >= 0");
  require(s.fare_per_km >= 0, "fare_per_km", "must be >= 0");
  require(s.payout_per_km >= 0, "payout_per_km", "must be >= 0");
  for (int i = 0; i < 5; ++i) {
    require(s.beta[i] >= 0, "beta" + std::to_string(i + 1), "must be >= 0");
  }
  require(s.arrival_rate >= 0, "arrival_rate", "must be >= 0");
  require(s.hotspot_weight >= 0 && s.hotspot_weight <= 1, "hotspot_weight",
          "must be in [0,1]");
  require(s.hotspot_sigma_km > 0, "hotspot_sigma_km", "must be > 0");
  require(s.hotspot_weight == 0 || !s.hotspots.empty(), "hotspots",
          "hotspot_weight > 0 needs at least one hotspot");
  for (const auto& h : s.hotspots) {
    require(h.center.x >= 0 && h.center.x <= s.extent_x_km && h.center.y >= 0 &&
                h.center.y <= s.extent_y_km,
            "hotspots", "hotspot outside city extent");
  }

  require(t.gamma >= 0 && t.gamma <= 1, "gamma", "must be in [0,1]");
  require(t.alpha >= 0, "alpha", "must be >= 0");
  require(t.clip_low > 0, "clip_low", "must be > 0");
  require(t.clip_low < 1, "clip_low", "must be < 1");
  require(t.clip_high >= t.clip_low, "clip_high", "must be >= clip_low");
  require(t.kl_weight >= 0, "kl_weight", "must be >= 0");
  require(t.epochs >= 1, "epochs", "must be >= 1");
  require(t.batch_size >= 1, "batch_size", "must be >= 1");
  require(t.episodes >= 0, "episodes", "must be >= 0");
  require(t.eval_every >= 1, "eval_every", "must be >= 1");
  require(!t.eval_seeds.empty(), "eval_seeds", "must not be empty");
  require(t.learning_rate > 0, "learning_rate", "must be > 0");
  require(t.lr_decay > 0 && t.lr_decay <= 1, "lr_decay", "must be in (0,1]");
  require(t.noise_initial >= 0 && t.noise_initial <= 1, "noise_initial", "must be in [0,1]");
  require(t.noise_decay > 0 && t.noise_decay <= 1, "noise_decay", "must be in (0,1]");
  require(t.noise_floor >= 0 && t.noise_floor <= 1, "noise_floor", "must be in [0,1]");
  require(t.gae_lambda >= 0 && t.gae_lambda <= 1, "gae_lambda", "must be in [0,1]");
  require(t.critic_learning_rate > 0, "critic_learning_rate", "must be > 0");
  require(t.hidden_width >= 1, "hidden_width", "must be >= 1");
  require(t.hidden_layers >= 1, "hidden_layers", "must be >= 1");
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& f : fields()) {
    out += std::string(f.key) + " = " + f.get(*this) + "\n";
  }
  return out;
}

Config Config::parse(std::string_view text) {
  Config c;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig,
                  "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    c.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace ridepool

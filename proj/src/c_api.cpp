#include "ridepool/ridepool.h"

#include <cstring>
#include <iostream>
#include <new>
#include <string>

#include "ridepool/common.hpp"
#include "ridepool/config.hpp"
#include "ridepool/harness.hpp"
#include "ridepool/matching.hpp"

struct rp_config {
  ridepool::Config cfg;
};

struct rp_result {
  std::string json;
  std::string run_dir;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
rp_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return RP_OK;
  } catch (const ridepool::Error& e) {
    g_last_error = e.what();
    return static_cast<rp_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return RP_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw ridepool::Error(ridepool::ErrorCode::kInvalidArgument, what);
}

ridepool::RunOptions run_options(const rp_run_options* opts) {
  ridepool::RunOptions ro;
  if (!opts) return ro;
  if (opts->out_root && *opts->out_root) ro.out_root = opts->out_root;
  if (opts->run_dir && *opts->run_dir) ro.run_dir = opts->run_dir;
  if (opts->verbose) ro.progress = &std::cerr;
  return ro;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* rp_version(void) { return "0.1.0"; }

const char* rp_status_name(rp_status status) {
  switch (status) {
    case RP_OK: return "ok";
    case RP_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RP_ERR_CONFIG: return "config";
    case RP_ERR_IO: return "io";
    case RP_ERR_FORMAT: return "format";
    case RP_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case RP_ERR_INVARIANT: return "invariant";
    case RP_ERR_NUMERIC: return "numeric";
    case RP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* rp_last_error(void) { return g_last_error.c_str(); }

rp_status rp_config_new(rp_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new rp_config{};
  });
}

rp_status rp_config_load(const char* path, rp_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must be non-null");
    *out = nullptr;
    auto* c = new rp_config{ridepool::Config::load(path)};
    *out = c;
  });
}

rp_status rp_config_set(rp_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "cfg, key and value must be non-null");
    cfg->cfg.set(key, value);
  });
}

rp_status rp_config_validate(const rp_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "cfg is null");
    cfg->cfg.validate();
  });
}

rp_status rp_config_to_text(const rp_config* cfg, char** out) {
  return guarded([&] {
    require(cfg && out, "cfg and out must be non-null");
    *out = dup_string(cfg->cfg.to_text());
  });
}

void rp_config_free(rp_config* cfg) { delete cfg; }

void rp_string_free(char* s) { delete[] s; }

rp_status rp_parse_seeds(const char* text, uint64_t* seeds, size_t capacity, size_t* count) {
  return guarded([&] {
    require(text && count, "text and count must be non-null");
    require(seeds || capacity == 0, "seeds is null");
    const auto parsed = ridepool::parse_seed_list(text);
    *count = parsed.size();
    for (size_t k = 0; k < parsed.size() && k < capacity; ++k) seeds[k] = parsed[k];
  });
}

rp_status rp_train(const rp_config* cfg, const rp_run_options* opts, rp_result** out) {
  return guarded([&] {
    require(cfg && out, "cfg and out must be non-null");
    *out = nullptr;
    const auto r = ridepool::run_training(cfg->cfg, run_options(opts));
    *out = new rp_result{r.manifest_json, r.run_dir.string()};
  });
}

rp_status rp_eval(const rp_config* cfg, const char* checkpoint, const uint64_t* seeds,
                  size_t n_seeds, const rp_run_options* opts, rp_result** out) {
  return guarded([&] {
    require(cfg && out, "cfg and out must be non-null");
    require(seeds || n_seeds == 0, "seeds is null");
    *out = nullptr;
    const auto r = ridepool::run_eval(cfg->cfg, checkpoint ? checkpoint : "",
                                      {seeds, n_seeds}, run_options(opts));
    *out = new rp_result{r.json, r.run_dir.string()};
  });
}

rp_status rp_simulate(const rp_config* cfg, const char* checkpoint, const rp_run_options* opts,
                      rp_result** out) {
  return guarded([&] {
    require(cfg && out, "cfg and out must be non-null");
    *out = nullptr;
    const auto r = ridepool::run_simulate(cfg->cfg, checkpoint ? checkpoint : "", run_options(opts));
    *out = new rp_result{r.json, r.run_dir.string()};
  });
}

rp_status rp_bench(const rp_config* cfg, int episodes, const rp_run_options* opts,
                   rp_result** out) {
  return guarded([&] {
    require(cfg && out, "cfg and out must be non-null");
    *out = nullptr;
    const auto r = ridepool::run_bench(cfg->cfg, episodes, run_options(opts));
    *out = new rp_result{r.json, r.run_dir.string()};
  });
}

const char* rp_result_json(const rp_result* result) { return result ? result->json.c_str() : ""; }

const char* rp_result_run_dir(const rp_result* result) {
  return result ? result->run_dir.c_str() : "";
}

void rp_result_free(rp_result* result) { delete result; }

rp_status rp_solve_assignment(int n, int w, const double* scores, const uint8_t* feasible,
                              int32_t* order_for_driver) {
  return guarded([&] {
    require(n >= 0 && w >= 0, "n and w must be non-negative");
    require((scores && feasible && order_for_driver) || n == 0, "null buffer");
    ridepool::ScoreMatrix m(n, w);
    for (int i = 0; i < n; ++i) {
      order_for_driver[i] = -1;
      for (int j = 0; j < w; ++j) {
        const size_t k = static_cast<size_t>(i) * w + j;
        if (feasible[k]) m.set(i, j, scores[k]);
      }
    }
    for (auto [i, j] : ridepool::solve_assignment(m).pairs) order_for_driver[i] = j;
  });
}

}  // extern "C"

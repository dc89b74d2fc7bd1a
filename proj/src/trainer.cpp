#include "ridepool/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "ridepool/common.hpp"

namespace ridepool {
namespace {

constexpr uint64_t kPolicyInitStream = 0xA11CE;
constexpr uint64_t kCriticInitStream = 0xC217C;
constexpr uint64_t kShuffleStream = 0x5348;
constexpr uint64_t kNoiseStream = 0x4E015E;

class Stopwatch {
 public:
  explicit Stopwatch(double* sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    if (sink_) {
      *sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
  }

 private:
  double* sink_;
  std::chrono::steady_clock::time_point start_;
};

double* slot(StepTimings* t, double StepTimings::*field) { return t ? &(t->*field) : nullptr; }

bool uses_kl(const TrainerConfig& cfg) {
  return cfg.method != Method::kIpg && cfg.kl_weight > 0.0;
}

}  // namespace

std::vector<int> policy_layer_sizes(const Config& cfg) {
  std::vector<int> sizes{cfg.sim.feature_dim()};
  for (int l = 0; l < cfg.trainer.hidden_layers; ++l) sizes.push_back(cfg.trainer.hidden_width);
  sizes.push_back(1);
  return sizes;
}

std::vector<int> critic_layer_sizes(const Config& cfg) {
  return {kCriticInputDim, cfg.trainer.hidden_width, cfg.trainer.hidden_width, 1};
}

void candidate_probs(std::span<const double> scores, bool idle_action, std::vector<double>& out) {
  out.assign(scores.begin(), scores.end());
  if (idle_action) out.push_back(0.0);
  softmax_inplace(out);
}

PolicyScores score_pool(const World& world, const Mlp& policy, bool idle_action) {
  const int n = world.config().n_drivers;
  const auto pool = world.pool();
  const int w = static_cast<int>(pool.size());
  const int dim = world.config().feature_dim();

  PolicyScores out;
  out.probs = ScoreMatrix(n, w);
  out.first_col.assign(static_cast<size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) {
    out.first_col[i] = static_cast<int>(out.candidates.size());
    for (int j = 0; j < w; ++j) {
      if (world.pair_feasible(i, pool[j])) out.candidates.push_back(j);
    }
  }
  out.first_col[n] = static_cast<int>(out.candidates.size());
  const int cols = out.first_col[n];
  if (cols == 0) return out;

  out.features.resize(dim, cols);
  for (int i = 0; i < n; ++i) {
    for (int c = out.first_col[i]; c < out.first_col[i + 1]; ++c) {
      world.encode(i, pool[out.candidates[c]], {out.features.col(c).data(), static_cast<size_t>(dim)});
    }
  }
  const Eigen::RowVectorXd scores = policy.forward_batch(out.features);
  std::vector<double> p;
  for (int i = 0; i < n; ++i) {
    const int lo = out.first_col[i];
    const int hi = out.first_col[i + 1];
    if (lo == hi) continue;
    candidate_probs({scores.data() + lo, static_cast<size_t>(hi - lo)}, idle_action, p);
    for (int c = lo; c < hi; ++c) out.probs.set(i, out.candidates[c], p[c - lo]);
  }
  return out;
}

void encode_critic_input(const World& world, int driver, std::span<double> out) {
  if (out.size() != static_cast<size_t>(kCriticInputDim)) {
    throw Error(ErrorCode::kShapeMismatch, "encode_critic_input: output size mismatch");
  }
  const SimConfig& cfg = world.config();
  const VehicleState& v = world.vehicles()[driver];
  const double scale = std::max(1.0, world.reward_scale());
  out[0] = v.pos.x / cfg.extent_x_km;
  out[1] = v.pos.y / cfg.extent_y_km;
  out[2] = static_cast<double>(v.remaining_capacity()) / cfg.capacity;
  out[3] = v.cum_reward / scale;
  out[4] = world.group_avg_cum_reward() / scale;
  std::fill(out.begin() + 5, out.end(), 0.0);
  const auto pool = world.pool();
  if (pool.empty()) return;
  for (int id : pool) {
    const Order& o = world.orders()[id];
    out[5] += o.origin.x / cfg.extent_x_km;
    out[6] += o.origin.y / cfg.extent_y_km;
    out[7] += o.dest.x / cfg.extent_x_km;
    out[8] += o.dest.y / cfg.extent_y_km;
    out[9] += (world.now() - o.arrival_t) / cfg.episode_seconds();
  }
  for (int k = 5; k < kCriticInputDim; ++k) out[k] /= static_cast<double>(pool.size());
}

EpisodeMetrics run_episode(const SimConfig& cfg, const OrderSource& source,
                           uint64_t world_seed, const RolloutOptions& opts) {
  World world(cfg, source, world_seed);
  std::mt19937_64 noise_rng(opts.noise_seed);
  EpisodeBuffer* buf = opts.buffer;
  const int n = cfg.n_drivers;
  if (buf) {
    *buf = EpisodeBuffer{};
    buf->feature_dim = cfg.feature_dim();
    buf->steps = cfg.horizon;
    buf->agents = n;
    buf->rewards = Eigen::MatrixXd::Zero(cfg.horizon, n);
    buf->spread_delta.assign(static_cast<size_t>(cfg.horizon), 0.0);
  }

  while (!world.done()) {
    world.prepare_step();
    const int t = world.t();
    if (buf && opts.record_critic_inputs) {
      const size_t base = buf->critic_inputs.size();
      buf->critic_inputs.resize(base + static_cast<size_t>(n) * kCriticInputDim);
      for (int i = 0; i < n; ++i) {
        encode_critic_input(world, i, {buf->critic_inputs.data() + base + static_cast<size_t>(i) * kCriticInputDim,
                                       static_cast<size_t>(kCriticInputDim)});
      }
    }

    Assignment assignment;
    PolicyScores scored;
    if (opts.policy) {
      {
        Stopwatch sw(slot(opts.timings, &StepTimings::scoring_s));
        scored = score_pool(world, *opts.policy, opts.idle_action);
      }
      Stopwatch sw(slot(opts.timings, &StepTimings::matching_s));
      if (opts.noise > 0.0) {
        ScoreMatrix noisy = scored.probs;
        const int flips = exploration_noise(noisy, opts.noise, noise_rng);
        if (buf) buf->noise_flips += flips;
        assignment = solve_assignment(noisy);
      } else {
        assignment = solve_assignment(scored.probs);
      }
    } else {
      Stopwatch sw(slot(opts.timings, &StepTimings::matching_s));
      assignment = world.greedy();
    }

    if (opts.before_step) opts.before_step(world, assignment);
    StepOutcome outcome;
    {
      Stopwatch sw(slot(opts.timings, &StepTimings::routing_s));
      outcome = world.step(assignment);
    }
    if (opts.on_step) opts.on_step(world, assignment, outcome);

    if (!buf) continue;
    buf->spread_delta[t] = outcome.spread_after - outcome.spread_before;
    for (int i = 0; i < n; ++i) buf->rewards(t, i) = outcome.rewards[i];
    if (!opts.policy) continue;
    const int dim = buf->feature_dim;
    for (auto [i, j] : assignment.pairs) {
      const int lo = scored.first_col[i];
      const int hi = scored.first_col[i + 1];
      Transition tr;
      tr.agent = i;
      tr.step = t;
      tr.first_col = buf->columns();
      tr.n_candidates = hi - lo;
      for (int c = lo; c < hi; ++c) {
        if (scored.candidates[c] == j) tr.chosen = c - lo;
      }
      tr.old_prob = std::max(scored.probs.score(i, j), kProbFloor);
      tr.reward = outcome.rewards[i];
      const double* src = scored.features.col(lo).data();
      buf->features.insert(buf->features.end(), src, src + static_cast<size_t>(hi - lo) * dim);
      buf->transitions.push_back(tr);
    }
  }
  const EpisodeMetrics m = world.metrics();
  if (buf) buf->metrics = m;
  return m;
}

std::vector<EpisodeMetrics> evaluate(const SimConfig& cfg, const OrderSource& source,
                                     const Mlp* policy, std::span<const uint64_t> seeds,
                                     bool idle_action) {
  std::vector<EpisodeMetrics> out;
  out.reserve(seeds.size());
  RolloutOptions opts;
  opts.policy = policy;
  opts.idle_action = idle_action;
  for (uint64_t s : seeds) out.push_back(run_episode(cfg, source, s, opts));
  return out;
}

uint64_t training_world_seed(uint64_t run_seed, int episode) {
  return mix_seed(run_seed, static_cast<uint64_t>(episode)) | (uint64_t{1} << 63);
}

std::vector<TrainingSample> policy_samples(const EpisodeBuffer& buffer,
                                           const TrainerConfig& cfg,
                                           std::span<const double> critic_values) {
  std::vector<TrainingSample> out;
  const auto& trs = buffer.transitions;
  switch (cfg.method) {
    case Method::kGrpo:
    case Method::kOspo:
    case Method::kOspoEpisodeNorm: {
      EpisodeAdvantages adv;
      if (cfg.method == Method::kGrpo) {
        adv = grpo_advantage(buffer.rewards, buffer.spread_delta, cfg.gamma, cfg.alpha);
      } else if (cfg.method == Method::kOspo) {
        adv = ospo_step_advantage(buffer.rewards, buffer.spread_delta, cfg.alpha);
      } else {
        adv = ospo_episode_advantage(buffer.rewards, buffer.spread_delta, cfg.alpha);
      }
      if (adv.values.size() == 0) return out;
      for (size_t k = 0; k < trs.size(); ++k) {
        if (!trs[k].assigned()) continue;
        out.push_back({static_cast<int>(k), adv.values(trs[k].step, trs[k].agent)});
      }
      break;
    }
    case Method::kIppo: {
      const size_t need = static_cast<size_t>(buffer.steps) * buffer.agents;
      if (critic_values.size() != need) {
        throw Error(ErrorCode::kShapeMismatch, "policy_samples: critic values missing");
      }
      Eigen::MatrixXd adv(buffer.steps, buffer.agents);
      std::vector<double> r(buffer.steps), v(static_cast<size_t>(buffer.steps) + 1, 0.0);
      for (int i = 0; i < buffer.agents; ++i) {
        for (int t = 0; t < buffer.steps; ++t) {
          r[t] = buffer.rewards(t, i);
          v[t] = critic_values[static_cast<size_t>(t) * buffer.agents + i];
        }
        const auto a = gae(r, v, cfg.gamma, cfg.gae_lambda);
        for (int t = 0; t < buffer.steps; ++t) adv(t, i) = a[t];
      }
      for (size_t k = 0; k < trs.size(); ++k) {
        if (!trs[k].assigned()) continue;
        out.push_back({static_cast<int>(k), adv(trs[k].step, trs[k].agent)});
      }
      break;
    }
    case Method::kIpg: {
      Eigen::MatrixXd ret(buffer.steps, buffer.agents);
      std::vector<double> r(buffer.steps);
      for (int i = 0; i < buffer.agents; ++i) {
        for (int t = 0; t < buffer.steps; ++t) r[t] = buffer.rewards(t, i);
        const auto g = discounted_returns(r, cfg.gamma);
        for (int t = 0; t < buffer.steps; ++t) ret(t, i) = g[t];
      }
      for (size_t k = 0; k < trs.size(); ++k) {
        if (!trs[k].assigned()) continue;
        out.push_back({static_cast<int>(k), ret(trs[k].step, trs[k].agent)});
      }
      break;
    }
    case Method::kGreedy:
      throw Error(ErrorCode::kConfig, "method: greedy has no trainable policy");
  }
  return out;
}

LossStats policy_loss(const Mlp& policy, const EpisodeBuffer& buffer,
                      std::span<const TrainingSample> batch, const TrainerConfig& cfg,
                      std::span<const double> ref_scores, MlpGrads* grads) {
  LossStats stats;
  if (batch.empty()) return stats;
  const int dim = buffer.feature_dim;
  int cols = 0;
  for (const auto& s : batch) {
    const Transition& tr = buffer.transitions.at(static_cast<size_t>(s.transition));
    if (!tr.assigned()) {
      throw Error(ErrorCode::kInvariant, "policy_loss: zero-reward transition in batch");
    }
    cols += tr.n_candidates;
  }
  Eigen::MatrixXd x(dim, cols);
  {
    int c = 0;
    for (const auto& s : batch) {
      const Transition& tr = buffer.transitions[s.transition];
      x.middleCols(c, tr.n_candidates) =
          buffer.feature_matrix().middleCols(tr.first_col, tr.n_candidates);
      c += tr.n_candidates;
    }
  }
  const Eigen::RowVectorXd z = policy.forward_batch(x);
  Eigen::RowVectorXd dz = Eigen::RowVectorXd::Zero(cols);
  const bool kl_on = uses_kl(cfg) && !ref_scores.empty();
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  std::vector<double> p, q;
  int c = 0;
  for (const auto& s : batch) {
    const Transition& tr = buffer.transitions[s.transition];
    const int m = tr.n_candidates;
    candidate_probs({z.data() + c, static_cast<size_t>(m)}, cfg.idle_action, p);
    const double pc = p[tr.chosen];
    double loss = 0.0;
    if (cfg.method == Method::kIpg) {
      loss = -std::log(std::max(pc, kProbFloor)) * s.advantage;
      for (int k = 0; k < m; ++k) {
        dz(c + k) += -s.advantage * ((k == tr.chosen ? 1.0 : 0.0) - p[k]) * inv_b;
      }
    } else {
      const double ratio = pc / tr.old_prob;
      if (!std::isfinite(ratio)) {
        throw Error(ErrorCode::kNumeric, "policy_loss: non-finite probability ratio");
      }
      const SurrogateTerm term = clipped_surrogate(ratio, s.advantage, cfg.clip_low, cfg.clip_high);
      loss = term.loss;
      for (int k = 0; k < m; ++k) {
        dz(c + k) += term.d_loss_d_ratio * ratio * ((k == tr.chosen ? 1.0 : 0.0) - p[k]) * inv_b;
      }
    }
    if (kl_on) {
      candidate_probs(ref_scores.subspan(tr.first_col, m), cfg.idle_action, q);
      const double kl = categorical_kl(p, q);
      stats.kl += kl;
      loss += cfg.kl_weight * kl;
      for (int k = 0; k < m; ++k) {
        if (p[k] <= 0.0) continue;
        const double g = p[k] * (std::log(p[k]) - std::log(std::max(q[k], kProbFloor)) - kl);
        dz(c + k) += cfg.kl_weight * g * inv_b;
      }
    }
    stats.loss += loss;
    c += m;
  }
  stats.loss *= inv_b;
  stats.kl *= inv_b;
  stats.samples = static_cast<int>(batch.size());
  if (grads) policy.backward_batch(x, dz, *grads);
  return stats;
}

Trainer::Trainer(const Config& cfg, OrderSource source)
    : cfg_(cfg), source_(std::move(source)) {
  cfg_.validate();
  if (cfg_.trainer.method == Method::kGreedy) {
    throw Error(ErrorCode::kConfig, "method: greedy is evaluation-only and cannot be trained");
  }
  policy_ = Mlp::he_uniform(policy_layer_sizes(cfg_), mix_seed(cfg_.sim.seed, kPolicyInitStream));
  reference_ = policy_;
  AdamConfig ac;
  ac.learning_rate = cfg_.trainer.learning_rate;
  ac.decay = cfg_.trainer.lr_decay;
  adam_ = Adam(policy_, ac);
  if (cfg_.trainer.method == Method::kIppo) {
    critic_ = Mlp::he_uniform(critic_layer_sizes(cfg_), mix_seed(cfg_.sim.seed, kCriticInitStream));
    AdamConfig cc = ac;
    cc.learning_rate = cfg_.trainer.critic_learning_rate;
    critic_adam_ = Adam(critic_, cc);
  }
}

double Trainer::update_critic(const EpisodeBuffer& buffer, std::vector<double>& values) {
  const TrainerConfig& tc = cfg_.trainer;
  const int steps = buffer.steps;
  const int agents = buffer.agents;
  const Eigen::Index total = static_cast<Eigen::Index>(steps) * agents;
  const Eigen::Map<const Eigen::MatrixXd> inputs(buffer.critic_inputs.data(), kCriticInputDim, total);

  const Eigen::RowVectorXd v = critic_.forward_batch(inputs);
  values.assign(v.data(), v.data() + v.size());

  std::vector<double> targets(static_cast<size_t>(total));
  std::vector<double> r(steps);
  for (int i = 0; i < agents; ++i) {
    for (int t = 0; t < steps; ++t) r[t] = buffer.rewards(t, i);
    const auto g = discounted_returns(r, tc.gamma);
    for (int t = 0; t < steps; ++t) targets[static_cast<size_t>(t) * agents + i] = g[t];
  }

  std::vector<int> idx(static_cast<size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(cfg_.sim.seed ^ kShuffleStream ^ kCriticInitStream, episode_));
  MlpGrads grads = MlpGrads::zeros_like(critic_);
  double loss_sum = 0.0;
  int batches = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t lo = 0; lo < idx.size(); lo += static_cast<size_t>(tc.batch_size)) {
      const size_t hi = std::min(idx.size(), lo + static_cast<size_t>(tc.batch_size));
      const Eigen::Index b = static_cast<Eigen::Index>(hi - lo);
      Eigen::MatrixXd x(kCriticInputDim, b);
      Eigen::RowVectorXd y(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        x.col(k) = inputs.col(idx[lo + k]);
        y(k) = targets[idx[lo + k]];
      }
      const Eigen::RowVectorXd err = critic_.forward_batch(x) - y;
      loss_sum += 0.5 * err.squaredNorm() / static_cast<double>(b);
      ++batches;
      grads.set_zero();
      critic_.backward_batch(x, err / static_cast<double>(b), grads);
      critic_adam_.step(critic_, grads);
    }
  }
  critic_adam_.decay_learning_rate();
  if (!critic_.all_finite()) throw Error(ErrorCode::kNumeric, "critic parameters became non-finite");
  return batches ? loss_sum / batches : 0.0;
}

EpisodeReport Trainer::train_episode() {
  const TrainerConfig& tc = cfg_.trainer;
  EpisodeReport report;
  report.episode = episode_;
  report.noise = noise_level(tc.noise_initial, tc.noise_decay, tc.noise_floor, episode_);

  EpisodeBuffer buffer;
  RolloutOptions opts;
  opts.policy = &policy_;
  opts.noise = report.noise;
  opts.noise_seed = mix_seed(cfg_.sim.seed ^ kNoiseStream, static_cast<uint64_t>(episode_));
  opts.buffer = &buffer;
  opts.idle_action = tc.idle_action;
  opts.record_critic_inputs = tc.method == Method::kIppo;
  opts.timings = &timings_;
  opts.on_step = observer_;
  opts.before_step = pre_observer_;
  report.rollout = run_episode(cfg_.sim, source_, training_world_seed(cfg_.sim.seed, episode_), opts);
  report.noise_flips = buffer.noise_flips;

  Stopwatch learn(&timings_.learning_s);
  std::vector<double> values;
  if (tc.method == Method::kIppo) report.critic_loss = update_critic(buffer, values);

  std::vector<TrainingSample> samples = policy_samples(buffer, tc, values);
  report.samples = static_cast<int>(samples.size());
  if (samples.empty()) {
    report.skipped = true;
  } else {
    std::vector<double> ref_scores;
    if (uses_kl(tc) && buffer.columns() > 0) {
      const Eigen::RowVectorXd rs = reference_.forward_batch(buffer.feature_matrix());
      ref_scores.assign(rs.data(), rs.data() + rs.size());
    }
    std::mt19937_64 rng(mix_seed(cfg_.sim.seed ^ kShuffleStream, static_cast<uint64_t>(episode_)));
    MlpGrads grads = MlpGrads::zeros_like(policy_);
    double loss_sum = 0.0, kl_sum = 0.0;
    int batches = 0;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
      std::shuffle(samples.begin(), samples.end(), rng);
      for (size_t lo = 0; lo < samples.size(); lo += static_cast<size_t>(tc.batch_size)) {
        const size_t hi = std::min(samples.size(), lo + static_cast<size_t>(tc.batch_size));
        grads.set_zero();
        const LossStats st = policy_loss(policy_, buffer,
                                         std::span(samples).subspan(lo, hi - lo), tc,
                                         ref_scores, &grads);
        adam_.step(policy_, grads);
        loss_sum += st.loss;
        kl_sum += st.kl;
        ++batches;
      }
    }
    report.loss = loss_sum / batches;
    report.kl = kl_sum / batches;
    if (!policy_.all_finite()) {
      throw Error(ErrorCode::kNumeric, "policy parameters became non-finite");
    }
  }
  adam_.decay_learning_rate();
  ++episode_;
  return report;
}

}  // namespace ridepool

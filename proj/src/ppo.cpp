#include "hevems/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "hevems/errors.hpp"

namespace hevems {

void Hyperparams::validate() const {
  if (gamma < 0.0 || gamma > 1.0)
    throw ConfigError("hyper: gamma must be in [0, 1]");
  if (gae_lambda < 0.0 || gae_lambda > 1.0)
    throw ConfigError("hyper: gae_lambda must be in [0, 1]");
  if (clip_eps <= 0.0) throw ConfigError("hyper: clip_eps must be positive");
  if (lr < 0.0) throw ConfigError("hyper: lr must be non-negative");
  if (horizon_k < 1 || minibatch_z < 1 || n_actors_m < 1 || n_epochs < 1)
    throw ConfigError("hyper: counts must be at least 1");
  if (n_iterations < 0) throw ConfigError("hyper: n_iterations must be >= 0");
  if (static_cast<long long>(minibatch_z) >
      static_cast<long long>(n_actors_m) * horizon_k)
    throw ConfigError("hyper: minibatch size exceeds the rollout batch");
  if (grad_clip <= 0.0) throw ConfigError("hyper: grad_clip must be positive");
  if (reward_scale <= 0.0)
    throw ConfigError("hyper: reward_scale must be positive");
  if (lr_end != -1.0 && lr_end < 0.0)
    throw ConfigError("hyper: lr_end must be non-negative (or -1)");
  if (c2_end != -1.0 && c2_end < 0.0)
    throw ConfigError("hyper: c2_end must be non-negative (or -1)");
  if (episode_budget < 0) throw ConfigError("hyper: episode_budget must be >= 0");
}

// Covers the learning hyperparameters only: n_iterations and episode_budget
// are run budgets and may legitimately differ between expert and student.
std::uint64_t hyper_hash(const Hyperparams& h) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "gamma=%.17g lr=%.17g K=%d Z=%d eps=%.17g lambda=%.17g "
                "c1=%.17g c2=%.17g M=%d epochs=%d clip=%.17g rscale=%.17g "
                "lr_end=%.17g c2_end=%.17g best=%d",
                h.gamma, h.lr, h.horizon_k, h.minibatch_z, h.clip_eps,
                h.gae_lambda, h.c1, h.c2, h.n_actors_m, h.n_epochs,
                h.grad_clip, h.reward_scale, h.lr_end, h.c2_end,
                h.select_best ? 1 : 0);
  return fnv1a(buf);
}

void write_training_log_csv(const TrainingLog& log,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << "iteration,episode,total_reward,loss,clip_loss,value_loss,entropy,"
         "wall_ms\n";
  char buf[256];
  for (const auto& ep : log.episodes) {
    IterationStats stats;
    for (const auto& it : log.iterations)
      if (it.iteration == ep.iteration) {
        stats = it;
        break;
      }
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  ep.iteration, ep.episode, ep.total_reward, stats.loss,
                  stats.clip_loss, stats.value_loss, stats.entropy,
                  log.timing ? stats.wall_ms : 0.0);
    out << buf;
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

RolloutCollector::RolloutCollector(const PowertrainParams& params,
                                   std::vector<DrivingCycle> source_cycles,
                                   int n_actors, double soc0,
                                   std::uint64_t seed)
    : source_(std::move(source_cycles)), soc0_(soc0) {
  if (source_.empty())
    throw ConfigError("rollout collector: source cycle set is empty");
  actors_.reserve(n_actors);
  for (int i = 0; i < n_actors; ++i) {
    const std::size_t first = i % source_.size();
    Actor actor{Env(params, source_[first]),
                Rng(derive_seed(seed, "actor", static_cast<std::uint64_t>(i))),
                (first + 1) % source_.size()};
    actor.env.reset(soc0_);
    actors_.push_back(std::move(actor));
  }
}

RolloutBuffer RolloutCollector::collect(const PolicyParams& policy,
                                        int horizon, TrainingLog* log,
                                        int iteration, double reward_scale) {
  if (horizon < 1) throw ConfigError("collect: horizon must be at least 1");
  RolloutBuffer buffer;
  buffer.n_actors = static_cast<int>(actors_.size());
  buffer.horizon = horizon;
  const std::size_t n = static_cast<std::size_t>(buffer.n_actors) * horizon;
  buffer.obs.reserve(n);
  buffer.action.reserve(n);
  buffer.reward.reserve(n);
  buffer.value.reserve(n);
  buffer.log_prob.reserve(n);
  buffer.done.reserve(n);

  for (auto& actor : actors_) {
    for (int k = 0; k < horizon; ++k) {
      const Observation raw = actor.env.observation();
      const PolicyOutput out = forward(policy, normalize_observation(raw));
      const ActionSample sample = sample_action(out, actor.rng);
      const StepResult sr = actor.env.step(sample.t_ice);

      buffer.obs.push_back(raw);
      buffer.action.push_back(sample.t_ice);
      buffer.reward.push_back(sr.reward * reward_scale);
      buffer.value.push_back(out.value);
      buffer.log_prob.push_back(sample.log_prob);
      buffer.done.push_back(sr.done ? 1 : 0);
      actor.episode_reward += sr.reward;

      if (sr.done) {
        ++episodes_completed_;
        if (log)
          log->episodes.push_back(
              EpisodeRecord{iteration, episodes_completed_,
                            actor.episode_reward});
        actor.episode_reward = 0.0;
        actor.env.reset(source_[actor.next_cycle], soc0_);
        actor.next_cycle = (actor.next_cycle + 1) % source_.size();
      }
    }
    // Bootstrap with the collecting policy's critic; ignored past a terminal.
    const Observation raw = actor.env.observation();
    buffer.bootstrap_value.push_back(
        forward(policy, normalize_observation(raw)).value);
  }
  return buffer;
}

void compute_gae(RolloutBuffer& buffer, double gamma, double gae_lambda) {
  const std::size_t n = buffer.size();
  buffer.advantage_raw.assign(n, 0.0);
  buffer.v_target.assign(n, 0.0);
  for (int a = 0; a < buffer.n_actors; ++a) {
    double carry = 0.0;
    for (int t = buffer.horizon - 1; t >= 0; --t) {
      const std::size_t i = buffer.index(a, t);
      const bool terminal = buffer.done[i] != 0;
      const double next_value =
          terminal ? 0.0
                   : (t == buffer.horizon - 1 ? buffer.bootstrap_value[a]
                                              : buffer.value[i + 1]);
      const double delta =
          buffer.reward[i] + gamma * next_value - buffer.value[i];
      carry = delta + (terminal ? 0.0 : gamma * gae_lambda * carry);
      buffer.advantage_raw[i] = carry;
      buffer.v_target[i] = carry + buffer.value[i];
    }
  }
}

void normalize_advantages(RolloutBuffer& buffer) {
  const std::size_t n = buffer.size();
  buffer.advantage.assign(n, 0.0);
  if (n == 0) return;
  double mean = 0.0;
  for (double a : buffer.advantage_raw) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : buffer.advantage_raw) var += (a - mean) * (a - mean);
  const double stddev =
      std::max(std::sqrt(var / static_cast<double>(n)), 1e-8);
  for (std::size_t i = 0; i < n; ++i)
    buffer.advantage[i] = (buffer.advantage_raw[i] - mean) / stddev;
}

TrainResult train(const Hyperparams& hyper, const PowertrainParams& params,
                  const std::vector<DrivingCycle>& source_cycles,
                  const PolicyParams& init, std::uint64_t seed, bool timing) {
  hyper.validate();
  params.validate();
  if (source_cycles.empty())
    throw ConfigError("train: source cycle set is empty");

  TrainResult result;
  result.params = init;
  result.log.timing = timing;

  RolloutCollector collector(params, source_cycles, hyper.n_actors_m,
                             params.soc_ref, derive_seed(seed, "collector"));
  AdamOptimizer optimizer(init.flat.size(), hyper.lr);
  Rng shuffle_rng(derive_seed(seed, "shuffle"));

  std::vector<double> grad;
  PolicyParams last_good = result.params;
  PolicyParams best_params = result.params;
  double best_eval = -std::numeric_limits<double>::infinity();

  const double lr_end = hyper.lr_end == -1.0 ? hyper.lr : hyper.lr_end;
  const double c2_end = hyper.c2_end == -1.0 ? hyper.c2 : hyper.c2_end;

  for (int iteration = 1; iteration <= hyper.n_iterations; ++iteration) {
    const auto t0 = std::chrono::steady_clock::now();
    last_good = result.params;
    const double frac = hyper.n_iterations > 1
                            ? static_cast<double>(iteration - 1) /
                                  (hyper.n_iterations - 1)
                            : 0.0;
    optimizer.set_lr(hyper.lr + (lr_end - hyper.lr) * frac);
    const double c2_now = hyper.c2 + (c2_end - hyper.c2) * frac;

    RolloutBuffer buffer =
        collector.collect(result.params, hyper.horizon_k, &result.log,
                          iteration, hyper.reward_scale);
    compute_gae(buffer, hyper.gamma, hyper.gae_lambda);
    normalize_advantages(buffer);

    // Normalized observations are shared by every epoch.
    std::vector<Observation> obs_norm(buffer.size());
    for (std::size_t i = 0; i < buffer.size(); ++i)
      obs_norm[i] = normalize_observation(buffer.obs[i]);

    std::vector<std::size_t> order(buffer.size());
    std::iota(order.begin(), order.end(), 0);

    IterationStats stats;
    stats.iteration = iteration;
    int n_updates = 0;
    bool aborted = false;

    for (int epoch = 0; epoch < hyper.n_epochs && !aborted; ++epoch) {
      shuffle_rng.shuffle(order);
      for (std::size_t start = 0;
           start + hyper.minibatch_z <= order.size() && !aborted;
           start += hyper.minibatch_z) {
        std::vector<PpoSample> batch(hyper.minibatch_z);
        for (int k = 0; k < hyper.minibatch_z; ++k) {
          const std::size_t i = order[start + k];
          batch[k] = PpoSample{obs_norm[i], buffer.action[i],
                               buffer.advantage[i], buffer.log_prob[i],
                               buffer.v_target[i]};
        }
        PpoLossTerms terms;
        try {
          terms = ppo_loss(result.params, batch, hyper.clip_eps, hyper.c1,
                           c2_now, &grad);
        } catch (const TrainingError&) {
          aborted = true;
          break;
        }
        stats.grad_norm += clip_gradient_norm(grad, hyper.grad_clip);
        optimizer.ascend(result.params.flat, grad);
        stats.loss += -terms.objective;
        stats.clip_loss += terms.clip_term;
        stats.value_loss += terms.value_term;
        stats.entropy += terms.entropy_term;
        ++n_updates;
      }
    }

    if (!aborted)
      for (double x : result.params.flat)
        if (!std::isfinite(x)) {
          aborted = true;
          break;
        }
    if (aborted) {
      result.params = last_good;
      result.log.aborted = true;
      return result;
    }

    if (n_updates > 0) {
      stats.loss /= n_updates;
      stats.clip_loss /= n_updates;
      stats.value_loss /= n_updates;
      stats.entropy /= n_updates;
      stats.grad_norm /= n_updates;
    }
    if (hyper.select_best) {
      double eval_sum = 0.0;
      for (const auto& cycle : source_cycles) {
        Env env(params, cycle);
        eval_sum += rollout(env, mean_policy(result.params), params.soc_ref,
                            1.0, 0)
                        .total_reward;
      }
      if (eval_sum > best_eval) {
        best_eval = eval_sum;
        best_params = result.params;
        result.log.best_iteration = iteration;
        result.log.best_eval_reward = eval_sum;
      }
    }

    if (timing)
      stats.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    result.log.iterations.push_back(stats);

    if (hyper.episode_budget > 0 &&
        collector.episodes_completed() >= hyper.episode_budget)
      break;
  }
  if (hyper.select_best && result.log.best_iteration > 0)
    result.params = best_params;
  return result;
}

Policy mean_policy(const PolicyParams& params) {
  return [params](const Observation& obs, Rng&) {
    return squash_action(forward(params, normalize_observation(obs)).mean);
  };
}

Policy sampling_policy(const PolicyParams& params) {
  return [params](const Observation& obs, Rng& rng) {
    return sample_action(forward(params, normalize_observation(obs)), rng)
        .t_ice;
  };
}

}  // namespace hevems

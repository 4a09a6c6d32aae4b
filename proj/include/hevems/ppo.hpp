#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hevems/cycles.hpp"
#include "hevems/env.hpp"
#include "hevems/net.hpp"
#include "hevems/powertrain.hpp"

namespace hevems {

struct Hyperparams {
  double gamma = 0.9;
  double lr = 0.01;
  int horizon_k = 512;    // steps per actor per iteration
  int minibatch_z = 64;
  double clip_eps = 0.2;
  double gae_lambda = 0.92;
  double c1 = 0.5;   // value-error coefficient
  double c2 = 0.01;  // entropy coefficient
  // Linear schedules across the iteration budget; -1 keeps the start value.
  // Tapering the step size and the entropy bonus lets the late policy
  // sharpen instead of hedging against its own exploration noise.
  double lr_end = -1.0;
  double c2_end = -1.0;
  int n_actors_m = 4;
  int n_epochs = 10;
  int n_iterations = 50;
  double grad_clip = 0.5;
  // Internal reward scaling for value learning: advantages are normalized so
  // the policy is invariant to it, but the critic regression and the global
  // gradient clip see rewards at this scale. Episode rewards are logged
  // unscaled.
  double reward_scale = 1.0;
  // Stop once this many episodes completed (after finishing the iteration);
  // 0 disables the budget.
  int episode_budget = 0;
  // Return the parameters whose deterministic mean-action evaluation over
  // the source cycles was best, instead of the last iterate. Stochastic
  // policy-gradient iterates drift; selection keeps the best visited policy.
  bool select_best = false;

  void validate() const;
};

// Stable hash of every field; stored in checkpoints so warm starts can
// enforce the same-hyperparameters contract.
std::uint64_t hyper_hash(const Hyperparams& h);

// M*K transitions stored actor-major; each actor's segment is contiguous so
// advantage recursions never cross actors.
struct RolloutBuffer {
  int n_actors = 0;
  int horizon = 0;
  std::vector<Observation> obs;  // raw s_t
  std::vector<double> action;
  std::vector<double> reward;
  std::vector<double> value;     // V(s_t) under the collecting policy
  std::vector<double> log_prob;  // log pi_old(a_t | s_t)
  std::vector<std::uint8_t> done;
  std::vector<double> bootstrap_value;  // per actor, V(s_K); unused if done

  std::vector<double> advantage_raw;  // GAE before normalization
  std::vector<double> advantage;      // batch-normalized
  std::vector<double> v_target;       // advantage_raw + value

  std::size_t size() const { return action.size(); }
  std::size_t index(int actor, int t) const {
    return static_cast<std::size_t>(actor) * horizon + t;
  }
};

struct EpisodeRecord {
  int iteration = 0;
  int episode = 0;  // 1-based global counter
  double total_reward = 0.0;
};

struct IterationStats {
  int iteration = 0;
  double loss = 0.0;        // descent loss, -(objective)
  double clip_loss = 0.0;   // mean clipped surrogate
  double value_loss = 0.0;  // mean squared value error
  double entropy = 0.0;
  double grad_norm = 0.0;   // mean pre-clip gradient norm
  double wall_ms = 0.0;     // 0 unless timing was enabled
};

struct TrainingLog {
  std::vector<EpisodeRecord> episodes;
  std::vector<IterationStats> iterations;
  bool timing = false;
  bool aborted = false;  // non-finite parameters; result holds last good state
  int best_iteration = 0;     // select_best: which iterate was returned
  double best_eval_reward = 0.0;
};

// Columns: iteration,episode,total_reward,loss,clip_loss,value_loss,entropy,
// wall_ms. One row per completed episode; loss columns carry the stats of
// that episode's iteration.
void write_training_log_csv(const TrainingLog& log,
                            const std::filesystem::path& path);

// Owns the M actor environments and their random streams; episodes that end
// mid-collection reset on the next source cycle round-robin.
class RolloutCollector {
 public:
  RolloutCollector(const PowertrainParams& params,
                   std::vector<DrivingCycle> source_cycles, int n_actors,
                   double soc0, std::uint64_t seed);

  RolloutBuffer collect(const PolicyParams& policy, int horizon,
                        TrainingLog* log, int iteration,
                        double reward_scale = 1.0);

  int episodes_completed() const { return episodes_completed_; }

 private:
  struct Actor {
    Env env;
    Rng rng;
    std::size_t next_cycle;
    double episode_reward = 0.0;
  };
  std::vector<DrivingCycle> source_;
  std::vector<Actor> actors_;
  double soc0_;
  int episodes_completed_ = 0;
};

// Fills advantage_raw and v_target (truncated GAE per actor segment, zero
// bootstrap past terminals).
void compute_gae(RolloutBuffer& buffer, double gamma, double gae_lambda);

// Batch-normalizes advantage_raw into advantage (mean 0, std 1, std floor
// 1e-8).
void normalize_advantages(RolloutBuffer& buffer);

struct TrainResult {
  PolicyParams params;
  TrainingLog log;
};

// Full PPO loop: collect -> GAE -> shuffled minibatch epochs -> swap old
// policy. Deterministic per seed. On non-finite parameters returns the last
// intact iteration's parameters with log.aborted set.
TrainResult train(const Hyperparams& hyper, const PowertrainParams& params,
                  const std::vector<DrivingCycle>& source_cycles,
                  const PolicyParams& init, std::uint64_t seed,
                  bool timing = false);

// Deterministic-mean-action policy for evaluation rollouts.
Policy mean_policy(const PolicyParams& params);

// Stochastic policy drawing from the squashed Gaussian (for baselines).
Policy sampling_policy(const PolicyParams& params);

}  // namespace hevems

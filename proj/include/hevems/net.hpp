#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hevems/env.hpp"
#include "hevems/rng.hpp"

namespace hevems {

// Action squash: pre-squash Gaussian -> tanh -> affine map onto the torque
// band [0, 115] Nm.
inline constexpr double kActionLow = 0.0;
inline constexpr double kActionHigh = 115.0;
inline constexpr double kActionHalfRange = 0.5 * (kActionHigh - kActionLow);
inline constexpr double kActionMid = 0.5 * (kActionHigh + kActionLow);
// Pre-image clip for the inverse squash, keeps atanh well defined.
inline constexpr double kSquashClip = 1.0 - 1e-6;

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// The policy-mean head is soft-bounded to +-kMeanBound pre-squash units
// (B*tanh(raw/B)). An unbounded mean can run far past the inverse-squash
// clip, where every sampled action is priced at vanishing density and the
// policy gradient dies; the soft bound keeps recovery gradients alive while
// leaving the usable action range intact (tanh(6) covers all but 3e-4 Nm of
// the band).
inline constexpr double kMeanBound = 6.0;

// Shared-trunk actor-critic: tanh MLP trunk, linear policy-mean and value
// heads, one state-independent log-std parameter.
struct NetLayout {
  std::vector<int> sizes = {3, 64, 64};  // input + hidden widths
  std::string activation = "tanh";

  std::size_t param_count() const;
  bool operator==(const NetLayout&) const = default;
};

// Flat parameter vector ordered trunk (W1,b1,W2,b2,...), policy head,
// value head, log_std. The unit of transfer between tasks.
struct PolicyParams {
  static constexpr int kFormatVersion = 1;
  NetLayout layout;
  std::vector<double> flat;
};

struct PolicyOutput {
  double mean = 0.0;     // pre-squash action mean
  double log_std = 0.0;  // clamped to [kLogStdMin, kLogStdMax]
  double value = 0.0;    // state-value estimate
};

// Normalization applied before the network: fixed affine map so transferred
// parameters see identical input scaling on every cycle.
Observation normalize_observation(const Observation& raw);

// Deterministic scaled-orthogonal init; head weights scaled by 0.01 so the
// initial policy is near-uniform over the torque band.
PolicyParams init_params(const NetLayout& layout, std::uint64_t seed);

PolicyOutput forward(const PolicyParams& params, const Observation& obs_norm);

double squash_action(double pre_squash);

struct ActionSample {
  double t_ice = 0.0;
  double log_prob = 0.0;
};

// Draws from the squashed Gaussian. The returned log_prob is priced on the
// returned action via the same inverse-squash path used everywhere else, so
// stored and recomputed log-probabilities agree bit-for-bit.
ActionSample sample_action(const PolicyOutput& out, Rng& rng);

// Log-density of the squashed Gaussian at an action (includes the squash
// Jacobian correction; pre-image clipped to +-kSquashClip).
double squashed_log_prob(const PolicyOutput& out, double t_ice);

// Entropy of the pre-squash Gaussian, 0.5*ln(2*pi*e*sigma^2).
double policy_entropy(const PolicyOutput& out);

struct LogProbEntropy {
  double log_prob = 0.0;
  double entropy = 0.0;
};

LogProbEntropy log_prob_and_entropy(const PolicyParams& params,
                                    const Observation& obs_norm, double t_ice);

// One transition prepared for a surrogate-loss minibatch.
struct PpoSample {
  Observation obs_norm;
  double action = 0.0;
  double advantage = 0.0;
  double old_log_prob = 0.0;
  double v_target = 0.0;
};

struct PpoLossTerms {
  double objective = 0.0;     // clip_term - c1*value_term + c2*entropy_term
  double clip_term = 0.0;     // mean clipped surrogate
  double value_term = 0.0;    // mean squared value error
  double entropy_term = 0.0;  // mean entropy
  int ratio_clamp_events = 0; // exp overflow guards triggered
};

// Evaluates the maximized PPO objective on a minibatch; when grad is
// non-null also accumulates its exact gradient (hand-derived backprop, no
// autodiff). Ascend on this gradient or descend on its negation.
PpoLossTerms ppo_loss(const PolicyParams& params,
                      std::span<const PpoSample> batch, double clip_eps,
                      double c1, double c2, std::vector<double>* grad);

// Probability ratio with overflow clamp at exp(20).
double ppo_ratio(double log_prob_new, double log_prob_old,
                 int* clamp_events = nullptr);

// min(r*A, clip(r, 1-eps, 1+eps)*A)
double clipped_objective(double ratio, double advantage, double clip_eps);

// L2-norm clip in place; returns the pre-clip norm.
double clip_gradient_norm(std::span<double> grad, double max_norm);

// Adam ascent on the maximized objective. Moments belong to one training
// run and never transfer with the parameters.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t dim, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void set_lr(double lr) { lr_ = lr; }
  void ascend(std::vector<double>& params, std::span<const double> grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t step_ = 0;
  std::vector<double> m_, v_;
};

struct CheckpointMeta {
  std::vector<std::string> source_cycles;
  std::int64_t episodes = 0;
  std::int64_t iterations = 0;
  std::uint64_t seed = 0;
  std::uint64_t hyper_hash = 0;
};

struct Checkpoint {
  PolicyParams params;
  CheckpointMeta meta;
};

// Versioned JSON checkpoint; numeric round trip is bit exact.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Throws TransferIncompatibilityError when the stored layout differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const NetLayout& expected);

}  // namespace hevems

#include "hevems/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hevems/errors.hpp"

namespace hevems {

namespace {

constexpr double kLn2Pi = 1.8378770664093454836;  // ln(2*pi)

struct Offsets {
  struct Layer {
    std::size_t w, b;
    int in, out;
  };
  std::vector<Layer> trunk;
  std::size_t policy_w, policy_b;
  std::size_t value_w, value_b;
  std::size_t log_std;
  std::size_t total;
};

Offsets offsets_for(const NetLayout& layout) {
  if (layout.sizes.size() < 2)
    throw DomainError("net layout needs an input and at least one hidden layer");
  if (layout.activation != "tanh")
    throw DomainError("unsupported activation: " + layout.activation);
  Offsets off;
  std::size_t at = 0;
  for (std::size_t l = 1; l < layout.sizes.size(); ++l) {
    const int in = layout.sizes[l - 1];
    const int out = layout.sizes[l];
    if (in <= 0 || out <= 0) throw DomainError("net layout sizes must be positive");
    off.trunk.push_back({at, at + static_cast<std::size_t>(in) * out, in, out});
    at += static_cast<std::size_t>(in) * out + out;
  }
  const int last = layout.sizes.back();
  off.policy_w = at;
  off.policy_b = at + last;
  at += last + 1;
  off.value_w = at;
  off.value_b = at + last;
  at += last + 1;
  off.log_std = at;
  off.total = at + 1;
  return off;
}

// forward/backward sit in the training inner loop; the per-thread offset
// cache and reusable activation scratch keep them allocation-free.
const Offsets& cached_offsets(const NetLayout& layout) {
  thread_local NetLayout cached_layout;
  thread_local Offsets cached;
  thread_local bool primed = false;
  if (!primed || !(cached_layout == layout)) {
    cached = offsets_for(layout);
    cached_layout = layout;
    primed = true;
  }
  return cached;
}

// Activations per layer kept for the backward pass. acts[0] is the input;
// d_act/d_in are backward scratch.
struct ForwardCache {
  std::vector<std::vector<double>> acts;
  std::vector<double> d_act, d_in;
  double mean = 0.0, value = 0.0, log_std = 0.0;
  bool log_std_clamped = false;
};

PolicyOutput forward_cached(const PolicyParams& params,
                            const Observation& obs_norm, ForwardCache* cache) {
  if (!std::isfinite(obs_norm.v) || !std::isfinite(obs_norm.a) ||
      !std::isfinite(obs_norm.soc))
    throw DomainError("forward: non-finite observation");
  const Offsets& off = cached_offsets(params.layout);
  if (params.flat.size() != off.total)
    throw TransferIncompatibilityError(
        "parameter vector length " + std::to_string(params.flat.size()) +
        " does not match layout (" + std::to_string(off.total) + ")");
  if (params.layout.sizes.front() != 3)
    throw DomainError("net input width must be 3");
  const double* p = params.flat.data();

  thread_local ForwardCache scratch;
  ForwardCache& c = cache ? *cache : scratch;
  c.acts.resize(off.trunk.size() + 1);
  c.acts[0].assign({obs_norm.v, obs_norm.a, obs_norm.soc});

  for (std::size_t l = 0; l < off.trunk.size(); ++l) {
    const auto& layer = off.trunk[l];
    const std::vector<double>& act = c.acts[l];
    std::vector<double>& next = c.acts[l + 1];
    next.resize(layer.out);
    for (int j = 0; j < layer.out; ++j) {
      double z = p[layer.b + j];
      const double* wrow = p + layer.w + static_cast<std::size_t>(j) * layer.in;
      for (int i = 0; i < layer.in; ++i) z += wrow[i] * act[i];
      next[j] = std::tanh(z);
      if (!std::isfinite(next[j]))
        throw TrainingError("non-finite activation in trunk layer " +
                            std::to_string(l + 1));
    }
  }

  const std::vector<double>& top = c.acts.back();
  double raw_mean = p[off.policy_b];
  PolicyOutput out;
  out.value = p[off.value_b];
  for (std::size_t i = 0; i < top.size(); ++i) {
    raw_mean += p[off.policy_w + i] * top[i];
    out.value += p[off.value_w + i] * top[i];
  }
  out.mean = kMeanBound * std::tanh(raw_mean / kMeanBound);
  const double raw_log_std = p[off.log_std];
  out.log_std = std::clamp(raw_log_std, kLogStdMin, kLogStdMax);
  if (!std::isfinite(out.mean) || !std::isfinite(out.value))
    throw TrainingError("non-finite head output");
  c.mean = out.mean;
  c.value = out.value;
  c.log_std = out.log_std;
  c.log_std_clamped = raw_log_std != out.log_std;
  return out;
}

// Accumulates d(seeded scalar)/d(theta) given head seeds. The seeds weight
// mean, value, and log_std respectively.
void backward_into(const PolicyParams& params, const Offsets& off,
                   ForwardCache& cache, double d_mean, double d_value,
                   double d_log_std, std::vector<double>& grad) {
  const double* p = params.flat.data();
  const std::vector<double>& top = cache.acts.back();

  // chain through the soft mean bound: d(B*tanh(raw/B))/draw = 1-(mean/B)^2
  const double bound_ratio = cache.mean / kMeanBound;
  d_mean *= 1.0 - bound_ratio * bound_ratio;

  grad[off.policy_b] += d_mean;
  grad[off.value_b] += d_value;
  cache.d_act.assign(top.size(), 0.0);
  for (std::size_t i = 0; i < top.size(); ++i) {
    grad[off.policy_w + i] += d_mean * top[i];
    grad[off.value_w + i] += d_value * top[i];
    cache.d_act[i] = d_mean * p[off.policy_w + i] + d_value * p[off.value_w + i];
  }
  if (!cache.log_std_clamped) grad[off.log_std] += d_log_std;

  for (std::size_t l = off.trunk.size(); l-- > 0;) {
    const auto& layer = off.trunk[l];
    const std::vector<double>& out_act = cache.acts[l + 1];
    const std::vector<double>& in_act = cache.acts[l];
    cache.d_in.assign(layer.in, 0.0);
    for (int j = 0; j < layer.out; ++j) {
      const double delta = cache.d_act[j] * (1.0 - out_act[j] * out_act[j]);
      grad[layer.b + j] += delta;
      const double* wrow = p + layer.w + static_cast<std::size_t>(j) * layer.in;
      double* grow = grad.data() + layer.w + static_cast<std::size_t>(j) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        grow[i] += delta * in_act[i];
        cache.d_in[i] += delta * wrow[i];
      }
    }
    std::swap(cache.d_act, cache.d_in);
  }
}

// Pre-image of an action under the affine+tanh squash, clipped away from the
// infinite tails.
struct Preimage {
  double u;  // atanh value
  double y;  // clipped tanh value
};

Preimage squash_preimage(double t_ice) {
  double y = (t_ice - kActionMid) / kActionHalfRange;
  y = std::clamp(y, -kSquashClip, kSquashClip);
  return {std::atanh(y), y};
}

}  // namespace

std::size_t NetLayout::param_count() const { return offsets_for(*this).total; }

Observation normalize_observation(const Observation& raw) {
  return Observation{raw.v / 45.0, raw.a / 5.0, (raw.soc - 0.65) / 0.35};
}

PolicyParams init_params(const NetLayout& layout, std::uint64_t seed) {
  const Offsets off = offsets_for(layout);
  PolicyParams params;
  params.layout = layout;
  params.flat.assign(off.total, 0.0);
  Rng rng(derive_seed(seed, "net-init"));

  // Scaled orthogonal-ish init: rows Gram-Schmidt orthonormalized in blocks
  // of the input width, then unit scaled.
  const auto init_matrix = [&](std::size_t w0, int in, int out, double gain) {
    std::vector<std::vector<double>> block;
    for (int j = 0; j < out; ++j) {
      std::vector<double> row(in);
      for (int attempt = 0;; ++attempt) {
        for (double& x : row) x = rng.normal();
        for (const auto& prev : block) {
          double dot = 0.0;
          for (int i = 0; i < in; ++i) dot += row[i] * prev[i];
          for (int i = 0; i < in; ++i) row[i] -= dot * prev[i];
        }
        double norm = 0.0;
        for (double x : row) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 1e-6 || attempt > 8) {
          for (double& x : row) x /= norm;
          break;
        }
      }
      block.push_back(row);
      if (static_cast<int>(block.size()) == in) block.clear();
      for (int i = 0; i < in; ++i)
        params.flat[w0 + static_cast<std::size_t>(j) * in + i] = gain * row[i];
    }
  };

  for (const auto& layer : off.trunk)
    init_matrix(layer.w, layer.in, layer.out, 1.0);
  const int last = layout.sizes.back();
  init_matrix(off.policy_w, last, 1, 0.01);
  init_matrix(off.value_w, last, 1, 0.01);
  params.flat[off.log_std] = 0.0;
  return params;
}

PolicyOutput forward(const PolicyParams& params, const Observation& obs_norm) {
  return forward_cached(params, obs_norm, nullptr);
}

double squash_action(double pre_squash) {
  const double t = kActionMid + kActionHalfRange * std::tanh(pre_squash);
  return std::clamp(t, kActionLow, kActionHigh);
}

ActionSample sample_action(const PolicyOutput& out, Rng& rng) {
  const double sigma = std::exp(out.log_std);
  const double pre = out.mean + sigma * rng.normal();
  ActionSample sample;
  sample.t_ice = squash_action(pre);
  // Price the action actually returned, through the same inverse-squash path
  // used at update time, so stored log-probs reproduce exactly.
  sample.log_prob = squashed_log_prob(out, sample.t_ice);
  return sample;
}

double squashed_log_prob(const PolicyOutput& out, double t_ice) {
  const Preimage pre = squash_preimage(t_ice);
  const double sigma = std::exp(out.log_std);
  const double z = (pre.u - out.mean) / sigma;
  return -0.5 * z * z - out.log_std - 0.5 * kLn2Pi -
         std::log(kActionHalfRange * (1.0 - pre.y * pre.y));
}

double policy_entropy(const PolicyOutput& out) {
  return 0.5 * (kLn2Pi + 1.0) + out.log_std;
}

LogProbEntropy log_prob_and_entropy(const PolicyParams& params,
                                    const Observation& obs_norm,
                                    double t_ice) {
  if (t_ice < kActionLow || t_ice > kActionHigh)
    throw DomainError("log_prob: action " + std::to_string(t_ice) +
                      " outside [0, 115]");
  const PolicyOutput out = forward(params, obs_norm);
  return {squashed_log_prob(out, t_ice), policy_entropy(out)};
}

double ppo_ratio(double log_prob_new, double log_prob_old, int* clamp_events) {
  if (!std::isfinite(log_prob_new) || !std::isfinite(log_prob_old))
    throw TrainingError("ppo_ratio: non-finite log-probability");
  double diff = log_prob_new - log_prob_old;
  if (diff > 20.0) {
    diff = 20.0;
    if (clamp_events) ++*clamp_events;
  }
  return std::exp(diff);
}

double clipped_objective(double ratio, double advantage, double clip_eps) {
  if (clip_eps <= 0.0) throw DomainError("clipped_objective: clip_eps must be > 0");
  const double clipped =
      std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage;
  return std::min(ratio * advantage, clipped);
}

PpoLossTerms ppo_loss(const PolicyParams& params,
                      std::span<const PpoSample> batch, double clip_eps,
                      double c1, double c2, std::vector<double>* grad) {
  if (batch.empty()) throw DomainError("ppo_loss: empty minibatch");
  const Offsets& off = cached_offsets(params.layout);
  if (grad) grad->assign(off.total, 0.0);

  PpoLossTerms terms;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  thread_local ForwardCache cache;

  for (std::size_t k = 0; k < batch.size(); ++k) {
    const PpoSample& s = batch[k];
    const PolicyOutput out = forward_cached(params, s.obs_norm, &cache);
    const Preimage pre = squash_preimage(s.action);
    const double sigma = std::exp(out.log_std);
    const double z = (pre.u - out.mean) / sigma;
    const double log_prob = -0.5 * z * z - out.log_std - 0.5 * kLn2Pi -
                            std::log(kActionHalfRange * (1.0 - pre.y * pre.y));

    double diff = log_prob - s.old_log_prob;
    bool ratio_clamped = false;
    if (diff > 20.0) {
      diff = 20.0;
      ratio_clamped = true;
      ++terms.ratio_clamp_events;
    }
    const double ratio = std::exp(diff);
    const double unclipped = ratio * s.advantage;
    const double clipped =
        std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * s.advantage;
    const double clip_obj = std::min(unclipped, clipped);
    const double value_err = out.value - s.v_target;
    const double entropy = policy_entropy(out);

    if (!std::isfinite(clip_obj) || !std::isfinite(value_err))
      throw TrainingError("ppo_loss: non-finite loss at minibatch sample " +
                          std::to_string(k));

    terms.clip_term += inv_n * clip_obj;
    terms.value_term += inv_n * value_err * value_err;
    terms.entropy_term += inv_n * entropy;

    if (grad) {
      // Gradient flows through the surrogate only on the unclipped branch.
      const bool surrogate_active = unclipped <= clipped && !ratio_clamped;
      const double d_log_prob =
          surrogate_active ? inv_n * ratio * s.advantage : 0.0;
      const double d_mean = d_log_prob * (z / sigma);
      double d_log_std = d_log_prob * (z * z - 1.0);
      d_log_std += inv_n * c2;  // entropy bonus
      const double d_value = -2.0 * c1 * inv_n * value_err;
      backward_into(params, off, cache, d_mean, d_value, d_log_std, *grad);
    }
  }

  terms.objective =
      terms.clip_term - c1 * terms.value_term + c2 * terms.entropy_term;
  if (grad)
    for (double g : *grad)
      if (!std::isfinite(g))
        throw TrainingError("ppo_loss: non-finite gradient");
  return terms;
}

double clip_gradient_norm(std::span<double> grad, double max_norm) {
  double norm_sq = 0.0;
  for (double g : grad) norm_sq += g * g;
  const double norm = std::sqrt(norm_sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

AdamOptimizer::AdamOptimizer(std::size_t dim, double lr, double beta1,
                             double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(dim, 0.0),
      v_(dim, 0.0) {}

void AdamOptimizer::ascend(std::vector<double>& params,
                           std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw DomainError("AdamOptimizer: dimension mismatch");
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] += lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

namespace {

nlohmann::json layout_to_json(const NetLayout& layout) {
  return {{"sizes", layout.sizes}, {"activation", layout.activation}};
}

NetLayout layout_from_json(const nlohmann::json& j) {
  NetLayout layout;
  layout.sizes = j.at("sizes").get<std::vector<int>>();
  layout.activation = j.at("activation").get<std::string>();
  return layout;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "hevems-checkpoint/1";
  j["layout"] = layout_to_json(ckpt.params.layout);
  j["params"] = ckpt.params.flat;
  j["meta"] = {{"source_cycles", ckpt.meta.source_cycles},
               {"episodes", ckpt.meta.episodes},
               {"iterations", ckpt.meta.iterations},
               {"seed", hex64(ckpt.meta.seed)},
               {"hyper_hash", hex64(ckpt.meta.hyper_hash)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << j.dump(1) << "\n";
  if (!out) throw ConfigError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("checkpoint not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": not a valid checkpoint: " + e.what());
  }
  try {
    if (j.at("format") != "hevems-checkpoint/1")
      throw ParseError(path.string() + ": unsupported checkpoint format '" +
                       j.at("format").get<std::string>() + "'");
    Checkpoint ckpt;
    ckpt.params.layout = layout_from_json(j.at("layout"));
    ckpt.params.flat = j.at("params").get<std::vector<double>>();
    const auto& meta = j.at("meta");
    ckpt.meta.source_cycles =
        meta.at("source_cycles").get<std::vector<std::string>>();
    ckpt.meta.episodes = meta.at("episodes").get<std::int64_t>();
    ckpt.meta.iterations = meta.at("iterations").get<std::int64_t>();
    ckpt.meta.seed = parse_hex64(meta.at("seed").get<std::string>());
    ckpt.meta.hyper_hash = parse_hex64(meta.at("hyper_hash").get<std::string>());
    if (ckpt.params.flat.size() != ckpt.params.layout.param_count())
      throw ParseError(path.string() + ": parameter count does not match layout");
    for (double x : ckpt.params.flat)
      if (!std::isfinite(x))
        throw ParseError(path.string() + ": non-finite parameter");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const NetLayout& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!(ckpt.params.layout == expected))
    throw TransferIncompatibilityError(
        path.string() + ": checkpoint layout does not match the configured "
                        "network (transferred parameters must describe the "
                        "same architecture)");
  return ckpt;
}

}  // namespace hevems

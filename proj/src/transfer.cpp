#include "hevems/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "hevems/errors.hpp"

namespace hevems {

void TransferExperiment::validate() const {
  if (seeds.empty())
    throw ConfigError("transfer experiment: seeds must be non-empty");
  if (mode != "cold" && mode != "warm")
    throw ConfigError("transfer experiment: mode must be cold or warm");
  if (mode == "warm" && !expert_checkpoint)
    throw ConfigError(
        "transfer experiment: warm mode requires an expert checkpoint");
  if (partition.source.empty() || partition.target.empty())
    throw ConfigError("transfer experiment: partition must be non-empty");
}

namespace {

std::vector<DrivingCycle> select_cycles(const std::vector<DrivingCycle>& pool,
                                        const std::vector<std::string>& ids) {
  std::vector<DrivingCycle> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(cycle_by_id(pool, id));
  return out;
}

double moving_average5(const std::vector<EpisodeRecord>& episodes,
                       std::size_t end_idx) {
  const std::size_t lo = end_idx >= 4 ? end_idx - 4 : 0;
  double sum = 0.0;
  for (std::size_t i = lo; i <= end_idx; ++i) sum += episodes[i].total_reward;
  return sum / static_cast<double>(end_idx - lo + 1);
}

// Threshold: within 5% (in magnitude) of the run's best 5-episode moving
// average. Returns the 1-based episode index, 0 if never reached.
int episodes_to_threshold(const std::vector<EpisodeRecord>& episodes) {
  if (episodes.empty()) return 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < episodes.size(); ++i)
    best = std::max(best, moving_average5(episodes, i));
  const double threshold = best - 0.05 * std::abs(best);
  for (std::size_t i = 0; i < episodes.size(); ++i)
    if (moving_average5(episodes, i) >= threshold)
      return static_cast<int>(i) + 1;
  return 0;
}

RunRecord make_record(const std::string& experiment, const std::string& label,
                      std::uint64_t seed, const std::string& mode,
                      const DrivingCycle& target,
                      const PowertrainParams& params,
                      const TrainResult& trained, int episode_budget) {
  RunRecord rec;
  rec.experiment = experiment;
  rec.label = label;
  rec.seed = seed;
  rec.mode = mode;
  rec.target_id = target.id;
  rec.episodes = static_cast<int>(trained.log.episodes.size());
  if (episode_budget > 0)
    rec.episodes = std::min(rec.episodes, episode_budget);
  if (!trained.log.episodes.empty()) {
    rec.first_episode_reward = trained.log.episodes.front().total_reward;
    const std::size_t n5 =
        std::min<std::size_t>(5, trained.log.episodes.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < n5; ++i)
      sum += trained.log.episodes[i].total_reward;
    rec.mean_first5_reward = sum / static_cast<double>(n5);
    rec.episodes_to_threshold = episodes_to_threshold(trained.log.episodes);
    if (trained.log.timing && rec.episodes_to_threshold > 0) {
      const int iter =
          trained.log.episodes[rec.episodes_to_threshold - 1].iteration;
      double ms = 0.0;
      for (const auto& it : trained.log.iterations)
        if (it.iteration <= iter) ms += it.wall_ms;
      rec.wall_ms_to_threshold = ms;
    }
  }
  if (!trained.log.iterations.empty())
    rec.first_value_loss = trained.log.iterations.front().value_loss;

  Env env(params, target);
  const RolloutResult eval = rollout(env, mean_policy(trained.params),
                                     params.soc_ref, 1.0, /*rng_seed=*/0);
  rec.final_reward = eval.total_reward;
  rec.final_fuel_g = eval.fuel_g;
  rec.terminal_soc = eval.terminal_soc;
  return rec;
}

// Paired comparisons require identical seeds and budgets across arms.
void assert_paired(const ExperimentReport& report,
                   const std::string& experiment) {
  for (const auto& a : report.rows) {
    if (a.experiment != experiment || a.mode == "cold") continue;
    for (const auto& b : report.rows) {
      if (b.experiment != experiment || b.seed != a.seed ||
          b.target_id != a.target_id || &a == &b)
        continue;
      if (a.episodes != b.episodes)
        throw TrainingError("paired runs diverged in episode budget (seed " +
                            std::to_string(a.seed) + ")");
    }
  }
}

}  // namespace

void write_report_csv(const ExperimentReport& report,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << "experiment,label,seed,mode,target_id,episodes,first_episode_reward,"
         "mean_first5_reward,final_reward,final_fuel_g,terminal_soc,"
         "first_value_loss,episodes_to_threshold,wall_ms_to_threshold\n";
  char buf[512];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%llu,%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%d,%.17g\n",
                  r.experiment.c_str(), r.label.c_str(),
                  static_cast<unsigned long long>(r.seed), r.mode.c_str(),
                  r.target_id.c_str(), r.episodes, r.first_episode_reward,
                  r.mean_first5_reward, r.final_reward, r.final_fuel_g,
                  r.terminal_soc, r.first_value_loss, r.episodes_to_threshold,
                  r.wall_ms_to_threshold);
    out << buf;
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

void write_curve_csv(const RunCurve& curve,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << "episode,total_reward,normalized_reward,loss,value_loss,entropy\n";

  std::size_t n = curve.log.episodes.size();
  if (curve.episode_budget > 0)
    n = std::min<std::size_t>(n, curve.episode_budget);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, curve.log.episodes[i].total_reward);
    hi = std::max(hi, curve.log.episodes[i].total_reward);
  }
  const double span = hi - lo;

  char buf[256];
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ep = curve.log.episodes[i];
    IterationStats stats;
    for (const auto& it : curve.log.iterations)
      if (it.iteration == ep.iteration) {
        stats = it;
        break;
      }
    const double norm =
        span > 0.0 ? (ep.total_reward - lo) / span : 1.0;
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  ep.episode, ep.total_reward, norm, stats.loss,
                  stats.value_loss, stats.entropy);
    out << buf;
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

Checkpoint train_expert(const PowertrainParams& params,
                        const std::vector<DrivingCycle>& pool,
                        const std::vector<std::string>& source_ids,
                        const Hyperparams& hyper, const NetLayout& layout,
                        std::uint64_t seed,
                        const std::optional<std::filesystem::path>& save_path,
                        TrainingLog* log_out, bool timing) {
  if (source_ids.empty())
    throw ConfigError("train_expert: source cycle set is empty");
  const std::vector<DrivingCycle> source = select_cycles(pool, source_ids);
  const PolicyParams init =
      init_params(layout, derive_seed(seed, "expert-init"));
  const TrainResult trained = train(hyper, params, source, init,
                                    derive_seed(seed, "expert-train"), timing);
  if (log_out) *log_out = trained.log;
  if (trained.log.aborted)
    throw TrainingError("train_expert: training aborted on non-finite "
                        "parameters");

  Checkpoint ckpt;
  ckpt.params = trained.params;
  ckpt.meta.source_cycles = source_ids;
  ckpt.meta.episodes = static_cast<std::int64_t>(trained.log.episodes.size());
  ckpt.meta.iterations =
      static_cast<std::int64_t>(trained.log.iterations.size());
  ckpt.meta.seed = seed;
  ckpt.meta.hyper_hash = hyper_hash(hyper);
  if (save_path) save_checkpoint(ckpt, *save_path);
  return ckpt;
}

TrainResult warm_start(const Checkpoint& ckpt, const NetLayout& expected,
                       const PowertrainParams& params,
                       const std::vector<DrivingCycle>& target_cycles,
                       const Hyperparams& hyper, std::uint64_t seed,
                       bool allow_hyper_mismatch) {
  if (!(ckpt.params.layout == expected))
    throw TransferIncompatibilityError(
        "warm_start: checkpoint layout does not match the configured network");
  if (!allow_hyper_mismatch && ckpt.meta.hyper_hash != hyper_hash(hyper))
    throw TransferIncompatibilityError(
        "warm_start: hyperparameters differ from the expert's; pass the "
        "override flag to proceed anyway");
  return train(hyper, params, target_cycles, ckpt.params,
               derive_seed(seed, "student-train"));
}

ExperimentReport run_ablation_source_count(
    const PowertrainParams& params, const std::vector<DrivingCycle>& pool,
    const std::vector<int>& counts, const std::vector<std::string>& target_ids,
    const Hyperparams& expert_hyper, const Hyperparams& student_hyper,
    const NetLayout& layout, const std::vector<std::uint64_t>& seeds) {
  if (counts.empty()) throw ConfigError("source-count ablation: empty counts");
  if (seeds.empty()) throw ConfigError("source-count ablation: empty seeds");

  ExperimentReport report;
  const std::vector<DrivingCycle> targets = select_cycles(pool, target_ids);
  for (int count : counts) {
    const CyclePartition part = make_partition(
        pool, static_cast<std::size_t>(count), target_ids, true);
    const std::string label = "count=" + std::to_string(count);
    for (std::uint64_t seed : seeds) {
      const Checkpoint expert =
          train_expert(params, pool, part.source, expert_hyper, layout,
                       derive_seed(seed, "ablation-expert"));
      const TrainResult student =
          warm_start(expert, layout, params, targets, student_hyper,
                     derive_seed(seed, "ablation-student"));
      for (const auto& target : targets)
        report.rows.push_back(make_record("source-count", label, seed, "warm",
                                          target, params, student,
                                          student_hyper.episode_budget));
      report.curves.push_back(RunCurve{label + "_seed" + std::to_string(seed),
                                       student.log,
                                       student_hyper.episode_budget});
    }
  }
  return report;
}

ExperimentReport run_ablation_target_inclusion(
    const PowertrainParams& params, const std::vector<DrivingCycle>& pool,
    std::size_t n_source, const std::vector<std::string>& target_ids,
    const Hyperparams& expert_hyper, const Hyperparams& student_hyper,
    const NetLayout& layout, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("target-inclusion ablation: empty seeds");

  ExperimentReport report;
  const std::vector<DrivingCycle> targets = select_cycles(pool, target_ids);
  for (bool include : {true, false}) {
    const CyclePartition part =
        make_partition(pool, n_source, target_ids, include);
    const std::string label = include ? "include" : "exclude";
    for (std::uint64_t seed : seeds) {
      const Checkpoint expert =
          train_expert(params, pool, part.source, expert_hyper, layout,
                       derive_seed(seed, "ablation-expert"));
      const TrainResult student =
          warm_start(expert, layout, params, targets, student_hyper,
                     derive_seed(seed, "ablation-student"));
      for (const auto& target : targets)
        report.rows.push_back(make_record("target-inclusion", label, seed,
                                          "warm", target, params, student,
                                          student_hyper.episode_budget));
      report.curves.push_back(RunCurve{label + "_seed" + std::to_string(seed),
                                       student.log,
                                       student_hyper.episode_budget});
    }
  }
  assert_paired(report, "target-inclusion");
  return report;
}

ExperimentReport run_tl_vs_no_tl(const PowertrainParams& params,
                                 const std::vector<DrivingCycle>& pool,
                                 const std::vector<std::string>& target_ids,
                                 const Checkpoint& expert,
                                 const Hyperparams& student_hyper,
                                 const NetLayout& layout,
                                 const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("tl-vs-no-tl: empty seeds");

  ExperimentReport report;
  const std::vector<DrivingCycle> targets = select_cycles(pool, target_ids);
  for (std::uint64_t seed : seeds) {
    // Both arms share the training seed, so env streams, cycle schedules,
    // and episode budgets are identical.
    const std::uint64_t train_seed = derive_seed(seed, "student-train");

    const PolicyParams cold_init =
        init_params(layout, derive_seed(seed, "cold-init"));
    const TrainResult cold =
        train(student_hyper, params, targets, cold_init, train_seed);
    const TrainResult warm =
        warm_start(expert, layout, params, targets, student_hyper, seed);

    for (const auto& target : targets) {
      report.rows.push_back(make_record("tl-vs-no-tl", "ppo", seed, "cold",
                                        target, params, cold,
                                        student_hyper.episode_budget));
      report.rows.push_back(make_record("tl-vs-no-tl", "ppo+tl", seed, "warm",
                                        target, params, warm,
                                        student_hyper.episode_budget));
    }
    report.curves.push_back(RunCurve{"cold_seed" + std::to_string(seed),
                                     cold.log, student_hyper.episode_budget});
    report.curves.push_back(RunCurve{"warm_seed" + std::to_string(seed),
                                     warm.log, student_hyper.episode_budget});
  }
  assert_paired(report, "tl-vs-no-tl");
  return report;
}

}  // namespace hevems

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hevems/cycles.hpp"
#include "hevems/net.hpp"
#include "hevems/ppo.hpp"

namespace hevems {

// One configured transfer study: which cycles feed the expert, which seeds
// run, and whether students start cold or from the expert.
struct TransferExperiment {
  CyclePartition partition;
  Hyperparams hyper;
  std::vector<std::uint64_t> seeds;
  std::string mode = "warm";  // "cold" | "warm"
  std::optional<std::filesystem::path> expert_checkpoint;

  void validate() const;
};

struct RunRecord {
  std::string experiment;
  std::string label;  // arm within the experiment, e.g. "count=4"
  std::uint64_t seed = 0;
  std::string mode;  // cold | warm
  std::string target_id;
  int episodes = 0;
  double first_episode_reward = 0.0;
  double mean_first5_reward = 0.0;
  double final_reward = 0.0;  // deterministic mean-action rollout
  double final_fuel_g = 0.0;
  double terminal_soc = 0.0;
  double first_value_loss = 0.0;  // value loss of the first update phase
  int episodes_to_threshold = 0;  // 0 when never reached
  double wall_ms_to_threshold = 0.0;
};

struct RunCurve {
  std::string run_id;
  TrainingLog log;
  int episode_budget = 0;
};

struct ExperimentReport {
  std::vector<RunRecord> rows;
  std::vector<RunCurve> curves;
};

// Summary table, one row per (arm, seed, mode, target).
void write_report_csv(const ExperimentReport& report,
                      const std::filesystem::path& path);

// Per-run learning curve: episode,total_reward,normalized_reward (min-max
// per curve so the best value maps to 1),loss,value_loss,entropy.
void write_curve_csv(const RunCurve& curve, const std::filesystem::path& path);

// Trains the expert from a cold start on the source cycles and packages the
// parameters with provenance metadata. Also saved to `save_path` when given;
// the training log is copied out through `log_out` when non-null.
Checkpoint train_expert(const PowertrainParams& params,
                        const std::vector<DrivingCycle>& pool,
                        const std::vector<std::string>& source_ids,
                        const Hyperparams& hyper, const NetLayout& layout,
                        std::uint64_t seed,
                        const std::optional<std::filesystem::path>& save_path =
                            std::nullopt,
                        TrainingLog* log_out = nullptr, bool timing = false);

// Student training: all expert weights and biases become the init, optimizer
// moments start fresh, hyperparameters must match the expert's learning
// block (n_iterations / episode_budget are run budgets, not learning
// hyperparameters). Throws TransferIncompatibilityError on layout or
// hyperparameter mismatch unless explicitly overridden.
TrainResult warm_start(const Checkpoint& ckpt, const NetLayout& expected,
                       const PowertrainParams& params,
                       const std::vector<DrivingCycle>& target_cycles,
                       const Hyperparams& hyper, std::uint64_t seed,
                       bool allow_hyper_mismatch = false);

// Expert trained per source-cycle count (targets always included), then a
// fixed-budget student per seed; reports final target rewards per count.
ExperimentReport run_ablation_source_count(
    const PowertrainParams& params, const std::vector<DrivingCycle>& pool,
    const std::vector<int>& counts, const std::vector<std::string>& target_ids,
    const Hyperparams& expert_hyper, const Hyperparams& student_hyper,
    const NetLayout& layout, const std::vector<std::uint64_t>& seeds);

// Paired include/exclude arms per seed with identical seeds and budgets.
ExperimentReport run_ablation_target_inclusion(
    const PowertrainParams& params, const std::vector<DrivingCycle>& pool,
    std::size_t n_source, const std::vector<std::string>& target_ids,
    const Hyperparams& expert_hyper, const Hyperparams& student_hyper,
    const NetLayout& layout, const std::vector<std::uint64_t>& seeds);

// Cold vs warm students on the targets, paired seeds and episode budgets;
// produces per-episode reward and loss curves for each arm.
ExperimentReport run_tl_vs_no_tl(const PowertrainParams& params,
                                 const std::vector<DrivingCycle>& pool,
                                 const std::vector<std::string>& target_ids,
                                 const Checkpoint& expert,
                                 const Hyperparams& student_hyper,
                                 const NetLayout& layout,
                                 const std::vector<std::uint64_t>& seeds);

}  // namespace hevems

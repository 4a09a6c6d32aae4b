#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hevems/cycles.hpp"
#include "hevems/net.hpp"
#include "hevems/oracle.hpp"
#include "hevems/powertrain.hpp"
#include "hevems/ppo.hpp"

namespace hevems {

struct SynthSpec {
  std::uint64_t seed = 1;
  double duration_s = 300.0;
  CycleProfile profile = CycleProfile::kUrban;
};

struct PartitionSpec {
  std::size_t n_source = 0;  // 0 -> min(5, pool size)
  std::vector<std::string> target_ids;  // empty -> last pool cycle
  bool include_targets = true;
};

struct ExperimentSpec {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int episode_budget = 100;      // student episode budget
  int expert_iterations = 300;   // expert outer-loop budget
  int student_iterations = 200;  // iteration cap for students (budget usually
                                 // stops them first)
  std::vector<int> counts = {2, 4, 8};  // source-count ablation
  double soc0 = 0.65;
};

struct OracleSpec {
  int soc_nodes = 201;
  int torque_nodes = 24;
  std::vector<int> ladder = {26, 51, 101, 201};
};

// Everything a run needs; every field has a default so the empty config is
// runnable on synthetic cycles. Plain hierarchical JSON, documented in the
// README.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  bool timing = false;

  PowertrainParams powertrain;  // engine map resolved at load time
  Hyperparams hyper;
  NetLayout net;

  std::vector<std::filesystem::path> cycle_paths;
  std::vector<SynthSpec> synth_specs;

  PartitionSpec partition;
  ExperimentSpec experiment;
  OracleSpec oracle;

  std::uint64_t config_hash = 0;  // of the canonical resolved form
};

// Parses and validates; error messages carry the offending field path.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json_text(const std::string& text,
                                    const std::string& origin = "<inline>");
RunConfig default_run_config();

// Canonical JSON form of a config (defaults filled in).
std::string dump_run_config(const RunConfig& config);

// Loads the CSV cycles and synthesizes the configured ones, in that order.
std::vector<DrivingCycle> build_cycle_pool(const RunConfig& config);

// Resolves partition defaults against an actual pool.
CyclePartition resolve_partition(const RunConfig& config,
                                 const std::vector<DrivingCycle>& pool);

// manifest.json: config hash, seeds, format versions, artifact list. No
// timestamps, so reruns are byte-identical.
void write_manifest(const RunConfig& config,
                    const std::vector<std::string>& artifacts,
                    const std::filesystem::path& path);

}  // namespace hevems

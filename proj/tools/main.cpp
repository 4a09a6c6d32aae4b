// hevems: simulation, training, transfer, and benchmarking CLI for the
// series-parallel HEV energy-management toolkit.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hevems/config.hpp"
#include "hevems/cycles.hpp"
#include "hevems/env.hpp"
#include "hevems/errors.hpp"
#include "hevems/net.hpp"
#include "hevems/oracle.hpp"
#include "hevems/ppo.hpp"
#include "hevems/transfer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace hevems;

// Exit codes: 0 ok, 2 config, 3 data, 4 training, 5 incompatibility.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;
constexpr int kExitIncompatible = 5;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
};

RunConfig load_config_or_default(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty()
                      ? run_config_from_json_text("", "<default>")
                      : load_run_config(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

fs::path ensure_out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

DrivingCycle resolve_cycle(const RunConfig& cfg,
                           const std::vector<DrivingCycle>& pool,
                           const std::string& cycle_arg) {
  if (cycle_arg.empty()) {
    const CyclePartition part = resolve_partition(cfg, pool);
    return cycle_by_id(pool, part.target.front());
  }
  if (fs::exists(cycle_arg)) return load_cycle(cycle_arg);
  return cycle_by_id(pool, cycle_arg);
}

Hyperparams expert_hyper(const RunConfig& cfg) {
  Hyperparams h = cfg.hyper;
  h.n_iterations = cfg.experiment.expert_iterations;
  h.episode_budget = 0;
  return h;
}

Hyperparams student_hyper(const RunConfig& cfg) {
  Hyperparams h = cfg.hyper;
  h.n_iterations = cfg.experiment.student_iterations;
  h.episode_budget = cfg.experiment.episode_budget;
  return h;
}

int cmd_cycles_validate(const std::string& path, double dt) {
  const DrivingCycle cycle = load_cycle(path, dt);
  std::printf("cycle %s: %zu samples, dt %g s, duration %g s\n",
              cycle.id.c_str(), cycle.length(), cycle.dt, cycle.duration_s());
  std::printf("  speed: mean %.3f m/s, max %.3f m/s\n", cycle.mean_speed(),
              *std::max_element(cycle.speed.begin(), cycle.speed.end()));
  std::printf("  valid\n");
  return kExitOk;
}

int cmd_cycles_synth(std::uint64_t seed, double duration,
                     const std::string& profile, const std::string& out_path) {
  const DrivingCycle cycle =
      synthesize_cycle(seed, duration, parse_profile(profile));
  if (out_path.empty()) {
    std::printf("t,speed_mps,accel_mps2\n");
    for (std::size_t i = 0; i < cycle.length(); ++i)
      std::printf("%.17g,%.17g,%.17g\n", static_cast<double>(i) * cycle.dt,
                  cycle.speed[i], cycle.accel[i]);
  } else {
    write_cycle(cycle, out_path);
    std::fprintf(stderr, "wrote %s (%zu samples)\n", out_path.c_str(),
                 cycle.length());
  }
  return kExitOk;
}

int cmd_train(const CommonOpts& opts) {
  const RunConfig cfg = load_config_or_default(opts);
  const fs::path out = ensure_out_dir(cfg);
  const auto pool = build_cycle_pool(cfg);
  const CyclePartition part = resolve_partition(cfg, pool);

  TrainingLog log;
  train_expert(cfg.powertrain, pool, part.source, cfg.hyper, cfg.net,
               derive_seed(cfg.seed, "train"), out / "checkpoint.json", &log,
               cfg.timing);
  write_training_log_csv(log, out / "training_log.csv");
  write_manifest(cfg, {"checkpoint.json", "training_log.csv"},
                 out / "manifest.json");
  std::printf("trained on %zu source cycles; %zu episodes, %zu iterations\n",
              part.source.size(), log.episodes.size(), log.iterations.size());
  std::printf("checkpoint: %s\n", (out / "checkpoint.json").c_str());
  return kExitOk;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint_path,
             const std::string& cycle_arg, double soc0) {
  const RunConfig cfg = load_config_or_default(opts);
  const fs::path out = ensure_out_dir(cfg);
  const auto pool = build_cycle_pool(cfg);
  const DrivingCycle cycle = resolve_cycle(cfg, pool, cycle_arg);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path, cfg.net);

  Env env(cfg.powertrain, cycle);
  const RolloutResult result =
      rollout(env, mean_policy(ckpt.params), soc0, cfg.hyper.gamma, 0);
  const fs::path traj_path = out / ("eval_" + cycle.id + ".csv");
  write_trajectory_csv(result.trajectory, traj_path);
  write_manifest(cfg, {traj_path.filename().string()}, out / "manifest.json");

  std::printf("cycle %s: total_reward %.6f, fuel %.3f g, terminal_soc %.5f\n",
              cycle.id.c_str(), result.total_reward, result.fuel_g,
              result.terminal_soc);
  std::printf("trajectory: %s\n", traj_path.c_str());
  return kExitOk;
}

void write_report_artifacts(const RunConfig& cfg, const ExperimentReport& rep,
                            const fs::path& out, const std::string& stem) {
  std::vector<std::string> artifacts;
  const fs::path report_path = out / (stem + "_report.csv");
  write_report_csv(rep, report_path);
  artifacts.push_back(report_path.filename().string());
  for (const auto& curve : rep.curves) {
    const fs::path curve_path = out / (stem + "_curve_" + curve.run_id + ".csv");
    write_curve_csv(curve, curve_path);
    artifacts.push_back(curve_path.filename().string());
  }
  write_manifest(cfg, artifacts, out / "manifest.json");
}

int cmd_transfer(const CommonOpts& opts, const std::string& expert_path) {
  const RunConfig cfg = load_config_or_default(opts);
  const fs::path out = ensure_out_dir(cfg);
  const auto pool = build_cycle_pool(cfg);
  const CyclePartition part = resolve_partition(cfg, pool);

  Checkpoint expert;
  if (!expert_path.empty()) {
    expert = load_checkpoint(expert_path, cfg.net);
  } else {
    expert = train_expert(cfg.powertrain, pool, part.source, expert_hyper(cfg),
                          cfg.net, derive_seed(cfg.seed, "transfer-expert"),
                          out / "expert_checkpoint.json");
  }

  const ExperimentReport rep =
      run_tl_vs_no_tl(cfg.powertrain, pool, part.target, expert,
                      student_hyper(cfg), cfg.net, cfg.experiment.seeds);
  write_report_artifacts(cfg, rep, out, "tl");
  std::printf("tl-vs-no-tl: %zu rows, %zu curves -> %s\n", rep.rows.size(),
              rep.curves.size(), out.c_str());
  return kExitOk;
}

int cmd_ablate(const CommonOpts& opts, const std::string& which) {
  const RunConfig cfg = load_config_or_default(opts);
  const fs::path out = ensure_out_dir(cfg);
  const auto pool = build_cycle_pool(cfg);
  const CyclePartition part = resolve_partition(cfg, pool);

  if (which == "source-count") {
    const ExperimentReport rep = run_ablation_source_count(
        cfg.powertrain, pool, cfg.experiment.counts, part.target,
        expert_hyper(cfg), student_hyper(cfg), cfg.net, cfg.experiment.seeds);
    write_report_artifacts(cfg, rep, out, "source_count");
    std::printf("source-count ablation: %zu rows -> %s\n", rep.rows.size(),
                out.c_str());
    return kExitOk;
  }
  if (which == "target-inclusion") {
    const std::size_t n_source =
        cfg.partition.n_source > 0
            ? cfg.partition.n_source
            : std::min<std::size_t>(5, pool.size() - part.target.size());
    const ExperimentReport rep = run_ablation_target_inclusion(
        cfg.powertrain, pool, n_source, part.target, expert_hyper(cfg),
        student_hyper(cfg), cfg.net, cfg.experiment.seeds);
    write_report_artifacts(cfg, rep, out, "target_inclusion");
    std::printf("target-inclusion ablation: %zu rows -> %s\n",
                rep.rows.size(), out.c_str());
    return kExitOk;
  }
  if (which == "tl") return cmd_transfer(opts, "");
  throw ConfigError("ablate: unknown study '" + which +
                    "' (source-count|target-inclusion|tl)");
}

int cmd_oracle_solve(const CommonOpts& opts, const std::string& cycle_arg,
                     double soc0, int soc_nodes, int torque_nodes) {
  const RunConfig cfg = load_config_or_default(opts);
  const fs::path out = ensure_out_dir(cfg);
  const auto pool = build_cycle_pool(cfg);
  const DrivingCycle cycle = resolve_cycle(cfg, pool, cycle_arg);

  const DpGrid grid = make_uniform_grid(
      cfg.powertrain, soc_nodes > 0 ? soc_nodes : cfg.oracle.soc_nodes,
      torque_nodes > 0 ? torque_nodes : cfg.oracle.torque_nodes);
  const DpSolution sol = dp_solve(cfg.powertrain, cycle, grid, soc0);

  const fs::path traj_path = out / ("dp_" + cycle.id + ".csv");
  write_trajectory_csv(sol.trajectory, traj_path);
  const fs::path torque_path = out / ("dp_" + cycle.id + "_torque.csv");
  {
    std::ofstream tout(torque_path, std::ios::binary);
    if (!tout) throw ConfigError("cannot open " + torque_path.string());
    tout << "t,t_ice\n";
    char buf[64];
    for (std::size_t t = 0; t < sol.torque.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n",
                    static_cast<double>(t) * cycle.dt, sol.torque[t]);
      tout << buf;
    }
  }
  write_manifest(cfg,
                 {traj_path.filename().string(),
                  torque_path.filename().string()},
                 out / "manifest.json");

  std::printf("cycle %s: J* (backward) %.6f, realized cost %.6f, fuel %.3f g, "
              "terminal_soc %.5f\n",
              cycle.id.c_str(), sol.j_backward, sol.realized_cost, sol.fuel_g,
              sol.terminal_soc);
  std::printf("trajectory: %s\n", traj_path.c_str());
  return kExitOk;
}

int cmd_oracle_refine(const CommonOpts& opts, const std::string& cycle_arg,
                      double soc0) {
  const RunConfig cfg = load_config_or_default(opts);
  const fs::path out = ensure_out_dir(cfg);
  const auto pool = build_cycle_pool(cfg);
  const DrivingCycle cycle = resolve_cycle(cfg, pool, cycle_arg);

  const auto rows = dp_refine_study(cfg.powertrain, cycle, cfg.oracle.ladder,
                                    cfg.oracle.torque_nodes,
                                    soc0);
  const fs::path path = out / ("dp_refine_" + cycle.id + ".csv");
  std::ofstream rout(path, std::ios::binary);
  if (!rout) throw ConfigError("cannot open " + path.string());
  rout << "soc_nodes,torque_nodes,j_backward,realized_cost\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", r.soc_nodes,
                  r.torque_nodes, r.j_backward, r.realized_cost);
    rout << buf;
    std::printf("soc_nodes %4d: J* %.6f (realized %.6f)\n", r.soc_nodes,
                r.j_backward, r.realized_cost);
  }
  rout.close();
  write_manifest(cfg, {path.filename().string()}, out / "manifest.json");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"series-parallel HEV energy management: simulation, PPO "
               "training, transfer studies, and a DP benchmark"};
  app.require_subcommand(1);

  CommonOpts opts;

  // cycles
  auto* cycles = app.add_subcommand("cycles", "driving-cycle utilities");
  cycles->require_subcommand(1);
  std::string cyc_path, cyc_profile = "urban", cyc_out;
  double cyc_dt = 1.0, cyc_duration = 300.0;
  std::uint64_t cyc_seed = 1;
  auto* validate = cycles->add_subcommand("validate", "check a cycle CSV");
  validate->add_option("path", cyc_path, "cycle CSV file")->required();
  validate->add_option("--dt", cyc_dt, "sampling period, s");
  auto* synth = cycles->add_subcommand("synth", "generate a synthetic cycle");
  synth->add_option("--seed", cyc_seed, "generator seed");
  synth->add_option("--duration", cyc_duration, "duration, s");
  synth->add_option("--profile", cyc_profile, "urban|suburban|highway");
  synth->add_option("-o,--out", cyc_out, "output CSV (stdout if omitted)");

  // train
  auto* train_cmd = app.add_subcommand("train", "PPO training on the source "
                                                "cycles");
  train_cmd->add_option("-c,--config", opts.config_path, "run config JSON");
  train_cmd->add_option("-o,--out", opts.out_dir, "output directory");

  // eval
  std::string eval_ckpt, eval_cycle;
  double eval_soc0 = 0.65;
  auto* eval_cmd = app.add_subcommand("eval", "deterministic rollout of a "
                                              "checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint JSON")
      ->required();
  eval_cmd->add_option("--cycle", eval_cycle, "cycle id or CSV path");
  eval_cmd->add_option("--soc0", eval_soc0, "initial SOC");
  eval_cmd->add_option("-c,--config", opts.config_path, "run config JSON");
  eval_cmd->add_option("-o,--out", opts.out_dir, "output directory");

  // transfer
  std::string transfer_expert;
  auto* transfer_cmd = app.add_subcommand(
      "transfer", "expert -> student transfer study (tl vs no-tl)");
  transfer_cmd->add_option("-c,--config", opts.config_path, "run config JSON");
  transfer_cmd->add_option("-o,--out", opts.out_dir, "output directory");
  transfer_cmd->add_option("--expert", transfer_expert,
                           "existing expert checkpoint (otherwise trained)");

  // ablate
  std::string ablate_which;
  auto* ablate_cmd = app.add_subcommand("ablate", "run a configured ablation");
  ablate_cmd
      ->add_option("study", ablate_which,
                   "source-count|target-inclusion|tl")
      ->required();
  ablate_cmd->add_option("-c,--config", opts.config_path, "run config JSON");
  ablate_cmd->add_option("-o,--out", opts.out_dir, "output directory");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "dynamic-programming "
                                                  "benchmark");
  oracle_cmd->require_subcommand(1);
  std::string orc_cycle;
  double orc_soc0 = 0.65;
  int orc_soc_nodes = 0, orc_torque_nodes = 0;
  auto* solve = oracle_cmd->add_subcommand("solve", "solve one cycle");
  solve->add_option("--cycle", orc_cycle, "cycle id or CSV path");
  solve->add_option("--soc0", orc_soc0, "initial SOC");
  solve->add_option("--soc-nodes", orc_soc_nodes, "SOC grid nodes");
  solve->add_option("--torque-nodes", orc_torque_nodes, "torque grid nodes");
  solve->add_option("-c,--config", opts.config_path, "run config JSON");
  solve->add_option("-o,--out", opts.out_dir, "output directory");
  auto* refine = oracle_cmd->add_subcommand("refine", "grid refinement study");
  refine->add_option("--cycle", orc_cycle, "cycle id or CSV path");
  refine->add_option("--soc0", orc_soc0, "initial SOC");
  refine->add_option("-c,--config", opts.config_path, "run config JSON");
  refine->add_option("-o,--out", opts.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (validate->parsed()) return cmd_cycles_validate(cyc_path, cyc_dt);
    if (synth->parsed())
      return cmd_cycles_synth(cyc_seed, cyc_duration, cyc_profile, cyc_out);
    if (train_cmd->parsed()) return cmd_train(opts);
    if (eval_cmd->parsed())
      return cmd_eval(opts, eval_ckpt, eval_cycle, eval_soc0);
    if (transfer_cmd->parsed()) return cmd_transfer(opts, transfer_expert);
    if (ablate_cmd->parsed()) return cmd_ablate(opts, ablate_which);
    if (solve->parsed())
      return cmd_oracle_solve(opts, orc_cycle, orc_soc0, orc_soc_nodes,
                              orc_torque_nodes);
    if (refine->parsed()) return cmd_oracle_refine(opts, orc_cycle, orc_soc0);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const TransferIncompatibilityError& e) {
    std::fprintf(stderr, "incompatible transfer: %s\n", e.what());
    return kExitIncompatible;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return kExitTraining;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}

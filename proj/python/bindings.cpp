#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hevems/config.hpp"
#include "hevems/cycles.hpp"
#include "hevems/env.hpp"
#include "hevems/errors.hpp"
#include "hevems/net.hpp"
#include "hevems/oracle.hpp"
#include "hevems/powertrain.hpp"
#include "hevems/ppo.hpp"
#include "hevems/rng.hpp"
#include "hevems/transfer.hpp"

namespace py = pybind11;
using namespace hevems;

namespace {

DrivingCycle make_cycle(std::string id, std::vector<double> speed,
                        std::vector<double> accel, double dt) {
  DrivingCycle c;
  c.id = std::move(id);
  c.dt = dt;
  c.speed = std::move(speed);
  c.accel = accel.empty() ? derive_accel(c.speed, dt) : std::move(accel);
  validate_cycle(c);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "series-parallel HEV energy management: physics, PPO, transfer, "
            "and a DP benchmark";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "CycleParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "CycleValidationError",
                                          PyExc_ValueError);
  py::register_exception<DomainError>(m, "EnvDomainError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "PpoTrainingError",
                                        PyExc_RuntimeError);
  py::register_exception<TransferIncompatibilityError>(
      m, "TransferIncompatibilityError", PyExc_RuntimeError);

  // cycles
  py::class_<DrivingCycle>(m, "DrivingCycle")
      .def(py::init(&make_cycle), py::arg("id"), py::arg("speed"),
           py::arg("accel") = std::vector<double>{}, py::arg("dt") = 1.0)
      .def_readonly("id", &DrivingCycle::id)
      .def_readonly("dt", &DrivingCycle::dt)
      .def_readonly("speed", &DrivingCycle::speed)
      .def_readonly("accel", &DrivingCycle::accel)
      .def("__len__", &DrivingCycle::length)
      .def_property_readonly("duration_s", &DrivingCycle::duration_s)
      .def_property_readonly("mean_speed", &DrivingCycle::mean_speed);

  py::class_<CyclePartition>(m, "CyclePartition")
      .def_readonly("source", &CyclePartition::source)
      .def_readonly("target", &CyclePartition::target)
      .def_readonly("includes_target_in_source",
                    &CyclePartition::includes_target_in_source);

  m.def("load_cycle", &load_cycle, py::arg("path"), py::arg("dt") = 1.0);
  m.def("write_cycle", &write_cycle, py::arg("cycle"), py::arg("path"));
  m.def(
      "synthesize_cycle",
      [](std::uint64_t seed, double duration_s, const std::string& profile,
         double dt) {
        return synthesize_cycle(seed, duration_s, parse_profile(profile), dt);
      },
      py::arg("seed"), py::arg("duration_s") = 300.0,
      py::arg("profile") = "urban", py::arg("dt") = 1.0);
  m.def("make_partition", &make_partition, py::arg("all_cycles"),
        py::arg("n_source"), py::arg("target_ids"), py::arg("include_targets"));

  // powertrain
  py::class_<EngineMap>(m, "EngineMap")
      .def_readonly("torque_nodes", &EngineMap::torque_nodes)
      .def_readonly("speed_nodes", &EngineMap::speed_nodes)
      .def_readonly("optimal_speed", &EngineMap::optimal_speed);

  py::class_<PowertrainParams>(m, "PowertrainParams")
      .def(py::init(&default_powertrain_params))
      .def_readwrite("m_v", &PowertrainParams::m_v)
      .def_readwrite("f", &PowertrainParams::f)
      .def_readwrite("g", &PowertrainParams::g)
      .def_readwrite("rho", &PowertrainParams::rho)
      .def_readwrite("A_a", &PowertrainParams::A_a)
      .def_readwrite("C_D", &PowertrainParams::C_D)
      .def_readwrite("V_oc", &PowertrainParams::V_oc)
      .def_readwrite("r_0", &PowertrainParams::r_0)
      .def_readwrite("Q_cap_ah", &PowertrainParams::Q_cap_ah)
      .def_readwrite("soc_ref", &PowertrainParams::soc_ref)
      .def_readwrite("lambda_soc", &PowertrainParams::lambda_soc)
      .def_readwrite("soc_min", &PowertrainParams::soc_min)
      .def_readwrite("soc_max", &PowertrainParams::soc_max)
      .def_readwrite("p_bat_min", &PowertrainParams::p_bat_min)
      .def_readwrite("p_bat_max", &PowertrainParams::p_bat_max)
      .def_readwrite("eta_drv", &PowertrainParams::eta_drv)
      .def_readwrite("eta_regen", &PowertrainParams::eta_regen)
      .def_readonly("engine", &PowertrainParams::engine)
      .def("validate", &PowertrainParams::validate);

  py::class_<OperatingPoint>(m, "OperatingPoint")
      .def_readonly("w_rpm", &OperatingPoint::w_rpm)
      .def_readonly("p_w", &OperatingPoint::p_w)
      .def_readonly("fuel_g_per_s", &OperatingPoint::fuel_g_per_s);

  py::class_<PowerSplit>(m, "PowerSplit")
      .def_readonly("p_ice_w", &PowerSplit::p_ice_w)
      .def_readonly("p_bat_w", &PowerSplit::p_bat_w)
      .def_readonly("clamped", &PowerSplit::clamped);

  m.def("default_powertrain_params", &default_powertrain_params);
  m.def("default_engine_map", &default_engine_map);
  m.def("load_engine_map", &load_engine_map, py::arg("path"));
  m.def("save_engine_map", &save_engine_map, py::arg("map"), py::arg("path"));
  m.def("power_request", &power_request, py::arg("params"), py::arg("v"),
        py::arg("a"));
  m.def("battery_current", &battery_current, py::arg("params"),
        py::arg("p_bat_w"));
  m.def("soc_derivative", &soc_derivative, py::arg("params"),
        py::arg("p_bat_w"));
  m.def(
      "fuel_rate",
      [](const PowertrainParams& p, double t_ice, double w_rpm) {
        return fuel_rate(p.engine, t_ice, w_rpm);
      },
      py::arg("params"), py::arg("t_ice"), py::arg("w_rpm"));
  m.def(
      "engine_operating_point",
      [](const PowertrainParams& p, double t_ice) {
        return engine_operating_point(p.engine, t_ice);
      },
      py::arg("params"), py::arg("t_ice"));
  m.def("split_power", &split_power, py::arg("params"), py::arg("p_req_w"),
        py::arg("t_ice"));

  // env
  py::class_<Observation>(m, "Observation")
      .def(py::init([](double v, double a, double soc) {
             return Observation{v, a, soc};
           }),
           py::arg("v"), py::arg("a"), py::arg("soc"))
      .def_readonly("v", &Observation::v)
      .def_readonly("a", &Observation::a)
      .def_readonly("soc", &Observation::soc);

  py::class_<StepInfo>(m, "StepInfo")
      .def_readonly("fuel_g", &StepInfo::fuel_g)
      .def_readonly("soc_penalty", &StepInfo::soc_penalty)
      .def_readonly("p_req_w", &StepInfo::p_req_w)
      .def_readonly("p_ice_w", &StepInfo::p_ice_w)
      .def_readonly("p_bat_w", &StepInfo::p_bat_w)
      .def_readonly("clamped", &StepInfo::clamped);

  py::class_<StepResult>(m, "StepResult")
      .def_readonly("obs", &StepResult::obs)
      .def_readonly("reward", &StepResult::reward)
      .def_readonly("done", &StepResult::done)
      .def_readonly("info", &StepResult::info);

  py::class_<Env>(m, "Env")
      .def(py::init<PowertrainParams, DrivingCycle>(), py::arg("params"),
           py::arg("cycle"))
      .def("reset", py::overload_cast<double>(&Env::reset), py::arg("soc0"))
      .def("step", &Env::step, py::arg("t_ice"))
      .def_property_readonly("done", &Env::done)
      .def_property_readonly("soc_clamp_events", &Env::soc_clamp_events)
      .def_property_readonly("observation", &Env::observation);

  py::class_<TrajectoryRow>(m, "TrajectoryRow")
      .def_readonly("t", &TrajectoryRow::t)
      .def_readonly("v", &TrajectoryRow::v)
      .def_readonly("a", &TrajectoryRow::a)
      .def_readonly("soc", &TrajectoryRow::soc)
      .def_readonly("t_ice", &TrajectoryRow::t_ice)
      .def_readonly("p_req", &TrajectoryRow::p_req)
      .def_readonly("p_ice", &TrajectoryRow::p_ice)
      .def_readonly("p_bat", &TrajectoryRow::p_bat)
      .def_readonly("fuel_g", &TrajectoryRow::fuel_g)
      .def_readonly("reward", &TrajectoryRow::reward);

  py::class_<RolloutResult>(m, "RolloutResult")
      .def_readonly("trajectory", &RolloutResult::trajectory)
      .def_readonly("total_reward", &RolloutResult::total_reward)
      .def_readonly("discounted_return", &RolloutResult::discounted_return)
      .def_readonly("fuel_g", &RolloutResult::fuel_g)
      .def_readonly("terminal_soc", &RolloutResult::terminal_soc)
      .def_readonly("clamp_events", &RolloutResult::clamp_events);

  m.def(
      "rollout",
      [](const PowertrainParams& params, const DrivingCycle& cycle,
         const py::object& policy, double soc0, double gamma,
         std::uint64_t seed) {
        Env env(params, cycle);
        const Policy wrapped = [&policy](const Observation& obs, Rng&) {
          return policy(obs).cast<double>();
        };
        return rollout(env, wrapped, soc0, gamma, seed);
      },
      py::arg("params"), py::arg("cycle"), py::arg("policy"),
      py::arg("soc0") = 0.65, py::arg("gamma") = 1.0, py::arg("seed") = 0,
      "Full-episode rollout; `policy` maps an Observation to a torque.");
  m.def(
      "rollout_mean_policy",
      [](const PowertrainParams& params, const DrivingCycle& cycle,
         const PolicyParams& net, double soc0, double gamma) {
        Env env(params, cycle);
        return rollout(env, mean_policy(net), soc0, gamma, 0);
      },
      py::arg("params"), py::arg("cycle"), py::arg("net"),
      py::arg("soc0") = 0.65, py::arg("gamma") = 1.0,
      "Deterministic rollout with the network's mean action.");
  m.def("write_trajectory_csv", &write_trajectory_csv, py::arg("trajectory"),
        py::arg("path"));

  // net
  py::class_<NetLayout>(m, "NetLayout")
      .def(py::init([](std::vector<int> hidden) {
             NetLayout layout;
             layout.sizes = {3};
             layout.sizes.insert(layout.sizes.end(), hidden.begin(),
                                 hidden.end());
             return layout;
           }),
           py::arg("hidden") = std::vector<int>{64, 64})
      .def_readonly("sizes", &NetLayout::sizes)
      .def_property_readonly("param_count", &NetLayout::param_count)
      .def("__eq__", [](const NetLayout& a, const NetLayout& b) {
        return a == b;
      });

  py::class_<PolicyParams>(m, "PolicyParams")
      .def_readonly("layout", &PolicyParams::layout)
      .def_readonly("flat", &PolicyParams::flat);

  py::class_<PolicyOutput>(m, "PolicyOutput")
      .def_readonly("mean", &PolicyOutput::mean)
      .def_readonly("log_std", &PolicyOutput::log_std)
      .def_readonly("value", &PolicyOutput::value);

  m.def("init_params", &init_params, py::arg("layout"), py::arg("seed"));
  m.def(
      "forward",
      [](const PolicyParams& params, const Observation& raw) {
        return forward(params, normalize_observation(raw));
      },
      py::arg("params"), py::arg("obs"),
      "Network heads for a raw (unnormalized) observation.");
  m.def(
      "log_prob_and_entropy",
      [](const PolicyParams& params, const Observation& raw, double t_ice) {
        const LogProbEntropy lpe =
            log_prob_and_entropy(params, normalize_observation(raw), t_ice);
        return py::make_tuple(lpe.log_prob, lpe.entropy);
      },
      py::arg("params"), py::arg("obs"), py::arg("t_ice"));
  m.def(
      "sample_action",
      [](const PolicyParams& params, const Observation& raw,
         std::uint64_t seed) {
        Rng rng(seed);
        const ActionSample s =
            sample_action(forward(params, normalize_observation(raw)), rng);
        return py::make_tuple(s.t_ice, s.log_prob);
      },
      py::arg("params"), py::arg("obs"), py::arg("seed"));
  m.def("ppo_ratio",
        [](double lp_new, double lp_old) { return ppo_ratio(lp_new, lp_old); },
        py::arg("log_prob_new"), py::arg("log_prob_old"));
  m.def("clipped_objective", &clipped_objective, py::arg("ratio"),
        py::arg("advantage"), py::arg("clip_eps"));

  py::class_<CheckpointMeta>(m, "CheckpointMeta")
      .def_readonly("source_cycles", &CheckpointMeta::source_cycles)
      .def_readonly("episodes", &CheckpointMeta::episodes)
      .def_readonly("iterations", &CheckpointMeta::iterations)
      .def_readonly("seed", &CheckpointMeta::seed)
      .def_readonly("hyper_hash", &CheckpointMeta::hyper_hash);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("params", &Checkpoint::params)
      .def_readonly("meta", &Checkpoint::meta);

  m.def("save_checkpoint", &save_checkpoint, py::arg("checkpoint"),
        py::arg("path"));
  m.def("load_checkpoint",
        py::overload_cast<const std::filesystem::path&>(&load_checkpoint),
        py::arg("path"));

  // ppo
  py::class_<Hyperparams>(m, "Hyperparams")
      .def(py::init<>())
      .def_readwrite("gamma", &Hyperparams::gamma)
      .def_readwrite("lr", &Hyperparams::lr)
      .def_readwrite("horizon_k", &Hyperparams::horizon_k)
      .def_readwrite("minibatch_z", &Hyperparams::minibatch_z)
      .def_readwrite("clip_eps", &Hyperparams::clip_eps)
      .def_readwrite("gae_lambda", &Hyperparams::gae_lambda)
      .def_readwrite("c1", &Hyperparams::c1)
      .def_readwrite("c2", &Hyperparams::c2)
      .def_readwrite("lr_end", &Hyperparams::lr_end)
      .def_readwrite("c2_end", &Hyperparams::c2_end)
      .def_readwrite("n_actors_m", &Hyperparams::n_actors_m)
      .def_readwrite("n_epochs", &Hyperparams::n_epochs)
      .def_readwrite("n_iterations", &Hyperparams::n_iterations)
      .def_readwrite("grad_clip", &Hyperparams::grad_clip)
      .def_readwrite("reward_scale", &Hyperparams::reward_scale)
      .def_readwrite("episode_budget", &Hyperparams::episode_budget)
      .def_readwrite("select_best", &Hyperparams::select_best)
      .def("validate", &Hyperparams::validate);

  py::class_<EpisodeRecord>(m, "EpisodeRecord")
      .def_readonly("iteration", &EpisodeRecord::iteration)
      .def_readonly("episode", &EpisodeRecord::episode)
      .def_readonly("total_reward", &EpisodeRecord::total_reward);

  py::class_<IterationStats>(m, "IterationStats")
      .def_readonly("iteration", &IterationStats::iteration)
      .def_readonly("loss", &IterationStats::loss)
      .def_readonly("clip_loss", &IterationStats::clip_loss)
      .def_readonly("value_loss", &IterationStats::value_loss)
      .def_readonly("entropy", &IterationStats::entropy);

  py::class_<TrainingLog>(m, "TrainingLog")
      .def_readonly("episodes", &TrainingLog::episodes)
      .def_readonly("iterations", &TrainingLog::iterations)
      .def_readonly("aborted", &TrainingLog::aborted)
      .def_readonly("best_iteration", &TrainingLog::best_iteration)
      .def_readonly("best_eval_reward", &TrainingLog::best_eval_reward);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("log", &TrainResult::log);

  m.def("train", &train, py::arg("hyper"), py::arg("params"),
        py::arg("source_cycles"), py::arg("init"), py::arg("seed"),
        py::arg("timing") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("write_training_log_csv", &write_training_log_csv, py::arg("log"),
        py::arg("path"));

  // oracle
  py::class_<DpGrid>(m, "DpGrid")
      .def_readonly("soc_nodes", &DpGrid::soc_nodes)
      .def_readonly("torque_nodes", &DpGrid::torque_nodes);
  py::class_<DpRefineRow>(m, "DpRefineRow")
      .def_readonly("soc_nodes", &DpRefineRow::soc_nodes)
      .def_readonly("torque_nodes", &DpRefineRow::torque_nodes)
      .def_readonly("j_backward", &DpRefineRow::j_backward)
      .def_readonly("realized_cost", &DpRefineRow::realized_cost);
  py::class_<DpSolution>(m, "DpSolution")
      .def_readonly("j_backward", &DpSolution::j_backward)
      .def_readonly("realized_cost", &DpSolution::realized_cost)
      .def_readonly("total_reward", &DpSolution::total_reward)
      .def_readonly("fuel_g", &DpSolution::fuel_g)
      .def_readonly("terminal_soc", &DpSolution::terminal_soc)
      .def_readonly("torque", &DpSolution::torque)
      .def_readonly("trajectory", &DpSolution::trajectory);

  m.def("make_uniform_grid", &make_uniform_grid, py::arg("params"),
        py::arg("n_soc"), py::arg("n_torque"));
  m.def("dp_solve", &dp_solve, py::arg("params"), py::arg("cycle"),
        py::arg("grid"), py::arg("soc0") = 0.65,
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "dp_refine_study",
      [](const PowertrainParams& params, const DrivingCycle& cycle,
         std::vector<int> ladder, int n_torque, double soc0) {
        return dp_refine_study(params, cycle, ladder, n_torque, soc0);
      },
      py::arg("params"), py::arg("cycle"), py::arg("ladder"),
      py::arg("n_torque") = 24, py::arg("soc0") = 0.65,
      py::call_guard<py::gil_scoped_release>());

  // transfer
  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("experiment", &RunRecord::experiment)
      .def_readonly("label", &RunRecord::label)
      .def_readonly("seed", &RunRecord::seed)
      .def_readonly("mode", &RunRecord::mode)
      .def_readonly("target_id", &RunRecord::target_id)
      .def_readonly("episodes", &RunRecord::episodes)
      .def_readonly("first_episode_reward", &RunRecord::first_episode_reward)
      .def_readonly("mean_first5_reward", &RunRecord::mean_first5_reward)
      .def_readonly("final_reward", &RunRecord::final_reward)
      .def_readonly("final_fuel_g", &RunRecord::final_fuel_g)
      .def_readonly("terminal_soc", &RunRecord::terminal_soc)
      .def_readonly("first_value_loss", &RunRecord::first_value_loss);

  py::class_<RunCurve>(m, "RunCurve")
      .def_readonly("run_id", &RunCurve::run_id)
      .def_readonly("log", &RunCurve::log)
      .def_readonly("episode_budget", &RunCurve::episode_budget);

  py::class_<ExperimentReport>(m, "ExperimentReport")
      .def_readonly("rows", &ExperimentReport::rows)
      .def_readonly("curves", &ExperimentReport::curves);

  m.def(
      "train_expert",
      [](const PowertrainParams& params, const std::vector<DrivingCycle>& pool,
         const std::vector<std::string>& source_ids, const Hyperparams& hyper,
         const NetLayout& layout, std::uint64_t seed,
         const std::optional<std::filesystem::path>& save_path) {
        return train_expert(params, pool, source_ids, hyper, layout, seed,
                            save_path);
      },
      py::arg("params"), py::arg("pool"), py::arg("source_ids"),
      py::arg("hyper"), py::arg("layout"), py::arg("seed"),
      py::arg("save_path") = std::optional<std::filesystem::path>{},
      py::call_guard<py::gil_scoped_release>());
  m.def("warm_start", &warm_start, py::arg("checkpoint"), py::arg("expected"),
        py::arg("params"), py::arg("target_cycles"), py::arg("hyper"),
        py::arg("seed"), py::arg("allow_hyper_mismatch") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("run_ablation_source_count", &run_ablation_source_count,
        py::arg("params"), py::arg("pool"), py::arg("counts"),
        py::arg("target_ids"), py::arg("expert_hyper"),
        py::arg("student_hyper"), py::arg("layout"), py::arg("seeds"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_ablation_target_inclusion", &run_ablation_target_inclusion,
        py::arg("params"), py::arg("pool"), py::arg("n_source"),
        py::arg("target_ids"), py::arg("expert_hyper"),
        py::arg("student_hyper"), py::arg("layout"), py::arg("seeds"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_tl_vs_no_tl", &run_tl_vs_no_tl, py::arg("params"),
        py::arg("pool"), py::arg("target_ids"), py::arg("expert"),
        py::arg("student_hyper"), py::arg("layout"), py::arg("seeds"),
        py::call_guard<py::gil_scoped_release>());
  m.def("write_report_csv", &write_report_csv, py::arg("report"),
        py::arg("path"));
  m.def("write_curve_csv", &write_curve_csv, py::arg("curve"),
        py::arg("path"));
  m.def("hyper_hash", &hyper_hash, py::arg("hyper"));
}

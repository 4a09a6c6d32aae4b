#include "hevems/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hevems/errors.hpp"
#include "hevems/rng.hpp"

namespace hevems {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(path, "must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(path + "." + key, "unknown field");
}

template <typename T>
T get_field(const json& j, const std::string& path, const char* key,
            T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(path + "." + key, "wrong type");
  }
}

void parse_powertrain(const json& j, const std::string& path,
                      PowertrainParams& p) {
  check_keys(j, path,
             {"m_v", "f", "g", "rho", "A_a", "C_D", "V_oc", "r_0", "Q_cap_ah",
              "nominal_voltage", "soc_ref", "lambda_soc", "soc_min", "soc_max",
              "p_bat_min", "p_bat_max", "eta_drv", "eta_regen", "engine_map",
              "motor_limits", "generator_limits"});
  p.m_v = get_field(j, path, "m_v", p.m_v);
  p.f = get_field(j, path, "f", p.f);
  p.g = get_field(j, path, "g", p.g);
  p.rho = get_field(j, path, "rho", p.rho);
  p.A_a = get_field(j, path, "A_a", p.A_a);
  p.C_D = get_field(j, path, "C_D", p.C_D);
  p.V_oc = get_field(j, path, "V_oc", p.V_oc);
  p.r_0 = get_field(j, path, "r_0", p.r_0);
  p.Q_cap_ah = get_field(j, path, "Q_cap_ah", p.Q_cap_ah);
  p.nominal_voltage = get_field(j, path, "nominal_voltage", p.nominal_voltage);
  p.soc_ref = get_field(j, path, "soc_ref", p.soc_ref);
  p.lambda_soc = get_field(j, path, "lambda_soc", p.lambda_soc);
  p.soc_min = get_field(j, path, "soc_min", p.soc_min);
  p.soc_max = get_field(j, path, "soc_max", p.soc_max);
  p.p_bat_min = get_field(j, path, "p_bat_min", p.p_bat_min);
  p.p_bat_max = get_field(j, path, "p_bat_max", p.p_bat_max);
  p.eta_drv = get_field(j, path, "eta_drv", p.eta_drv);
  p.eta_regen = get_field(j, path, "eta_regen", p.eta_regen);

  const auto parse_limits = [&](const char* key, ComponentLimits& lim) {
    if (!j.contains(key)) return;
    const std::string sub = path + "." + key;
    check_keys(j.at(key), sub,
               {"speed_min_rpm", "speed_max_rpm", "torque_min_nm",
                "torque_max_nm"});
    lim.speed_min_rpm = get_field(j.at(key), sub, "speed_min_rpm",
                                  lim.speed_min_rpm);
    lim.speed_max_rpm = get_field(j.at(key), sub, "speed_max_rpm",
                                  lim.speed_max_rpm);
    lim.torque_min_nm = get_field(j.at(key), sub, "torque_min_nm",
                                  lim.torque_min_nm);
    lim.torque_max_nm = get_field(j.at(key), sub, "torque_max_nm",
                                  lim.torque_max_nm);
  };
  parse_limits("motor_limits", p.motor);
  parse_limits("generator_limits", p.generator);

  const std::string map_path = get_field<std::string>(j, path, "engine_map", "");
  if (!map_path.empty()) {
    if (!std::filesystem::exists(map_path))
      fail(path + ".engine_map", "file does not exist: " + map_path);
    p.engine = load_engine_map(map_path);
  }
}

void parse_hyper(const json& j, const std::string& path, Hyperparams& h) {
  check_keys(j, path,
             {"gamma", "lr", "horizon_k", "minibatch_z", "clip_eps",
              "gae_lambda", "c1", "c2", "lr_end", "c2_end", "n_actors_m", "n_epochs",
              "n_iterations", "grad_clip", "reward_scale", "episode_budget",
              "select_best"});
  h.gamma = get_field(j, path, "gamma", h.gamma);
  h.lr = get_field(j, path, "lr", h.lr);
  h.horizon_k = get_field(j, path, "horizon_k", h.horizon_k);
  h.minibatch_z = get_field(j, path, "minibatch_z", h.minibatch_z);
  h.clip_eps = get_field(j, path, "clip_eps", h.clip_eps);
  h.gae_lambda = get_field(j, path, "gae_lambda", h.gae_lambda);
  h.c1 = get_field(j, path, "c1", h.c1);
  h.c2 = get_field(j, path, "c2", h.c2);
  h.lr_end = get_field(j, path, "lr_end", h.lr_end);
  h.c2_end = get_field(j, path, "c2_end", h.c2_end);
  h.n_actors_m = get_field(j, path, "n_actors_m", h.n_actors_m);
  h.n_epochs = get_field(j, path, "n_epochs", h.n_epochs);
  h.n_iterations = get_field(j, path, "n_iterations", h.n_iterations);
  h.grad_clip = get_field(j, path, "grad_clip", h.grad_clip);
  h.reward_scale = get_field(j, path, "reward_scale", h.reward_scale);
  h.episode_budget = get_field(j, path, "episode_budget", h.episode_budget);
  h.select_best = get_field(j, path, "select_best", h.select_best);
}

RunConfig parse_config(const json& j, const std::string& origin) {
  RunConfig cfg = default_run_config();
  check_keys(j, origin,
             {"seed", "out_dir", "timing", "powertrain", "hyper", "net",
              "cycles", "partition", "experiment", "oracle"});
  cfg.seed = get_field<std::uint64_t>(j, origin, "seed", cfg.seed);
  cfg.out_dir = get_field<std::string>(j, origin, "out_dir",
                                       cfg.out_dir.string());
  cfg.timing = get_field(j, origin, "timing", cfg.timing);

  if (j.contains("powertrain"))
    parse_powertrain(j.at("powertrain"), origin + ".powertrain",
                     cfg.powertrain);
  if (j.contains("hyper")) parse_hyper(j.at("hyper"), origin + ".hyper",
                                       cfg.hyper);

  if (j.contains("net")) {
    const std::string path = origin + ".net";
    check_keys(j.at("net"), path, {"hidden"});
    const auto hidden = get_field<std::vector<int>>(j.at("net"), path,
                                                    "hidden", {64, 64});
    cfg.net.sizes = {3};
    cfg.net.sizes.insert(cfg.net.sizes.end(), hidden.begin(), hidden.end());
  }

  if (j.contains("cycles")) {
    const std::string path = origin + ".cycles";
    check_keys(j.at("cycles"), path, {"paths", "synth"});
    for (const auto& p : get_field<std::vector<std::string>>(
             j.at("cycles"), path, "paths", {}))
      cfg.cycle_paths.emplace_back(p);
    if (j.at("cycles").contains("synth")) {
      cfg.synth_specs.clear();
      std::size_t idx = 0;
      for (const auto& s : j.at("cycles").at("synth")) {
        const std::string sub = path + ".synth[" + std::to_string(idx++) + "]";
        check_keys(s, sub, {"seed", "duration_s", "profile"});
        SynthSpec spec;
        spec.seed = get_field<std::uint64_t>(s, sub, "seed", spec.seed);
        spec.duration_s = get_field(s, sub, "duration_s", spec.duration_s);
        spec.profile = parse_profile(
            get_field<std::string>(s, sub, "profile", "urban"));
        cfg.synth_specs.push_back(spec);
      }
    }
  }

  if (j.contains("partition")) {
    const std::string path = origin + ".partition";
    check_keys(j.at("partition"), path,
               {"n_source", "target_ids", "include_targets"});
    cfg.partition.n_source = get_field<std::size_t>(j.at("partition"), path,
                                                    "n_source",
                                                    cfg.partition.n_source);
    cfg.partition.target_ids = get_field<std::vector<std::string>>(
        j.at("partition"), path, "target_ids", cfg.partition.target_ids);
    cfg.partition.include_targets = get_field(
        j.at("partition"), path, "include_targets",
        cfg.partition.include_targets);
  }

  if (j.contains("experiment")) {
    const std::string path = origin + ".experiment";
    check_keys(j.at("experiment"), path,
               {"seeds", "episode_budget", "expert_iterations",
                "student_iterations", "counts", "soc0"});
    cfg.experiment.seeds = get_field<std::vector<std::uint64_t>>(
        j.at("experiment"), path, "seeds", cfg.experiment.seeds);
    cfg.experiment.episode_budget = get_field(
        j.at("experiment"), path, "episode_budget",
        cfg.experiment.episode_budget);
    cfg.experiment.expert_iterations = get_field(
        j.at("experiment"), path, "expert_iterations",
        cfg.experiment.expert_iterations);
    cfg.experiment.student_iterations = get_field(
        j.at("experiment"), path, "student_iterations",
        cfg.experiment.student_iterations);
    cfg.experiment.counts = get_field<std::vector<int>>(
        j.at("experiment"), path, "counts", cfg.experiment.counts);
    cfg.experiment.soc0 = get_field(j.at("experiment"), path, "soc0",
                                    cfg.experiment.soc0);
  }

  if (j.contains("oracle")) {
    const std::string path = origin + ".oracle";
    check_keys(j.at("oracle"), path, {"soc_nodes", "torque_nodes", "ladder"});
    cfg.oracle.soc_nodes = get_field(j.at("oracle"), path, "soc_nodes",
                                     cfg.oracle.soc_nodes);
    cfg.oracle.torque_nodes = get_field(j.at("oracle"), path, "torque_nodes",
                                        cfg.oracle.torque_nodes);
    cfg.oracle.ladder = get_field<std::vector<int>>(j.at("oracle"), path,
                                                    "ladder",
                                                    cfg.oracle.ladder);
  }

  if (const char* env_out = std::getenv("HEVEMS_OUT"))
    cfg.out_dir = env_out;

  cfg.hyper.validate();
  cfg.powertrain.validate();
  cfg.config_hash = fnv1a(dump_run_config(cfg));
  return cfg;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.powertrain = default_powertrain_params();
  // Six urban desk-scale cycles keep the empty config self-contained.
  cfg.synth_specs.clear();
  for (std::uint64_t s = 1; s <= 6; ++s)
    cfg.synth_specs.push_back(SynthSpec{s, 300.0, CycleProfile::kUrban});
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_text(ss.str(), path.string());
}

RunConfig run_config_from_json_text(const std::string& text,
                                    const std::string& origin) {
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  return parse_config(j, origin);
}

std::string dump_run_config(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir.string();
  j["timing"] = cfg.timing;
  const PowertrainParams& p = cfg.powertrain;
  j["powertrain"] = {
      {"m_v", p.m_v}, {"f", p.f}, {"g", p.g}, {"rho", p.rho}, {"A_a", p.A_a},
      {"C_D", p.C_D}, {"V_oc", p.V_oc}, {"r_0", p.r_0},
      {"Q_cap_ah", p.Q_cap_ah}, {"nominal_voltage", p.nominal_voltage},
      {"soc_ref", p.soc_ref}, {"lambda_soc", p.lambda_soc},
      {"soc_min", p.soc_min}, {"soc_max", p.soc_max},
      {"p_bat_min", p.p_bat_min}, {"p_bat_max", p.p_bat_max},
      {"eta_drv", p.eta_drv}, {"eta_regen", p.eta_regen}};
  const Hyperparams& h = cfg.hyper;
  j["hyper"] = {{"gamma", h.gamma}, {"lr", h.lr}, {"horizon_k", h.horizon_k},
                {"minibatch_z", h.minibatch_z}, {"clip_eps", h.clip_eps},
                {"gae_lambda", h.gae_lambda}, {"c1", h.c1}, {"c2", h.c2},
                {"lr_end", h.lr_end}, {"c2_end", h.c2_end},
                {"n_actors_m", h.n_actors_m}, {"n_epochs", h.n_epochs},
                {"n_iterations", h.n_iterations}, {"grad_clip", h.grad_clip},
                {"reward_scale", h.reward_scale},
                {"episode_budget", h.episode_budget},
                {"select_best", h.select_best}};
  std::vector<int> hidden(cfg.net.sizes.begin() + 1, cfg.net.sizes.end());
  j["net"] = {{"hidden", hidden}};
  json paths = json::array();
  for (const auto& p2 : cfg.cycle_paths) paths.push_back(p2.string());
  json synth = json::array();
  for (const auto& s : cfg.synth_specs)
    synth.push_back({{"seed", s.seed}, {"duration_s", s.duration_s},
                     {"profile", profile_name(s.profile)}});
  j["cycles"] = {{"paths", paths}, {"synth", synth}};
  j["partition"] = {{"n_source", cfg.partition.n_source},
                    {"target_ids", cfg.partition.target_ids},
                    {"include_targets", cfg.partition.include_targets}};
  j["experiment"] = {{"seeds", cfg.experiment.seeds},
                     {"episode_budget", cfg.experiment.episode_budget},
                     {"expert_iterations", cfg.experiment.expert_iterations},
                     {"student_iterations", cfg.experiment.student_iterations},
                     {"counts", cfg.experiment.counts},
                     {"soc0", cfg.experiment.soc0}};
  j["oracle"] = {{"soc_nodes", cfg.oracle.soc_nodes},
                 {"torque_nodes", cfg.oracle.torque_nodes},
                 {"ladder", cfg.oracle.ladder}};
  return j.dump(1);
}

std::vector<DrivingCycle> build_cycle_pool(const RunConfig& cfg) {
  std::vector<DrivingCycle> pool;
  for (const auto& path : cfg.cycle_paths) pool.push_back(load_cycle(path));
  for (const auto& spec : cfg.synth_specs)
    pool.push_back(synthesize_cycle(spec.seed, spec.duration_s, spec.profile));
  if (pool.empty())
    throw ConfigError("config: no cycles configured (paths and synth empty)");
  return pool;
}

CyclePartition resolve_partition(const RunConfig& cfg,
                                 const std::vector<DrivingCycle>& pool) {
  std::vector<std::string> targets = cfg.partition.target_ids;
  if (targets.empty()) targets.push_back(pool.back().id);
  std::size_t n_source = cfg.partition.n_source;
  if (n_source == 0) n_source = std::min<std::size_t>(5, pool.size());
  return make_partition(pool, n_source, targets,
                        cfg.partition.include_targets);
}

void write_manifest(const RunConfig& cfg,
                    const std::vector<std::string>& artifacts,
                    const std::filesystem::path& path) {
  json j;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(cfg.config_hash));
  j["config_hash"] = buf;
  j["seed"] = cfg.seed;
  j["tool"] = "hevems";
  j["formats"] = {{"checkpoint", "hevems-checkpoint/1"},
                  {"engine_map", EngineMap::kFormatVersion}};
  j["artifacts"] = artifacts;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << j.dump(1) << "\n";
  if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace hevems

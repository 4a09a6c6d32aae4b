#include "hevems/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hevems/errors.hpp"

namespace hevems {

Env::Env(PowertrainParams params, DrivingCycle cycle)
    : params_(std::move(params)), cycle_(std::move(cycle)) {
  params_.validate();
  validate_cycle(cycle_);
}

Observation Env::reset(double soc0) {
  if (soc0 < params_.soc_min || soc0 > params_.soc_max)
    throw DomainError("reset: soc0 " + std::to_string(soc0) + " outside [" +
                      std::to_string(params_.soc_min) + ", " +
                      std::to_string(params_.soc_max) + "]");
  state_ = EnvState{0, soc0};
  done_ = false;
  soc_clamp_events_ = 0;
  return observation();
}

Observation Env::reset(DrivingCycle cycle, double soc0) {
  validate_cycle(cycle);
  cycle_ = std::move(cycle);
  return reset(soc0);
}

Observation Env::observation() const {
  const std::size_t t = std::min(state_.t, cycle_.length() - 1);
  return Observation{cycle_.speed[t], cycle_.accel[t], state_.soc};
}

StepResult Env::step(double t_ice) {
  if (done_) throw DomainError("step: episode already finished");
  if (t_ice < 0.0 || t_ice > params_.engine.torque_max())
    throw DomainError("step: torque " + std::to_string(t_ice) +
                      " Nm outside [0, 115]");

  const double v = cycle_.speed[state_.t];
  const double a = cycle_.accel[state_.t];
  const double p_req = power_request(params_, v, a);
  const PowerSplit split = split_power(params_, p_req, t_ice);
  const double fuel_rate_g = engine_operating_point(params_.engine, t_ice)
                                 .fuel_g_per_s;

  // SOC forward Euler; exact between clamps because the derivative does not
  // depend on SOC.
  double soc_next = state_.soc + soc_derivative(params_, split.p_bat_w) *
                                     cycle_.dt;
  bool soc_clamped = false;
  if (soc_next < 0.0 || soc_next > 1.0) {
    soc_next = std::clamp(soc_next, 0.0, 1.0);
    soc_clamped = true;
    ++soc_clamp_events_;
  }

  const double delta = soc_next < params_.soc_ref
                           ? soc_next - params_.soc_ref
                           : 0.0;
  const double fuel_g = fuel_rate_g * cycle_.dt;
  const double soc_penalty = params_.lambda_soc * delta * delta * cycle_.dt;

  StepResult result;
  result.reward = -(fuel_g + soc_penalty);
  result.info = StepInfo{fuel_g,       soc_penalty,  p_req,
                         split.p_ice_w, split.p_bat_w,
                         split.clamped || soc_clamped};

  state_.soc = soc_next;
  ++state_.t;
  done_ = state_.t >= cycle_.length();
  result.done = done_;
  result.obs = observation();
  return result;
}

RolloutResult rollout(Env& env, const Policy& policy, double soc0,
                      double gamma, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  RolloutResult out;
  Observation obs = env.reset(soc0);
  out.trajectory.reserve(env.cycle().length());
  double discount = 1.0;
  while (!env.done()) {
    const double t_index = static_cast<double>(env.state().t) * env.cycle().dt;
    const double action = policy(obs, rng);
    const StepResult sr = env.step(action);
    out.trajectory.push_back(TrajectoryRow{
        t_index, obs.v, obs.a, obs.soc, action, sr.info.p_req_w,
        sr.info.p_ice_w, sr.info.p_bat_w, sr.info.fuel_g, sr.reward});
    out.total_reward += sr.reward;
    out.discounted_return += discount * sr.reward;
    discount *= gamma;
    out.fuel_g += sr.info.fuel_g;
    if (sr.info.clamped) ++out.clamp_events;
    obs = sr.obs;
  }
  out.terminal_soc = env.state().soc;
  return out;
}

void write_trajectory_csv(const std::vector<TrajectoryRow>& trajectory,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << "t,v,a,soc,t_ice,p_req,p_ice,p_bat,fuel_g,reward\n";
  char buf[256];
  for (const auto& row : trajectory) {
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g\n",
                  row.t, row.v, row.a, row.soc, row.t_ice, row.p_req,
                  row.p_ice, row.p_bat, row.fuel_g, row.reward);
    out << buf;
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace hevems

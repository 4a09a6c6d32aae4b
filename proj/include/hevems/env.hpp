#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "hevems/cycles.hpp"
#include "hevems/powertrain.hpp"
#include "hevems/rng.hpp"

namespace hevems {

struct Observation {
  double v = 0.0;    // m/s
  double a = 0.0;    // m/s^2
  double soc = 0.0;  // fraction
};

struct EnvState {
  std::size_t t = 0;
  double soc = 0.0;
};

struct StepInfo {
  double fuel_g = 0.0;
  double soc_penalty = 0.0;
  double p_req_w = 0.0;
  double p_ice_w = 0.0;
  double p_bat_w = 0.0;
  bool clamped = false;  // battery-power or SOC clamp fired this step
};

struct StepResult {
  Observation obs;
  double reward = 0.0;  // -(fuel + SOC penalty), always <= 0
  bool done = false;
  StepInfo info;
};

// Episodic MDP over one driving cycle: state (v, a, SOC), action = engine
// torque, reward = negated instantaneous cost. One instance per rollout
// worker; instances over shared immutable cycles run concurrently.
class Env {
 public:
  Env(PowertrainParams params, DrivingCycle cycle);

  Observation reset(double soc0);
  Observation reset(DrivingCycle cycle, double soc0);
  StepResult step(double t_ice);

  Observation observation() const;
  const EnvState& state() const { return state_; }
  const DrivingCycle& cycle() const { return cycle_; }
  const PowertrainParams& params() const { return params_; }
  bool done() const { return done_; }
  int soc_clamp_events() const { return soc_clamp_events_; }

 private:
  PowertrainParams params_;
  DrivingCycle cycle_;
  EnvState state_;
  bool done_ = true;
  int soc_clamp_events_ = 0;
};

struct TrajectoryRow {
  double t = 0.0;
  double v = 0.0;
  double a = 0.0;
  double soc = 0.0;
  double t_ice = 0.0;
  double p_req = 0.0;
  double p_ice = 0.0;
  double p_bat = 0.0;
  double fuel_g = 0.0;
  double reward = 0.0;
};

struct RolloutResult {
  std::vector<TrajectoryRow> trajectory;
  double total_reward = 0.0;      // undiscounted sum
  double discounted_return = 0.0; // with the configured gamma
  double fuel_g = 0.0;
  double terminal_soc = 0.0;
  int clamp_events = 0;
};

// Action selector; may consult its own random stream.
using Policy = std::function<double(const Observation&, Rng&)>;

// Full-episode rollout from soc0. Deterministic given the seed and policy.
RolloutResult rollout(Env& env, const Policy& policy, double soc0,
                      double gamma, std::uint64_t rng_seed);

// Columns: t,v,a,soc,t_ice,p_req,p_ice,p_bat,fuel_g,reward
void write_trajectory_csv(const std::vector<TrajectoryRow>& trajectory,
                          const std::filesystem::path& path);

}  // namespace hevems

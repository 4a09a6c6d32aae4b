#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hevems {

// Physical bounds of the driving state space. Every cycle, loaded or
// synthesized, must respect these.
inline constexpr double kSpeedMaxMps = 45.0;
inline constexpr double kAccelMaxMps2 = 5.0;

// A timestamped speed/acceleration trace; the exogenous disturbance of the
// energy-management problem. Immutable after construction and safe to share
// across rollout workers.
struct DrivingCycle {
  std::string id;
  double dt = 1.0;            // sampling period, s
  std::vector<double> speed;  // m/s
  std::vector<double> accel;  // m/s^2, same length as speed

  std::size_t length() const { return speed.size(); }
  double duration_s() const { return static_cast<double>(speed.size()) * dt; }
  double mean_speed() const;
};

// Throws ValidationError if any invariant fails; the message names the
// offending index.
void validate_cycle(const DrivingCycle& cycle);

// Derives accel[t] = (speed[t+1] - speed[t]) / dt, last entry 0.
std::vector<double> derive_accel(const std::vector<double>& speed, double dt);

// CSV format: header `t,speed_mps[,accel_mps2]`, one row per sample, LF line
// endings. When the accel column is absent it is derived by forward
// difference. Out-of-bound values are hard errors, never clipped.
DrivingCycle load_cycle(const std::filesystem::path& path, double dt = 1.0);
void write_cycle(const DrivingCycle& cycle, const std::filesystem::path& path);

enum class CycleProfile { kUrban, kSuburban, kHighway };

CycleProfile parse_profile(const std::string& name);
std::string profile_name(CycleProfile profile);

// Markov-chain speed walk over three regimes (idle / cruise / transient),
// clipped to the state bounds. Deterministic for a fixed seed. Urban and
// suburban profiles start from standstill and revisit idle; highway cruises.
DrivingCycle synthesize_cycle(std::uint64_t seed, double duration_s,
                              CycleProfile profile, double dt = 1.0);

// Source/target split of a cycle pool.
struct CyclePartition {
  std::vector<std::string> source;
  std::vector<std::string> target;
  bool includes_target_in_source = false;
};

// Picks exactly n_source source ids from `all` (in pool order). When
// include_targets is set the targets are placed first; otherwise the source
// set is drawn from non-target cycles only.
CyclePartition make_partition(const std::vector<DrivingCycle>& all,
                              std::size_t n_source,
                              const std::vector<std::string>& target_ids,
                              bool include_targets);

// Pool lookup helper; throws ConfigError on unknown id.
const DrivingCycle& cycle_by_id(const std::vector<DrivingCycle>& pool,
                                const std::string& id);

}  // namespace hevems

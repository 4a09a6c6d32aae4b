#include "hevems/cycles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hevems/errors.hpp"
#include "hevems/rng.hpp"

namespace hevems {

double DrivingCycle::mean_speed() const {
  if (speed.empty()) return 0.0;
  return std::accumulate(speed.begin(), speed.end(), 0.0) /
         static_cast<double>(speed.size());
}

void validate_cycle(const DrivingCycle& cycle) {
  if (cycle.dt <= 0.0)
    throw ValidationError("cycle '" + cycle.id + "': dt must be positive");
  if (cycle.speed.size() < 2)
    throw ValidationError("cycle '" + cycle.id + "': needs at least 2 samples");
  if (cycle.accel.size() != cycle.speed.size())
    throw ValidationError("cycle '" + cycle.id +
                          "': speed/accel length mismatch");
  for (std::size_t i = 0; i < cycle.speed.size(); ++i) {
    const double v = cycle.speed[i];
    if (!std::isfinite(v) || v < 0.0 || v > kSpeedMaxMps)
      throw ValidationError("cycle '" + cycle.id + "': speed " +
                            std::to_string(v) + " out of [0,45] at index " +
                            std::to_string(i));
  }
  for (std::size_t i = 0; i < cycle.accel.size(); ++i) {
    const double a = cycle.accel[i];
    if (!std::isfinite(a) || a < -kAccelMaxMps2 || a > kAccelMaxMps2)
      throw ValidationError("cycle '" + cycle.id + "': accel " +
                            std::to_string(a) + " out of [-5,5] at index " +
                            std::to_string(i));
  }
}

std::vector<double> derive_accel(const std::vector<double>& speed, double dt) {
  std::vector<double> accel(speed.size(), 0.0);
  for (std::size_t i = 0; i + 1 < speed.size(); ++i)
    accel[i] = (speed[i + 1] - speed[i]) / dt;
  return accel;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, const std::string& where) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ParseError(where + ": not a number: '" + text + "'");
  }
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
    ++pos;
  if (pos != text.size())
    throw ParseError(where + ": trailing garbage in '" + text + "'");
  return value;
}

}  // namespace

DrivingCycle load_cycle(const std::filesystem::path& path, double dt) {
  if (dt <= 0.0) throw DomainError("load_cycle: dt must be positive");
  std::ifstream in(path);
  if (!in) throw ConfigError("cycle file not found: " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw ParseError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_csv_line(line);
  const bool has_accel = header.size() >= 3 && header[2] == "accel_mps2";
  if (header.size() < 2 || header[0] != "t" || header[1] != "speed_mps" ||
      (header.size() >= 3 && !has_accel))
    throw ParseError(path.string() +
                     ": expected header 't,speed_mps[,accel_mps2]', got '" +
                     line + "'");

  DrivingCycle cycle;
  cycle.id = path.stem().string();
  cycle.dt = dt;

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != header.size())
      throw ParseError(where + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(fields.size()));
    parse_number(fields[0], where);  // time column is informational
    cycle.speed.push_back(parse_number(fields[1], where));
    if (has_accel) cycle.accel.push_back(parse_number(fields[2], where));
  }

  if (!has_accel) cycle.accel = derive_accel(cycle.speed, dt);
  validate_cycle(cycle);
  return cycle;
}

void write_cycle(const DrivingCycle& cycle,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << "t,speed_mps,accel_mps2\n";
  char buf[128];
  for (std::size_t i = 0; i < cycle.speed.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n",
                  static_cast<double>(i) * cycle.dt, cycle.speed[i],
                  cycle.accel[i]);
    out << buf;
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

CycleProfile parse_profile(const std::string& name) {
  if (name == "urban") return CycleProfile::kUrban;
  if (name == "suburban") return CycleProfile::kSuburban;
  if (name == "highway") return CycleProfile::kHighway;
  throw ConfigError("unknown cycle profile: '" + name +
                    "' (expected urban|suburban|highway)");
}

std::string profile_name(CycleProfile profile) {
  switch (profile) {
    case CycleProfile::kUrban: return "urban";
    case CycleProfile::kSuburban: return "suburban";
    case CycleProfile::kHighway: return "highway";
  }
  return "unknown";
}

namespace {

struct ProfileTuning {
  double target_lo, target_hi;  // cruise target draw range, m/s
  double idle_exit_prob;        // per-step chance to leave idle
  double to_idle_prob;          // per-step chance cruise -> decelerate to stop
  double retarget_prob;         // per-step chance cruise -> new target
  double accel_scale;           // transient accel magnitude, m/s^2
  double jitter;                // cruise speed jitter, m/s^2
  bool start_idle;
};

ProfileTuning tuning_for(CycleProfile profile) {
  switch (profile) {
    case CycleProfile::kUrban:
      return {4.0, 11.0, 0.12, 0.035, 0.02, 1.6, 0.35, true};
    case CycleProfile::kSuburban:
      return {9.0, 17.0, 0.20, 0.012, 0.02, 1.4, 0.30, true};
    case CycleProfile::kHighway:
      return {24.0, 31.0, 1.00, 0.0, 0.015, 1.0, 0.25, false};
  }
  return {};
}

}  // namespace

DrivingCycle synthesize_cycle(std::uint64_t seed, double duration_s,
                              CycleProfile profile, double dt) {
  if (duration_s < 60.0)
    throw DomainError("synthesize_cycle: duration must be at least 60 s");
  if (dt <= 0.0) throw DomainError("synthesize_cycle: dt must be positive");

  const ProfileTuning p = tuning_for(profile);
  const auto n = static_cast<std::size_t>(std::llround(duration_s / dt));
  Rng rng(derive_seed(seed, "cycle-synth"));

  enum class Regime { kIdle, kTransient, kCruise };
  Regime regime = p.start_idle ? Regime::kIdle : Regime::kCruise;
  double target = rng.uniform(p.target_lo, p.target_hi);
  double v = p.start_idle ? 0.0 : target;

  std::vector<double> speed;
  speed.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    speed.push_back(v);
    double dv = 0.0;
    switch (regime) {
      case Regime::kIdle:
        if (rng.uniform() < p.idle_exit_prob) {
          regime = Regime::kTransient;
          target = rng.uniform(p.target_lo, p.target_hi);
        }
        break;
      case Regime::kTransient: {
        const double gap = target - v;
        dv = std::clamp(gap, -p.accel_scale, p.accel_scale) +
             0.3 * p.jitter * rng.normal();
        if (std::abs(gap) < 0.8) regime = Regime::kCruise;
        break;
      }
      case Regime::kCruise:
        dv = 0.15 * (target - v) + p.jitter * rng.normal();
        if (rng.uniform() < p.to_idle_prob) {
          regime = Regime::kTransient;
          target = 0.0;
        } else if (rng.uniform() < p.retarget_prob) {
          regime = Regime::kTransient;
          target = rng.uniform(p.target_lo, p.target_hi);
        }
        break;
    }
    dv = std::clamp(dv, -(kAccelMaxMps2 - 0.5) * dt, (kAccelMaxMps2 - 0.5) * dt);
    v = std::clamp(v + dv, 0.0, kSpeedMaxMps);
    if (v < 0.15) {
      v = 0.0;
      if (regime != Regime::kIdle && target == 0.0) regime = Regime::kIdle;
    }
  }

  DrivingCycle cycle;
  cycle.id = profile_name(profile) + "-s" + std::to_string(seed) + "-d" +
             std::to_string(static_cast<long long>(duration_s));
  cycle.dt = dt;
  cycle.speed = std::move(speed);
  cycle.accel = derive_accel(cycle.speed, dt);
  validate_cycle(cycle);
  return cycle;
}

CyclePartition make_partition(const std::vector<DrivingCycle>& all,
                              std::size_t n_source,
                              const std::vector<std::string>& target_ids,
                              bool include_targets) {
  if (n_source == 0) throw ConfigError("make_partition: n_source must be > 0");
  if (n_source > all.size())
    throw ConfigError("make_partition: n_source " + std::to_string(n_source) +
                      " exceeds pool size " + std::to_string(all.size()));
  if (target_ids.empty())
    throw ConfigError("make_partition: target set must be non-empty");
  for (const auto& id : target_ids) cycle_by_id(all, id);  // membership check

  const auto is_target = [&](const std::string& id) {
    return std::find(target_ids.begin(), target_ids.end(), id) !=
           target_ids.end();
  };

  CyclePartition part;
  part.target = target_ids;
  part.includes_target_in_source = include_targets;

  if (include_targets) {
    if (n_source < target_ids.size())
      throw ConfigError("make_partition: n_source " + std::to_string(n_source) +
                        " cannot include " + std::to_string(target_ids.size()) +
                        " target cycles");
    part.source = target_ids;
    for (const auto& cycle : all) {
      if (part.source.size() == n_source) break;
      if (!is_target(cycle.id)) part.source.push_back(cycle.id);
    }
  } else {
    for (const auto& cycle : all) {
      if (part.source.size() == n_source) break;
      if (!is_target(cycle.id)) part.source.push_back(cycle.id);
    }
  }
  if (part.source.size() != n_source)
    throw ConfigError("make_partition: pool has too few cycles to draw " +
                      std::to_string(n_source) + " source cycles");
  return part;
}

const DrivingCycle& cycle_by_id(const std::vector<DrivingCycle>& pool,
                                const std::string& id) {
  for (const auto& cycle : pool)
    if (cycle.id == id) return cycle;
  throw ConfigError("unknown cycle id: '" + id + "'");
}

}  // namespace hevems

#include "hevems/powertrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hevems/cycles.hpp"
#include "hevems/errors.hpp"

namespace hevems {

namespace {

constexpr double kFuelLhvJPerG = 43000.0;  // gasoline lower heating value

// Willans-style fuel model behind the default map. Efficiency peaks at
// mid torque and 4200 rpm; spin losses grow quadratically with speed and
// make very low torque unattractive, so idle-stop pays off.
double willans_fuel_g_per_s(double t_nm, double w_rpm) {
  if (t_nm <= 0.0) return 0.0;
  const double w_rad = rpm_to_rad_s(w_rpm);
  const double p_brake = t_nm * w_rad;
  const double speed_factor =
      1.0 - 0.25 * std::pow((w_rpm - 4200.0) / 3500.0, 2);
  const double torque_factor = 1.0 - 0.35 * std::pow((t_nm - 70.0) / 115.0, 2);
  const double eta = 0.36 * speed_factor * torque_factor;
  const double p_loss = 3500.0 * std::pow(w_rpm / 4500.0, 2);
  return (p_brake / eta + p_loss) / kFuelLhvJPerG;
}

std::size_t lower_node(const std::vector<double>& nodes, double x) {
  // index i with nodes[i] <= x <= nodes[i+1]
  auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  std::size_t i = static_cast<std::size_t>(it - nodes.begin());
  if (i > 0) --i;
  if (i + 1 >= nodes.size()) i = nodes.size() - 2;
  return i;
}

}  // namespace

void EngineMap::validate() const {
  if (torque_nodes.size() < 2 || speed_nodes.size() < 2)
    throw ValidationError("engine map: needs at least 2 nodes per axis");
  if (fuel.size() != torque_nodes.size() * speed_nodes.size())
    throw ValidationError("engine map: fuel grid size mismatch");
  if (optimal_speed.size() != torque_nodes.size())
    throw ValidationError("engine map: optimal line size mismatch");
  if (!std::is_sorted(torque_nodes.begin(), torque_nodes.end()) ||
      !std::is_sorted(speed_nodes.begin(), speed_nodes.end()))
    throw ValidationError("engine map: node axes must be ascending");
  if (torque_nodes.front() != 0.0 || torque_nodes.back() != 115.0)
    throw ValidationError("engine map: torque range must be [0, 115] Nm");
  if (speed_nodes.front() != 1000.0 || speed_nodes.back() != 4500.0)
    throw ValidationError("engine map: speed range must be [1000, 4500] rpm");
  for (std::size_t wi = 0; wi < speed_nodes.size(); ++wi)
    if (fuel_at(0, wi) != 0.0)
      throw ValidationError("engine map: zero-torque row must be zero");
  for (std::size_t wi = 0; wi < speed_nodes.size(); ++wi)
    for (std::size_t ti = 0; ti + 1 < torque_nodes.size(); ++ti)
      if (fuel_at(ti + 1, wi) < fuel_at(ti, wi))
        throw ValidationError(
            "engine map: fuel must be non-decreasing in torque (speed node " +
            std::to_string(wi) + ")");
  for (std::size_t ti = 0; ti < torque_nodes.size(); ++ti)
    if (optimal_speed[ti] < speed_nodes.front() ||
        optimal_speed[ti] > speed_nodes.back())
      throw ValidationError("engine map: optimal line leaves the speed range");
  if (!std::is_sorted(optimal_speed.begin(), optimal_speed.end()))
    throw ValidationError("engine map: optimal line must be non-decreasing");
}

double fuel_rate(const EngineMap& map, double t_ice, double w_rpm) {
  if (t_ice == 0.0 || w_rpm == 0.0) return 0.0;
  if (t_ice < map.torque_min() || t_ice > map.torque_max())
    throw DomainError("fuel_rate: torque " + std::to_string(t_ice) +
                      " Nm outside map grid");
  if (w_rpm < map.speed_min() || w_rpm > map.speed_max())
    throw DomainError("fuel_rate: speed " + std::to_string(w_rpm) +
                      " rpm outside map grid");

  const std::size_t ti = lower_node(map.torque_nodes, t_ice);
  const std::size_t wi = lower_node(map.speed_nodes, w_rpm);
  const double tx = (t_ice - map.torque_nodes[ti]) /
                    (map.torque_nodes[ti + 1] - map.torque_nodes[ti]);
  const double wx = (w_rpm - map.speed_nodes[wi]) /
                    (map.speed_nodes[wi + 1] - map.speed_nodes[wi]);
  const double f00 = map.fuel_at(ti, wi);
  const double f01 = map.fuel_at(ti, wi + 1);
  const double f10 = map.fuel_at(ti + 1, wi);
  const double f11 = map.fuel_at(ti + 1, wi + 1);
  return f00 * (1.0 - tx) * (1.0 - wx) + f01 * (1.0 - tx) * wx +
         f10 * tx * (1.0 - wx) + f11 * tx * wx;
}

double optimal_line_speed(const EngineMap& map, double t_ice) {
  if (t_ice < map.torque_min() || t_ice > map.torque_max())
    throw DomainError("optimal_line_speed: torque out of range");
  const std::size_t ti = lower_node(map.torque_nodes, t_ice);
  const double tx = (t_ice - map.torque_nodes[ti]) /
                    (map.torque_nodes[ti + 1] - map.torque_nodes[ti]);
  return map.optimal_speed[ti] * (1.0 - tx) + map.optimal_speed[ti + 1] * tx;
}

std::pair<double, double> optimal_line_point_for_power(const EngineMap& map,
                                                       double power_w) {
  const auto line_power = [&](double t) {
    return t * rpm_to_rad_s(optimal_line_speed(map, t));
  };
  double lo = map.torque_min();
  double hi = map.torque_max();
  if (power_w <= 0.0) return {lo, optimal_line_speed(map, lo)};
  if (power_w >= line_power(hi)) return {hi, optimal_line_speed(map, hi)};
  for (int i = 0; i < 80; ++i) {  // power is monotone in torque on the line
    const double mid = 0.5 * (lo + hi);
    (line_power(mid) < power_w ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  return {t, optimal_line_speed(map, t)};
}

EngineMap default_engine_map() {
  EngineMap map;
  for (int t = 0; t <= 115; t += 5) map.torque_nodes.push_back(t);
  for (int w = 1000; w <= 4500; w += 250) map.speed_nodes.push_back(w);

  // Monotone optimal line from 1000 rpm at light load to 4200 rpm at peak
  // torque, tracking the map's efficient region.
  for (double t : map.torque_nodes)
    map.optimal_speed.push_back(1000.0 +
                                3200.0 * std::pow(t / 115.0, 0.65));

  map.fuel.resize(map.torque_nodes.size() * map.speed_nodes.size(), 0.0);
  for (std::size_t ti = 0; ti < map.torque_nodes.size(); ++ti)
    for (std::size_t wi = 0; wi < map.speed_nodes.size(); ++wi)
      map.fuel[ti * map.speed_nodes.size() + wi] =
          willans_fuel_g_per_s(map.torque_nodes[ti], map.speed_nodes[wi]);

  map.validate();
  return map;
}

void save_engine_map(const EngineMap& map,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << EngineMap::kFormatVersion << "\n";
  char buf[64];
  const auto emit_row = [&](const std::string& name,
                            const std::vector<double>& values) {
    out << name;
    for (double v : values) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    }
    out << "\n";
  };
  emit_row("torque_nodes", map.torque_nodes);
  emit_row("speed_nodes", map.speed_nodes);
  emit_row("optimal_speed", map.optimal_speed);
  for (std::size_t ti = 0; ti < map.torque_nodes.size(); ++ti) {
    out << "fuel";
    for (std::size_t wi = 0; wi < map.speed_nodes.size(); ++wi) {
      std::snprintf(buf, sizeof buf, " %.17g", map.fuel_at(ti, wi));
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

EngineMap load_engine_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("engine map not found: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != EngineMap::kFormatVersion)
    throw ParseError(path.string() + ": bad engine map version line '" + line +
                     "' (expected " + std::string(EngineMap::kFormatVersion) +
                     ")");
  EngineMap map;
  const auto read_values = [&](std::istringstream& ss) {
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    return values;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    auto values = read_values(ss);
    if (key == "torque_nodes") map.torque_nodes = values;
    else if (key == "speed_nodes") map.speed_nodes = values;
    else if (key == "optimal_speed") map.optimal_speed = values;
    else if (key == "fuel")
      map.fuel.insert(map.fuel.end(), values.begin(), values.end());
    else
      throw ParseError(path.string() + ": unknown row '" + key + "'");
  }
  map.validate();
  return map;
}

void PowertrainParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0))
      throw ValidationError(std::string("powertrain: ") + name +
                            " must be positive");
  };
  positive(m_v, "m_v");
  positive(f, "f");
  positive(g, "g");
  positive(rho, "rho");
  positive(A_a, "A_a");
  positive(C_D, "C_D");
  positive(V_oc, "V_oc");
  positive(r_0, "r_0");
  positive(Q_cap_ah, "Q_cap_ah");
  positive(lambda_soc, "lambda_soc");
  positive(eta_drv, "eta_drv");
  positive(eta_regen, "eta_regen");
  if (!(soc_min < soc_ref && soc_ref < soc_max))
    throw ValidationError("powertrain: need soc_min < soc_ref < soc_max");
  if (soc_min < 0.0 || soc_max > 1.0)
    throw ValidationError("powertrain: SOC bounds must lie in [0, 1]");
  if (p_bat_min >= p_bat_max)
    throw ValidationError("powertrain: p_bat_min must be below p_bat_max");
  if (p_bat_max > battery_power_ceiling())
    throw ValidationError(
        "powertrain: p_bat_max exceeds V_oc^2/(4 r_0); battery current would "
        "have no real solution");
  for (const auto* lim : {&motor, &generator}) {
    if (lim->speed_min_rpm >= lim->speed_max_rpm ||
        lim->torque_min_nm >= lim->torque_max_nm)
      throw ValidationError("powertrain: degenerate component limit box");
  }
  engine.validate();
}

PowertrainParams default_powertrain_params() {
  PowertrainParams p;
  p.engine = default_engine_map();
  p.validate();
  return p;
}

double power_request(const PowertrainParams& p, double v, double a) {
  if (v < 0.0 || v > kSpeedMaxMps)
    throw DomainError("power_request: speed " + std::to_string(v) +
                      " outside [0, 45] m/s");
  if (a < -kAccelMaxMps2 || a > kAccelMaxMps2)
    throw DomainError("power_request: accel " + std::to_string(a) +
                      " outside [-5, 5] m/s^2");
  const double p_roll = p.m_v * p.g * p.f * v;
  const double p_aero = 0.5 * p.rho * p.A_a * p.C_D * v * v * v;
  const double p_inertia = p.m_v * a * v;
  return p_roll + p_aero + p_inertia;
}

double battery_current(const PowertrainParams& p, double p_bat_w) {
  if (p_bat_w < p.p_bat_min || p_bat_w > p.p_bat_max)
    throw InfeasiblePowerError("battery power " + std::to_string(p_bat_w) +
                               " W outside [" + std::to_string(p.p_bat_min) +
                               ", " + std::to_string(p.p_bat_max) + "]");
  const double disc = p.V_oc * p.V_oc - 4.0 * p.r_0 * p_bat_w;
  if (disc < 0.0)
    throw InfeasiblePowerError(
        "battery power " + std::to_string(p_bat_w) +
        " W has no real current solution (discriminant < 0)");
  return (p.V_oc - std::sqrt(disc)) / (2.0 * p.r_0);
}

double soc_derivative(const PowertrainParams& p, double p_bat_w) {
  return -battery_current(p, p_bat_w) / p.battery_capacity_coulomb();
}

OperatingPoint engine_operating_point(const EngineMap& map, double t_ice) {
  if (t_ice < map.torque_min() || t_ice > map.torque_max())
    throw DomainError("engine_operating_point: torque " +
                      std::to_string(t_ice) + " Nm outside [0, 115]");
  if (t_ice == 0.0) return {0.0, 0.0, 0.0};
  OperatingPoint op;
  op.w_rpm = optimal_line_speed(map, t_ice);
  op.p_w = t_ice * rpm_to_rad_s(op.w_rpm);
  op.fuel_g_per_s = fuel_rate(map, t_ice, op.w_rpm);
  return op;
}

PowerSplit split_power(const PowertrainParams& p, double p_req_w,
                       double t_ice) {
  const OperatingPoint op = engine_operating_point(p.engine, t_ice);
  PowerSplit split;
  split.p_ice_w = op.p_w;
  const double gap = p_req_w - op.p_w;
  // Discharge covers the shortfall through the driveline; surplus engine
  // power or regen charges with the charging-path efficiency.
  double p_bat = gap >= 0.0 ? gap / p.eta_drv : gap * p.eta_regen;
  if (p_bat < p.p_bat_min) {
    p_bat = p.p_bat_min;  // excess braking energy goes to friction brakes
    split.clamped = true;
  } else if (p_bat > p.p_bat_max) {
    p_bat = p.p_bat_max;
    split.clamped = true;
  }
  split.p_bat_w = p_bat;
  return split;
}

}  // namespace hevems

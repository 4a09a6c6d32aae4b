#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hevems {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kRpmToRadPerS = kPi / 30.0;
inline constexpr double kSecondsPerHour = 3600.0;

inline double rpm_to_rad_s(double rpm) { return rpm * kRpmToRadPerS; }

// Gridded engine fuel map (torque x speed -> g/s) plus the optimal operating
// line used to pick the engine speed for a commanded torque. The map is a
// versioned artifact so downstream numbers are bit-stable.
struct EngineMap {
  static constexpr const char* kFormatVersion = "hevems-engine-map/1";

  std::vector<double> torque_nodes;   // Nm, ascending, [0, 115]
  std::vector<double> speed_nodes;    // rpm, ascending, [1000, 4500]
  std::vector<double> fuel;           // row-major [torque][speed], g/s
  std::vector<double> optimal_speed;  // rpm per torque node, non-decreasing

  double fuel_at(std::size_t ti, std::size_t wi) const {
    return fuel[ti * speed_nodes.size() + wi];
  }

  double torque_min() const { return torque_nodes.front(); }
  double torque_max() const { return torque_nodes.back(); }
  double speed_min() const { return speed_nodes.front(); }
  double speed_max() const { return speed_nodes.back(); }

  // Checks grid shape, value ranges, the zero-torque row, and monotonicity
  // of fuel in torque. Throws ValidationError.
  void validate() const;
};

// Bilinear interpolation on the fuel grid. Zero when the engine is off
// (t_ice == 0 or w_rpm == 0, the idle-stop convention). Off-grid queries
// are DomainErrors.
double fuel_rate(const EngineMap& map, double t_ice, double w_rpm);

// Engine speed on the optimal line for a commanded torque (linear
// interpolation between torque nodes).
double optimal_line_speed(const EngineMap& map, double t_ice);

// Inverse lookup along the optimal line: the (torque, speed) pair whose
// mechanical power matches `power_w`, clamped to the line's power range.
std::pair<double, double> optimal_line_point_for_power(const EngineMap& map,
                                                       double power_w);

// Synthesized Willans-style map: fuel = (P/eta + P_loss)/LHV with efficiency
// peaking near 4200 rpm and mid torque. Deterministic; identical across runs.
EngineMap default_engine_map();

// Tabular artifact format, full-precision round trip.
EngineMap load_engine_map(const std::filesystem::path& path);
void save_engine_map(const EngineMap& map, const std::filesystem::path& path);

struct ComponentLimits {
  double speed_min_rpm = 0.0;
  double speed_max_rpm = 2.0e4;
  double torque_min_nm = -400.0;
  double torque_max_nm = 400.0;
};

// Physical constants of the series-parallel powertrain plus the battery and
// driveline parameters. Defaults hold the studied vehicle's values.
struct PowertrainParams {
  // chassis
  double m_v = 1325.0;   // vehicle mass, kg
  double f = 0.012;      // rolling resistance coefficient
  double g = 9.8;        // gravity, m/s^2
  double rho = 1.225;    // air density, kg/m^3
  double A_a = 2.16;     // frontal area, m^2
  double C_D = 0.26;     // aerodynamic drag coefficient

  // battery (internal-resistance model)
  double V_oc = 150.0;   // open-circuit voltage, V
  double r_0 = 0.25;     // internal resistance, ohm
  double Q_cap_ah = 8.1; // capacity, Ah
  double nominal_voltage = 200.0;  // pack nameplate, metadata only

  // charge-sustaining cost shaping
  double soc_ref = 0.65;
  double lambda_soc = 1000.0;
  double soc_min = 0.3;
  double soc_max = 0.9;

  // component limits
  double p_bat_min = -20000.0;  // W, negative = charging
  double p_bat_max = 20000.0;   // W
  ComponentLimits motor;
  ComponentLimits generator;

  // driveline efficiencies (not vehicle data; configurable)
  double eta_drv = 0.95;
  double eta_regen = 0.90;

  EngineMap engine;

  double battery_capacity_coulomb() const {
    return Q_cap_ah * kSecondsPerHour;
  }
  // Largest battery power with a real-valued current solution.
  double battery_power_ceiling() const { return V_oc * V_oc / (4.0 * r_0); }

  void validate() const;
};

// Params with the studied vehicle's constants and the default engine map.
PowertrainParams default_powertrain_params();

// Wheel power demand: rolling resistance + aerodynamic drag + inertia.
// Negative during deceleration. Bound violations are DomainErrors.
double power_request(const PowertrainParams& p, double v, double a);

// Battery current solving the internal-resistance model for a terminal
// power. Positive = discharge.
double battery_current(const PowertrainParams& p, double p_bat_w);

// d(SOC)/dt for a battery power; negative when discharging.
double soc_derivative(const PowertrainParams& p, double p_bat_w);

struct OperatingPoint {
  double w_rpm = 0.0;
  double p_w = 0.0;
  double fuel_g_per_s = 0.0;
};

// Engine state for a commanded torque: speed from the optimal line, power
// and fuel from the map. Zero torque means engine off.
OperatingPoint engine_operating_point(const EngineMap& map, double t_ice);

struct PowerSplit {
  double p_ice_w = 0.0;
  double p_bat_w = 0.0;
  bool clamped = false;  // battery limit hit; excess handled by friction brakes
};

// Splits the wheel demand between engine (commanded torque) and battery.
// Discharge covers the shortfall through the driveline efficiency; surplus
// or regen charges at the charging efficiency. Battery power is clamped to
// its limits with the clamp reported, never raised.
PowerSplit split_power(const PowertrainParams& p, double p_req_w, double t_ice);

}  // namespace hevems

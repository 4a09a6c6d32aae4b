#pragma once

#include <span>
#include <vector>

#include "hevems/cycles.hpp"
#include "hevems/env.hpp"
#include "hevems/powertrain.hpp"

namespace hevems {

// Discretization of the SOC x torque decision space for the dynamic
// program. SOC nodes span the charge-sustaining window; torque nodes the
// full action band.
struct DpGrid {
  std::vector<double> soc_nodes;
  std::vector<double> torque_nodes;

  void validate() const;
};

DpGrid make_uniform_grid(const PowertrainParams& params, int n_soc,
                         int n_torque);

// Transitions that leave the SOC node range are priced at this finite
// penalty instead of being pruned, keeping the value table total.
inline constexpr double kDpInfeasiblePenalty = 1.0e7;

struct DpSolution {
  double j_backward = 0.0;   // interpolated V_0(soc0) from the value table
  double realized_cost = 0.0;  // forward re-simulation with continuous SOC
  double total_reward = 0.0;   // -(realized_cost)
  double fuel_g = 0.0;
  double terminal_soc = 0.0;
  std::vector<double> torque;  // greedy sequence, one entry per step
  std::vector<TrajectoryRow> trajectory;  // env-identical export rows
};

// Backward value iteration over time x SOC with linear value interpolation
// between nodes, then a greedy forward pass that re-simulates the true
// continuous SOC through the environment dynamics.
DpSolution dp_solve(const PowertrainParams& params, const DrivingCycle& cycle,
                    const DpGrid& grid, double soc0);

struct DpRefineRow {
  int soc_nodes = 0;
  int torque_nodes = 0;
  double j_backward = 0.0;
  double realized_cost = 0.0;
};

// J* as a function of grid resolution; the evidence used to pick a
// reference grid and its error margin.
std::vector<DpRefineRow> dp_refine_study(const PowertrainParams& params,
                                         const DrivingCycle& cycle,
                                         std::span<const int> soc_ladder,
                                         int n_torque, double soc0);

}  // namespace hevems

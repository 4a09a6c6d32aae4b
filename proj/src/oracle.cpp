#include "hevems/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hevems/errors.hpp"

namespace hevems {

void DpGrid::validate() const {
  if (soc_nodes.size() < 2 || torque_nodes.size() < 2)
    throw DomainError("dp grid: needs at least 2 nodes per axis");
  const auto strictly_increasing = [](const std::vector<double>& v) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
      if (!(v[i] < v[i + 1])) return false;
    return true;
  };
  if (!strictly_increasing(soc_nodes) || !strictly_increasing(torque_nodes))
    throw DomainError("dp grid: nodes must be strictly increasing");
}

DpGrid make_uniform_grid(const PowertrainParams& params, int n_soc,
                         int n_torque) {
  if (n_soc < 2 || n_torque < 2)
    throw DomainError("dp grid: needs at least 2 nodes per axis");
  DpGrid grid;
  for (int i = 0; i < n_soc; ++i)
    grid.soc_nodes.push_back(
        i == n_soc - 1 ? params.soc_max
                       : params.soc_min +
                             (params.soc_max - params.soc_min) * i /
                                 (n_soc - 1));
  // The cost-to-go has a kink at soc_ref; pinning it as a node keeps linear
  // interpolation from smearing the penalty onto at-reference states.
  bool have_ref = false;
  for (double s : grid.soc_nodes)
    if (std::abs(s - params.soc_ref) < 1e-12) have_ref = true;
  if (!have_ref && params.soc_ref > params.soc_min &&
      params.soc_ref < params.soc_max) {
    grid.soc_nodes.push_back(params.soc_ref);
    std::sort(grid.soc_nodes.begin(), grid.soc_nodes.end());
  }
  for (int i = 0; i < n_torque; ++i)
    grid.torque_nodes.push_back(115.0 * i / (n_torque - 1));
  grid.validate();
  return grid;
}

namespace {

double interp_value(const std::vector<double>& nodes,
                    const std::vector<double>& values, double x) {
  if (x <= nodes.front()) return values.front();
  if (x >= nodes.back()) return values.back();
  auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - nodes[lo]) / (nodes[hi] - nodes[lo]);
  return values[lo] * (1.0 - w) + values[hi] * w;
}

struct StagePrecompute {
  // per (step, torque-node): SOC increment and fuel grams for one dt
  std::vector<double> dsoc;
  std::vector<double> fuel_g;
};

StagePrecompute precompute_stages(const PowertrainParams& params,
                                  const DrivingCycle& cycle,
                                  const std::vector<double>& torque_nodes) {
  const std::size_t steps = cycle.length();
  const std::size_t na = torque_nodes.size();
  StagePrecompute pre;
  pre.dsoc.resize(steps * na);
  pre.fuel_g.resize(steps * na);
  for (std::size_t t = 0; t < steps; ++t) {
    const double p_req =
        power_request(params, cycle.speed[t], cycle.accel[t]);
    for (std::size_t k = 0; k < na; ++k) {
      const double torque = torque_nodes[k];
      const PowerSplit split = split_power(params, p_req, torque);
      pre.dsoc[t * na + k] = soc_derivative(params, split.p_bat_w) * cycle.dt;
      pre.fuel_g[t * na + k] =
          engine_operating_point(params.engine, torque).fuel_g_per_s *
          cycle.dt;
    }
  }
  return pre;
}

}  // namespace

DpSolution dp_solve(const PowertrainParams& params, const DrivingCycle& cycle,
                    const DpGrid& grid, double soc0) {
  params.validate();
  grid.validate();
  if (cycle.length() == 0) throw DomainError("dp_solve: empty cycle");
  validate_cycle(cycle);
  if (soc0 < grid.soc_nodes.front() || soc0 > grid.soc_nodes.back())
    throw DomainError("dp_solve: soc0 outside the SOC node range");

  const std::size_t steps = cycle.length();
  const std::size_t ns = grid.soc_nodes.size();
  const std::size_t na = grid.torque_nodes.size();
  const double grid_lo = grid.soc_nodes.front();
  const double grid_hi = grid.soc_nodes.back();
  const double tol = 1e-9;

  const StagePrecompute pre = precompute_stages(params, cycle, grid.torque_nodes);

  // Stage cost as the environment prices it: fuel plus the quadratic
  // charge-sustaining penalty on the post-step SOC (clamped to [0, 1]).
  const auto stage_cost = [&](std::size_t t, std::size_t k, double soc,
                              double* soc_next_out) {
    double soc_next = soc + pre.dsoc[t * na + k];
    soc_next = std::clamp(soc_next, 0.0, 1.0);
    double cost = pre.fuel_g[t * na + k];
    if (soc_next < params.soc_ref) {
      const double d = soc_next - params.soc_ref;
      cost += params.lambda_soc * d * d * cycle.dt;
    }
    if (soc_next < grid_lo - tol || soc_next > grid_hi + tol)
      cost += kDpInfeasiblePenalty;
    *soc_next_out = std::clamp(soc_next, grid_lo, grid_hi);
    return cost;
  };

  // Backward sweep, keeping every time slice for the forward pass. Memory is
  // steps * ns doubles, fine at the grid sizes used here.
  std::vector<std::vector<double>> tables(steps + 1,
                                          std::vector<double>(ns, 0.0));
  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t i = 0; i < ns; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < na; ++k) {
        double soc_next = 0.0;
        const double cost = stage_cost(t, k, grid.soc_nodes[i], &soc_next);
        const double q =
            cost + interp_value(grid.soc_nodes, tables[t + 1], soc_next);
        if (q < best) best = q;
      }
      tables[t][i] = best;
    }
  }

  DpSolution solution;
  solution.j_backward = interp_value(grid.soc_nodes, tables[0], soc0);

  // Forward greedy pass against the value table, re-simulating the true
  // continuous SOC through the environment.
  Env env(params, cycle);
  Observation obs = env.reset(soc0);
  solution.torque.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    double best_q = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < na; ++k) {
      double soc_next = 0.0;
      const double cost = stage_cost(t, k, obs.soc, &soc_next);
      const double q =
          cost + interp_value(grid.soc_nodes, tables[t + 1], soc_next);
      if (q < best_q) {
        best_q = q;
        best_k = k;
      }
    }
    const double torque = grid.torque_nodes[best_k];
    const StepResult sr = env.step(torque);
    solution.trajectory.push_back(TrajectoryRow{
        static_cast<double>(t) * cycle.dt, obs.v, obs.a, obs.soc, torque,
        sr.info.p_req_w, sr.info.p_ice_w, sr.info.p_bat_w, sr.info.fuel_g,
        sr.reward});
    solution.torque.push_back(torque);
    solution.fuel_g += sr.info.fuel_g;
    solution.total_reward += sr.reward;
    obs = sr.obs;
  }
  solution.realized_cost = -solution.total_reward;
  solution.terminal_soc = env.state().soc;
  return solution;
}

std::vector<DpRefineRow> dp_refine_study(const PowertrainParams& params,
                                         const DrivingCycle& cycle,
                                         std::span<const int> soc_ladder,
                                         int n_torque, double soc0) {
  if (soc_ladder.empty())
    throw DomainError("dp_refine_study: empty resolution ladder");
  for (std::size_t i = 0; i + 1 < soc_ladder.size(); ++i)
    if (soc_ladder[i] >= soc_ladder[i + 1])
      throw DomainError("dp_refine_study: ladder must be increasing");
  std::vector<DpRefineRow> rows;
  for (int n_soc : soc_ladder) {
    const DpGrid grid = make_uniform_grid(params, n_soc, n_torque);
    const DpSolution sol = dp_solve(params, cycle, grid, soc0);
    rows.push_back(DpRefineRow{n_soc, n_torque, sol.j_backward,
                               sol.realized_cost});
  }
  return rows;
}

}  // namespace hevems

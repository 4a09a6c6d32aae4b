#include <doctest.h>

#include <cmath>
#include <vector>

#include "hevems/errors.hpp"
#include "hevems/oracle.hpp"
#include "test_util.hpp"

using namespace hevems;

namespace {

DrivingCycle fixed_cycle(std::vector<double> speed) {
  DrivingCycle c;
  c.id = "fixed";
  c.speed = std::move(speed);
  c.accel = derive_accel(c.speed, 1.0);
  return c;
}

// Exhaustive search over every torque-node sequence, pricing each through
// the environment; independent of the value-iteration code path.
double enumerate_min_cost(const PowertrainParams& params,
                          const DrivingCycle& cycle,
                          const std::vector<double>& torque_nodes,
                          double soc0) {
  const std::size_t steps = cycle.length();
  const std::size_t na = torque_nodes.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < steps; ++i) total *= na;

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < total; ++code) {
    Env env(params, cycle);
    env.reset(soc0);
    std::size_t rest = code;
    double cost = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      cost += -env.step(torque_nodes[rest % na]).reward;
      rest /= na;
    }
    best = std::min(best, cost);
  }
  return best;
}

}  // namespace

TEST_CASE("dp grids validate their axes") {
  const PowertrainParams params = default_powertrain_params();
  const DpGrid grid = make_uniform_grid(params, 5, 4);
  CHECK(grid.soc_nodes.front() == params.soc_min);
  CHECK(grid.soc_nodes.back() == params.soc_max);
  CHECK(grid.torque_nodes.front() == 0.0);
  CHECK(grid.torque_nodes.back() == 115.0);

  DpGrid bad = grid;
  bad.soc_nodes[1] = bad.soc_nodes[0];
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_THROWS_AS(make_uniform_grid(params, 1, 4), DomainError);
}

TEST_CASE("zero-demand cycle solves to zero cost with the engine off") {
  const PowertrainParams params = default_powertrain_params();
  const DrivingCycle idle = fixed_cycle(std::vector<double>(30, 0.0));
  const DpGrid grid = make_uniform_grid(params, 21, 6);
  const DpSolution sol = dp_solve(params, idle, grid, 0.65);
  CHECK(sol.j_backward == 0.0);
  CHECK(sol.realized_cost == 0.0);
  for (double t : sol.torque) CHECK(t == 0.0);
}

TEST_CASE("a single paying decision reduces to the one-step minimum") {
  const PowertrainParams params = default_powertrain_params();
  // Deceleration then standstill: the second step is free at zero torque and
  // every first-step torque only adds charge, so J* is the cheapest first
  // stage. That minimum is computed per torque node through the env.
  const DrivingCycle cycle = fixed_cycle({4.9, 0.0});
  const DpGrid grid = make_uniform_grid(params, 11, 5);
  const DpSolution sol = dp_solve(params, cycle, grid, 0.65);

  double expected = std::numeric_limits<double>::infinity();
  for (double torque : grid.torque_nodes) {
    Env env(params, cycle);
    env.reset(0.65);
    expected = std::min(expected, -env.step(torque).reward);
  }
  CHECK(sol.realized_cost == expected);
  CHECK(sol.j_backward == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("micro instances match exhaustive enumeration exactly") {
  const PowertrainParams params = default_powertrain_params();

  // SOC nodes bracket the few-step reachable tube around the reference so
  // the value table is trustworthy even at three nodes.
  const struct {
    std::vector<double> speed;
    double soc0;
    std::vector<double> soc_nodes;
    int n_torque;
  } cases[] = {
      {{0.0, 5.0, 9.0}, 0.65, {0.62, 0.65, 0.68}, 3},
      {{10.0, 12.0, 8.0}, 0.65, {0.62, 0.65, 0.68}, 2},
      {{2.0, 3.0, 2.5}, 0.647, {0.64, 0.65, 0.66}, 3},
      {{15.0, 10.0, 5.0, 0.0, 0.0}, 0.66, {0.62, 0.65, 0.69}, 2},
      {{2.0, 2.0, 2.0}, 0.652, {0.63, 0.67}, 3},
  };
  for (const auto& c : cases) {
    const DrivingCycle cycle = fixed_cycle(c.speed);
    DpGrid grid;
    grid.soc_nodes = c.soc_nodes;
    for (int i = 0; i < c.n_torque; ++i)
      grid.torque_nodes.push_back(115.0 * i / (c.n_torque - 1));
    const DpSolution sol = dp_solve(params, cycle, grid, c.soc0);
    const double expected =
        enumerate_min_cost(params, cycle, grid.torque_nodes, c.soc0);
    CHECK(sol.realized_cost == expected);  // same arithmetic, bit equal
  }
}

TEST_CASE("forward pass cost equals the environment rollout of its torques") {
  const PowertrainParams params = default_powertrain_params();
  const DrivingCycle cycle = synthesize_cycle(13, 120, CycleProfile::kUrban);
  const DpGrid grid = make_uniform_grid(params, 41, 8);
  const DpSolution sol = dp_solve(params, cycle, grid, 0.65);

  Env env(params, cycle);
  std::size_t t = 0;
  const Policy replay = [&](const Observation&, Rng&) {
    return sol.torque[t++];
  };
  const RolloutResult r = rollout(env, replay, 0.65, 1.0, 0);
  CHECK(sol.realized_cost == doctest::Approx(-r.total_reward).epsilon(1e-12));
  CHECK(sol.realized_cost >= 0.0);
  // the interpolated backward value should sit near the realized cost
  CHECK(sol.j_backward ==
        doctest::Approx(sol.realized_cost).epsilon(0.25));
}

TEST_CASE("refinement ladder emits one row per rung and converges") {
  const PowertrainParams params = default_powertrain_params();
  const DrivingCycle cycle = synthesize_cycle(17, 90, CycleProfile::kUrban);
  const std::vector<int> ladder = {11, 21};
  const auto rows = dp_refine_study(params, cycle, ladder, 6, 0.65);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].soc_nodes == 11);
  CHECK(rows[1].soc_nodes == 21);
  for (const auto& r : rows) CHECK(r.realized_cost >= 0.0);

  CHECK_THROWS_AS(
      dp_refine_study(params, cycle, std::vector<int>{21, 11}, 6, 0.65),
      DomainError);
}

TEST_CASE("dp_solve rejects bad inputs") {
  const PowertrainParams params = default_powertrain_params();
  const DpGrid grid = make_uniform_grid(params, 5, 4);
  DrivingCycle empty;
  empty.id = "empty";
  CHECK_THROWS_AS(dp_solve(params, empty, grid, 0.65), DomainError);
  const DrivingCycle cycle = fixed_cycle({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(dp_solve(params, cycle, grid, 0.1), DomainError);
}

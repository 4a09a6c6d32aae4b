// Acceptance suite: runs every criterion end to end and prints one PASS/FAIL
// line per criterion. Exit status is the number of failed criteria.
//
// Usage: acceptance [path-to-hevems-cli]
// The CLI path enables the artifact-determinism criterion; without it that
// criterion fails explicitly rather than silently passing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hevems/config.hpp"
#include "hevems/cycles.hpp"
#include "hevems/env.hpp"
#include "hevems/net.hpp"
#include "hevems/oracle.hpp"
#include "hevems/powertrain.hpp"
#include "hevems/ppo.hpp"
#include "hevems/rng.hpp"
#include "hevems/transfer.hpp"

namespace {

using namespace hevems;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
};

int g_failures = 0;

template <typename Fn>
void criterion(int id, const std::string& name, Fn&& fn) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail += std::string(" exception: ") + e.what();
  }
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (!out.pass) ++g_failures;
  std::printf("%s  %2d %-22s (%.1fs)%s\n", out.pass ? "PASS" : "FAIL", id,
              name.c_str(), out.seconds,
              out.detail.empty() ? "" : (" |" + out.detail).c_str());
  std::fflush(stdout);
}

void expect(Outcome& out, bool cond, const std::string& what) {
  if (!cond) {
    out.pass = false;
    out.detail += " FAILED:" + what;
  }
}

void note(Outcome& out, const std::string& what) { out.detail += " " + what; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// The desk-scale reproduction cycle shared by the training criteria.
DrivingCycle urban300() {
  return synthesize_cycle(101, 300, CycleProfile::kUrban);
}

// Training configuration for the PPO-vs-oracle quality gate. The learning
// hyperparameters follow the defaults except for the discount: comparing
// against an undiscounted DP cost needs a long credit horizon, otherwise the
// persistent below-reference penalty is discounted away and the comparison
// measures the discount mismatch, not implementation quality.
Hyperparams quality_hyper() {
  Hyperparams h;
  h.gamma = 0.995;
  h.n_iterations = 300;
  return h;
}

// Paper-default hyperparameters for the transfer criteria.
Hyperparams transfer_student_hyper() {
  Hyperparams h;
  h.n_iterations = 1000;   // episode budget stops it first
  h.episode_budget = 100;
  return h;
}

Hyperparams transfer_expert_hyper() {
  Hyperparams h;
  h.n_iterations = 300;
  return h;
}

double spearman_rank_correlation(std::vector<double> x, std::vector<double> y) {
  const auto ranks = [](std::vector<double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = k + 1.0;
    return r;
  };
  const std::vector<double> rx = ranks(std::move(x));
  const std::vector<double> ry = ranks(std::move(y));
  const double n = static_cast<double>(rx.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i)
    d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------

void c1_physics(Outcome& out) {
  PowertrainParams p = default_powertrain_params();

  expect(out, power_request(p, 0, 0) == 0.0, "power_request(0,0)=0");
  const double pr10 = power_request(p, 10, 0);
  expect(out, std::abs(pr10 - 1902.18) / 1902.18 <= 1e-6,
         "power_request(10,0)=1902.18");
  const double inertia = power_request(p, 10, 1) - pr10;
  expect(out, std::abs(inertia - 13250.0) / 13250.0 <= 1e-6,
         "inertia term 13250");

  PowertrainParams ceil = p;
  ceil.p_bat_max = ceil.battery_power_ceiling();
  expect(out, soc_derivative(ceil, 0.0) == 0.0, "soc_derivative(0)=0");
  const double dsoc = soc_derivative(ceil, 22500.0);
  expect(out, std::abs(dsoc - (-150.0 / 14580.0)) <= 1e-9,
         "soc_derivative at discriminant zero");
  const double i300 = battery_current(ceil, 22500.0);
  expect(out, std::abs(i300 - 300.0) / 300.0 <= 1e-6, "I(22500)=300");

  Rng rng(7);
  for (int k = 0; k < 2000; ++k) {
    const double p_bat = rng.uniform(p.p_bat_min, p.p_bat_max);
    const double i = battery_current(p, p_bat);
    const double u = p.V_oc - i * p.r_0;
    expect(out,
           std::abs(u * i - p_bat) <= 1e-6 * std::max(1.0, std::abs(p_bat)),
           "P=U*I identity");
    if (!out.pass) break;
  }
}

void c2_gradient(Outcome& out) {
  const NetLayout layout{{3, 3, 2}, "tanh"};
  PolicyParams actor = init_params(layout, 2001);
  Rng rng(71);
  std::vector<PpoSample> batch;
  for (int i = 0; i < 10; ++i) {
    const Observation obs{rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1)};
    const PolicyOutput po = forward(actor, obs);
    const ActionSample a = sample_action(po, rng);
    batch.push_back(
        PpoSample{obs, a.t_ice, rng.normal(), a.log_prob, rng.normal()});
  }
  PolicyParams params = actor;
  for (double& w : params.flat) w += 0.03 * rng.normal();

  std::vector<double> grad;
  ppo_loss(params, batch, 0.2, 0.5, 0.01, &grad);
  const auto loss_at = [&](std::size_t idx, double delta) {
    PolicyParams probe = params;
    probe.flat[idx] += delta;
    return ppo_loss(probe, batch, 0.2, 0.5, 0.01, nullptr).objective;
  };

  const double h = 1e-5;
  int checked = 0;
  double worst = 0.0;
  std::size_t idx = 0;
  while (checked < 20) {
    idx = (idx + 1 + rng.uniform_int(params.flat.size() - 1)) %
          params.flat.size();
    const double fd = (loss_at(idx, h) - loss_at(idx, -h)) / (2 * h);
    if (std::max(std::abs(fd), std::abs(grad[idx])) < 1e-7) continue;
    const double rel = std::abs(fd - grad[idx]) /
                       std::max({std::abs(fd), std::abs(grad[idx]), 1e-8});
    worst = std::max(worst, rel);
    ++checked;
  }
  note(out, "worst rel err " + fmt(worst));
  expect(out, worst <= 1e-4, "finite-difference agreement 1e-4");
}

void c3_gae(Outcome& out) {
  Rng rng(501);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int horizon = 16 + static_cast<int>(rng.uniform_int(49));
    RolloutBuffer buffer;
    buffer.n_actors = 1;
    buffer.horizon = horizon;
    for (int t = 0; t < horizon; ++t) {
      buffer.obs.push_back(Observation{});
      buffer.action.push_back(0.0);
      buffer.reward.push_back(rng.normal());
      buffer.value.push_back(rng.normal());
      buffer.log_prob.push_back(0.0);
      buffer.done.push_back(rng.uniform() < 0.15 ? 1 : 0);
    }
    buffer.bootstrap_value.push_back(rng.normal());
    const double gamma = rng.uniform(0.5, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    compute_gae(buffer, gamma, lambda);

    // direct truncated summation, O(K^2)
    for (int t = 0; t < horizon; ++t) {
      double sum = 0.0, weight = 1.0;
      for (int j = t; j < horizon; ++j) {
        const bool terminal = buffer.done[j] != 0;
        const double next_value =
            terminal ? 0.0
                     : (j == horizon - 1 ? buffer.bootstrap_value[0]
                                         : buffer.value[j + 1]);
        const double delta =
            buffer.reward[j] + gamma * next_value - buffer.value[j];
        sum += weight * delta;
        if (terminal) break;
        weight *= gamma * lambda;
      }
      worst = std::max(worst, std::abs(sum - buffer.advantage_raw[t]));
    }
  }
  note(out, "max abs diff " + fmt(worst));
  expect(out, worst <= 1e-12, "recursive vs direct GAE 1e-12");
}

void c4_clip(Outcome& out) {
  expect(out, clipped_objective(1.5, 1.0, 0.2) == 1.0 + 0.2,
         "(1.5,1,0.2)->1.2");
  expect(out, clipped_objective(0.5, -1.0, 0.2) == -(1.0 - 0.2),
         "(0.5,-1,0.2)->-0.8");
  Rng check(11);
  for (int i = 0; i < 50; ++i) {
    const double adv = check.normal() * 2.0;
    expect(out, clipped_objective(1.0, adv, 0.2) == adv, "(1,A)->A");
  }
  Rng rng(12);
  for (int i = 0; i < 100000; ++i) {
    const double r = rng.uniform(0.0, 3.0);
    const double adv = rng.normal() * 3.0;
    const double eps = rng.uniform(0.01, 0.5);
    if (clipped_objective(r, adv, eps) > r * adv) {
      expect(out, false, "clipped exceeds unclipped");
      break;
    }
  }
}

void c5_dp(Outcome& out) {
  const PowertrainParams params = default_powertrain_params();

  // exhaustive enumeration on micro instances
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
    DrivingCycle cycle;
    cycle.id = "micro";
    cycle.speed = c.speed;
    cycle.accel = derive_accel(cycle.speed, 1.0);
    DpGrid grid;
    grid.soc_nodes = c.soc_nodes;
    for (int i = 0; i < c.n_torque; ++i)
      grid.torque_nodes.push_back(115.0 * i / (c.n_torque - 1));

    const DpSolution sol = dp_solve(params, cycle, grid, c.soc0);

    double best = std::numeric_limits<double>::infinity();
    std::size_t total = 1;
    for (std::size_t i = 0; i < cycle.length(); ++i)
      total *= grid.torque_nodes.size();
    for (std::size_t code = 0; code < total; ++code) {
      Env env(params, cycle);
      env.reset(c.soc0);
      std::size_t rest = code;
      double cost = 0.0;
      for (std::size_t t = 0; t < cycle.length(); ++t) {
        cost += -env.step(grid.torque_nodes[rest % grid.torque_nodes.size()])
                     .reward;
        rest /= grid.torque_nodes.size();
      }
      best = std::min(best, cost);
    }
    expect(out, sol.realized_cost == best, "micro enumeration equality");
  }

  // refinement stability on the 300 s urban cycle
  const DrivingCycle cycle = urban300();
  const std::vector<int> ladder = {51, 101, 201, 401};
  const auto rows = dp_refine_study(params, cycle, ladder, 24, 0.65);
  const double last = rows.back().realized_cost;
  const double prev = rows[rows.size() - 2].realized_cost;
  const double rel = std::abs(last - prev) / std::max(1e-12, last);
  std::string ladder_str;
  for (const auto& r : rows) ladder_str += " " + fmt(r.realized_cost);
  note(out, "ladder realized:" + ladder_str + "; finest delta " + fmt(rel));
  expect(out, rel <= 0.01, "two finest rungs within 1%");
}

// Shared state between criteria 6 and 10 (same training runs).
struct QualityRuns {
  double j_star = 0.0;
  double margin = 0.0;
  std::vector<double> costs;          // per seed
  std::vector<double> terminal_socs;  // per seed
  bool ran = false;
};
QualityRuns g_quality;

void run_quality_training() {
  if (g_quality.ran) return;
  g_quality.ran = true;
  const PowertrainParams params = default_powertrain_params();
  const DrivingCycle cycle = urban300();

  const auto rows =
      dp_refine_study(params, cycle, std::vector<int>{101, 201, 401}, 24,
                      0.65);
  const DpGrid fine_torque = make_uniform_grid(params, 401, 48);
  const DpSolution torque_ref = dp_solve(params, cycle, fine_torque, 0.65);
  g_quality.j_star = rows.back().realized_cost;
  // Grid margin: SOC-resolution movement plus torque-resolution movement,
  // padded with 2% of J*; a trained policy may legitimately undercut the
  // discretized oracle by at most this much.
  g_quality.margin =
      std::abs(rows.back().realized_cost - rows[rows.size() - 2].realized_cost) +
      std::abs(torque_ref.realized_cost - rows.back().realized_cost) +
      0.02 * rows.back().realized_cost;

  const Hyperparams hyper = quality_hyper();
  const NetLayout layout;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PolicyParams init = init_params(layout, seed);
    const TrainResult trained = train(hyper, params, {cycle}, init, seed);
    Env env(params, cycle);
    const RolloutResult ev =
        rollout(env, mean_policy(trained.params), params.soc_ref, 1.0, 0);
    g_quality.costs.push_back(-ev.total_reward);
    g_quality.terminal_socs.push_back(ev.terminal_soc);
  }
}

void c6_ppo_vs_oracle(Outcome& out) {
  run_quality_training();
  note(out, "J* " + fmt(g_quality.j_star) + " margin " +
                fmt(g_quality.margin));
  int within = 0;
  for (double cost : g_quality.costs) {
    note(out, fmt(cost / g_quality.j_star) + "x");
    if (cost <= 1.25 * g_quality.j_star) ++within;
    expect(out, cost >= g_quality.j_star - g_quality.margin,
           "policy beats refined DP beyond the grid margin");
  }
  expect(out, within >= 4, "within 25% of J* on 4 of 5 seeds (" +
                               std::to_string(within) + "/5)");
}

void c10_charge_sustaining(Outcome& out) {
  run_quality_training();
  const PowertrainParams params = default_powertrain_params();
  int in_band = 0;
  for (double soc : g_quality.terminal_socs) {
    note(out, fmt(soc));
    if (soc >= params.soc_ref - 0.1 && soc <= params.soc_max) ++in_band;
  }
  expect(out, in_band >= 4, "terminal SOC in [ref-0.1, soc_max] on 4/5 seeds (" +
                                std::to_string(in_band) + "/5)");
}

// Shared state between criteria 7 and 8 (same paired runs).
struct TransferRuns {
  ExperimentReport report;
  bool ran = false;
};
TransferRuns g_transfer;

void run_transfer_experiment() {
  if (g_transfer.ran) return;
  g_transfer.ran = true;
  const PowertrainParams params = default_powertrain_params();

  std::vector<DrivingCycle> pool;
  for (std::uint64_t s = 201; s <= 204; ++s)
    pool.push_back(synthesize_cycle(s, 300, CycleProfile::kUrban));
  pool.push_back(urban300());  // the target
  const std::vector<std::string> targets = {pool.back().id};

  const CyclePartition part = make_partition(pool, 5, targets, true);
  const NetLayout layout;
  const Checkpoint expert =
      train_expert(params, pool, part.source, transfer_expert_hyper(), layout,
                   9001);
  g_transfer.report =
      run_tl_vs_no_tl(params, pool, targets, expert, transfer_student_hyper(),
                      layout, {1, 2, 3, 4, 5});
}

void c7_transfer_head_start(Outcome& out) {
  run_transfer_experiment();
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double cold = 0.0, warm = 0.0;
    for (const auto& row : g_transfer.report.rows) {
      if (row.seed != seed) continue;
      (row.mode == "cold" ? cold : warm) = row.mean_first5_reward;
    }
    note(out, fmt(warm - cold));
    if (warm > cold) ++wins;
  }
  expect(out, wins >= 4, "warm first-5-episode reward above cold on 4/5 "
                         "paired seeds (" + std::to_string(wins) + "/5)");
}

void c8_transfer_value_loss(Outcome& out) {
  run_transfer_experiment();
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double cold = 0.0, warm = 0.0;
    for (const auto& row : g_transfer.report.rows) {
      if (row.seed != seed) continue;
      (row.mode == "cold" ? cold : warm) = row.first_value_loss;
    }
    note(out, fmt(warm) + "<" + fmt(cold));
    if (warm < cold) ++wins;
  }
  expect(out, wins >= 4, "warm first value-loss below cold on 4/5 paired "
                         "seeds (" + std::to_string(wins) + "/5)");
}

void c9_source_count_trend(Outcome& out) {
  const PowertrainParams params = default_powertrain_params();
  std::vector<DrivingCycle> pool;
  for (std::uint64_t s = 301; s <= 308; ++s)
    pool.push_back(synthesize_cycle(s, 300, CycleProfile::kUrban));
  pool.push_back(urban300());
  const std::vector<std::string> targets = {pool.back().id};

  Hyperparams expert_hyper = transfer_expert_hyper();
  expert_hyper.n_iterations = 150;
  Hyperparams student_hyper = transfer_student_hyper();
  student_hyper.episode_budget = 20;  // short fine-tune keeps the expert's
                                      // quality visible in the outcome
  student_hyper.n_iterations = 1000;

  const std::vector<int> counts = {2, 4, 8};
  const ExperimentReport report = run_ablation_source_count(
      params, pool, counts, targets, expert_hyper, student_hyper, NetLayout{},
      {1, 2, 3, 4, 5});

  std::vector<double> xs, ys;
  std::printf("      source-count table (mean final target reward over "
              "5 seeds):\n");
  for (int count : counts) {
    double mean = 0.0;
    int n = 0;
    for (const auto& row : report.rows)
      if (row.label == "count=" + std::to_string(count)) {
        mean += row.final_reward;
        ++n;
      }
    mean /= std::max(1, n);
    std::printf("        count=%d  mean_final_reward=%.4f  (n=%d)\n", count,
                mean, n);
    xs.push_back(count);
    ys.push_back(mean);
  }
  const double rho = spearman_rank_correlation(xs, ys);
  note(out, "spearman rho " + fmt(rho));
  expect(out, rho >= 0.0, "non-negative rank correlation");
}

std::string g_cli_path;

int run_cli(const std::string& args, const fs::path& out_dir) {
  const std::string cmd = "HEVEMS_OUT=" + out_dir.string() + " " +
                          g_cli_path + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

void c11_determinism(Outcome& out) {
  if (g_cli_path.empty()) {
    expect(out, false, "CLI path not provided on the command line");
    return;
  }
  const fs::path base =
      fs::temp_directory_path() / "hevems-acceptance-determinism";
  fs::remove_all(base);
  fs::create_directories(base);

  // tiny but non-trivial run config exercising training + cycles + oracle
  const fs::path cfg = base / "config.json";
  {
    std::ofstream f(cfg);
    f << R"({
  "seed": 5,
  "hyper": {"n_actors_m": 2, "horizon_k": 64, "minibatch_z": 32,
             "n_epochs": 2, "n_iterations": 3},
  "cycles": {"synth": [
    {"seed": 1, "duration_s": 120, "profile": "urban"},
    {"seed": 2, "duration_s": 120, "profile": "urban"}]},
  "partition": {"n_source": 2},
  "experiment": {"seeds": [1, 2], "episode_budget": 2,
                  "expert_iterations": 2, "student_iterations": 4},
  "oracle": {"soc_nodes": 51, "torque_nodes": 8, "ladder": [11, 21]}
})";
  }

  const auto compare = [&](const std::string& args,
                           const std::vector<std::string>& artifacts,
                           const std::string& label) {
    const fs::path d1 = base / (label + "-1");
    const fs::path d2 = base / (label + "-2");
    fs::create_directories(d1);
    fs::create_directories(d2);
    expect(out, run_cli(args, d1) == 0, label + " run 1 exits 0");
    expect(out, run_cli(args, d2) == 0, label + " run 2 exits 0");
    for (const auto& name : artifacts) {
      const std::string a = read_file(d1 / name);
      const std::string b = read_file(d2 / name);
      expect(out, !a.empty() && a == b, label + ": " + name + " bit-identical");
    }
  };

  compare("cycles synth --seed 9 --duration 120 --profile suburban -o " +
              (base / "s1.csv").string(),
          {}, "synth");
  // synth writes one explicit file; compare directly
  expect(out,
         run_cli("cycles synth --seed 9 --duration 120 --profile suburban -o " +
                     (base / "s2.csv").string(),
                 base) == 0,
         "second synth exits 0");
  expect(out,
         read_file(base / "s1.csv") == read_file(base / "s2.csv") &&
             !read_file(base / "s1.csv").empty(),
         "synth CSV bit-identical");

  compare("train -c " + cfg.string(),
          {"checkpoint.json", "training_log.csv", "manifest.json"}, "train");
  compare("transfer -c " + cfg.string(),
          {"tl_report.csv", "expert_checkpoint.json", "manifest.json"},
          "transfer");
  compare("oracle solve -c " + cfg.string() + " --soc0 0.65",
          {"manifest.json"}, "oracle");
  // oracle trajectory file name depends on the cycle id; compare whole dirs
  for (const auto& entry :
       fs::directory_iterator(base / "oracle-1")) {
    const fs::path other = base / "oracle-2" / entry.path().filename();
    expect(out, read_file(entry.path()) == read_file(other),
           "oracle artifact " + entry.path().filename().string());
  }
  fs::remove_all(base);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];

  std::printf("hevems acceptance suite\n");
  criterion(1, "physics-exactness", c1_physics);
  criterion(2, "gradient-correctness", c2_gradient);
  criterion(3, "gae-oracle", c3_gae);
  criterion(4, "clip-semantics", c4_clip);
  criterion(5, "dp-oracle-validity", c5_dp);
  criterion(6, "ppo-vs-oracle", c6_ppo_vs_oracle);
  criterion(7, "transfer-head-start", c7_transfer_head_start);
  criterion(8, "transfer-value-loss", c8_transfer_value_loss);
  criterion(9, "source-count-trend", c9_source_count_trend);
  criterion(10, "charge-sustaining", c10_charge_sustaining);
  criterion(11, "artifact-determinism", c11_determinism);

  if (g_failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criteria FAILED\n", g_failures);
  return g_failures;
}

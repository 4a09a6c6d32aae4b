"""Smoke tests for the python bindings; the heavy coverage lives in C++."""

import math

import pytest

import hevems


@pytest.fixture(scope="module")
def params():
    return hevems.default_powertrain_params()


def test_power_request_hand_value(params):
    # 1325*9.8*0.012*10 + 0.5*1.225*2.16*0.26*1000
    assert hevems.power_request(params, 10.0, 0.0) == pytest.approx(
        1902.18, rel=1e-6
    )
    assert hevems.power_request(params, 0.0, 0.0) == 0.0


def test_battery_identity(params):
    i = hevems.battery_current(params, 5000.0)
    u = params.V_oc - i * params.r_0
    assert u * i == pytest.approx(5000.0, rel=1e-9)
    assert hevems.soc_derivative(params, 5000.0) < 0.0
    assert hevems.soc_derivative(params, -5000.0) > 0.0


def test_engine_map(params):
    assert hevems.fuel_rate(params, 0.0, 2000.0) == 0.0
    op = hevems.engine_operating_point(params, 115.0)
    assert op.w_rpm == pytest.approx(4200.0)
    assert op.p_w == pytest.approx(115.0 * 4200.0 * 2.0 * math.pi / 60.0)


def test_cycle_synthesis_and_partition():
    cycles = [hevems.synthesize_cycle(seed=s, duration_s=120) for s in (1, 2, 3)]
    assert all(len(c) == 120 for c in cycles)
    assert all(0.0 <= v <= 45.0 for v in cycles[0].speed)
    part = hevems.make_partition(cycles, 2, [cycles[2].id], True)
    assert cycles[2].id in part.source
    assert part.includes_target_in_source


def test_env_step_and_rollout(params):
    cycle = hevems.synthesize_cycle(seed=4, duration_s=90)
    env = hevems.Env(params, cycle)
    obs = env.reset(0.65)
    assert obs.soc == 0.65
    step = env.step(20.0)
    assert step.reward <= 0.0

    result = hevems.rollout(params, cycle, lambda obs: 10.0, soc0=0.65)
    assert result.total_reward <= 0.0
    assert len(result.trajectory) == len(cycle)


def test_training_and_transfer_roundtrip(params, tmp_path):
    pool = [hevems.synthesize_cycle(seed=s, duration_s=60) for s in (1, 2)]
    layout = hevems.NetLayout(hidden=[8, 8])
    hyper = hevems.Hyperparams()
    hyper.n_actors_m = 1
    hyper.horizon_k = 30
    hyper.minibatch_z = 10
    hyper.n_epochs = 2
    hyper.n_iterations = 2

    ckpt_path = tmp_path / "expert.json"
    expert = hevems.train_expert(
        params, pool, [pool[0].id], hyper, layout, seed=7, save_path=ckpt_path
    )
    assert ckpt_path.exists()
    assert expert.meta.source_cycles == [pool[0].id]

    frozen = hevems.Hyperparams()
    for field in (
        "n_actors_m",
        "horizon_k",
        "minibatch_z",
        "n_epochs",
    ):
        setattr(frozen, field, getattr(hyper, field))
    frozen.n_iterations = 0
    student = hevems.warm_start(expert, layout, params, [pool[1]], frozen, seed=9)
    assert list(student.params.flat) == list(expert.params.flat)

    evald = hevems.rollout_mean_policy(params, pool[1], student.params)
    assert evald.total_reward <= 0.0


def test_dp_oracle_zero_demand(params):
    idle = hevems.DrivingCycle("idle", [0.0] * 20)
    grid = hevems.make_uniform_grid(params, 11, 4)
    sol = hevems.dp_solve(params, idle, grid, 0.65)
    assert sol.j_backward == 0.0
    assert sol.realized_cost == 0.0
    assert all(t == 0.0 for t in sol.torque)


def test_validation_errors(params):
    with pytest.raises(ValueError):
        hevems.DrivingCycle("bad", [0.0, 50.0])
    env = hevems.Env(params, hevems.synthesize_cycle(seed=1, duration_s=60))
    env.reset(0.65)
    with pytest.raises(ValueError):
        env.step(200.0)

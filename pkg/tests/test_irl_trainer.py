import warnings

import numpy as np
import pytest

from kinirl.errors import ArgumentError, DataError
from kinirl.grid_mdp import build_transition_kernels
from kinirl.io_formats import load_model
from kinirl.irl_trainer import (TrainConfig, TrainReport, demo_svf, loss_gradient_wrt_cost,
                                sample_gradient, train, trajectory_log_likelihood)
from kinirl.planner_eval import sample_trajectory
from kinirl.reward_net import AdamState, adam_step, fcn_backward, fcn_forward, init_params, zero_params
from kinirl.scene_synth import DemoSample, make_dataset
from kinirl.soft_vi import V_MIN, soft_value_iteration
from kinirl.svf import expected_svf, one_hot_init
from kinirl.trajectory import Trajectory

from oracles import enumerate_trajectory_mass, numeric_reward_gradient


def path(cells, heading=0):
    return Trajectory.from_records([(r, c, heading, 0) for r, c in cells[:-1]]
                                   + [(*cells[-1], heading, -1)])


def test_demo_svf_counts():
    mu = demo_svf(path([(0, 0), (0, 1), (0, 2)]), (4, 4))
    expected = np.zeros((4, 4))
    expected[0, :3] = 1.0
    assert np.array_equal(mu, expected)
    loop = Trajectory.from_records([(2, 2, 0, 0), (2, 3, 0, 0), (2, 2, 0, 0), (2, 1, 0, -1)])
    assert demo_svf(loop, (5, 5))[2, 2] == 2.0
    with pytest.raises(DataError):
        demo_svf(Trajectory.from_records([]), (4, 4))
    with pytest.raises(DataError):
        demo_svf(path([(0, 0), (0, 4)]), (4, 4))


def test_loss_gradient_sign_and_shape():
    mu = np.random.default_rng(0).random((5, 5))
    assert not loss_gradient_wrt_cost(mu, mu).any()
    mu_e, mu_d = np.zeros((3, 3)), np.zeros((3, 3))
    mu_d[1, 1] = 1.0
    assert loss_gradient_wrt_cost(mu_e, mu_d)[1, 1] == -1.0
    with pytest.raises(ArgumentError):
        loss_gradient_wrt_cost(np.zeros((3, 3)), np.zeros((3, 4)))


def _random_demo(seed, size=6, kernels=None):
    rng = np.random.default_rng(seed)
    reward = rng.uniform(-6.0, -2.0, (size, size))
    goal = tuple(int(x) for x in rng.integers(size, size=2))
    start = goal
    while start[:2] == goal:
        start = (int(rng.integers(size)), int(rng.integers(size)), int(rng.integers(8)))
    _, pol = soft_value_iteration(reward, kernels, goal, 150)
    traj, reached = sample_trajectory(pol, kernels, start, goal, 120, seed=seed)
    assert reached
    return reward, pol, DemoSample(None, traj, start, goal)


@pytest.mark.parametrize("seed", [0, 1])
def test_likelihood_gradient_matches_finite_differences(kernels_undiscounted, seed):
    k = kernels_undiscounted
    reward, pol, demo = _random_demo(seed, kernels=k)
    mu_e = expected_svf(pol, k, one_hot_init(reward.shape, demo.start[:2], demo.start[2]), demo.goal, 120)
    mu_d = demo_svf(demo.trajectory, reward.shape)
    # d logL / dR = -(d logL / dC) = mu_D - mu_E
    analytic = -loss_gradient_wrt_cost(mu_e, mu_d)
    fd = numeric_reward_gradient(lambda r: trajectory_log_likelihood(r, k, demo, 150), reward, 1e-4)
    assert np.abs(fd - analytic).max() <= 1e-3 * np.abs(analytic).max()


def test_single_step_demo_likelihood(kernels):
    reward = np.full((5, 5), -1.0)
    demo = DemoSample(None, path([(2, 1), (2, 2)]), (2, 1, 0), (2, 2))
    v, _ = soft_value_iteration(reward, kernels, demo.goal, 150)
    assert trajectory_log_likelihood(reward, kernels, demo) == pytest.approx(-1.0 - v[0, 2, 1], abs=1e-12)


def test_higher_reward_demo_more_likely(kernels):
    reward = np.full((5, 7), -1.0)
    reward[1, 2:5] = -4.0
    straight = DemoSample(None, path([(2, 1), (2, 2), (2, 3), (2, 4), (2, 5)]), (2, 1, 0), (2, 5))
    bumpy = DemoSample(None, Trajectory.from_records(
        [(2, 1, 0, 1), (1, 2, 1, 2), (1, 3, 0, 0), (1, 4, 0, 2), (2, 5, 7, -1)]), (2, 1, 0), (2, 5))
    assert (trajectory_log_likelihood(reward, kernels, straight)
            > trajectory_log_likelihood(reward, kernels, bumpy))


def test_likelihood_at_most_zero_when_undiscounted(kernels_undiscounted):
    for seed in range(4):
        reward, _, demo = _random_demo(seed, kernels=kernels_undiscounted)
        assert trajectory_log_likelihood(reward, kernels_undiscounted, demo) <= 1e-12


def test_unreachable_start_warns(kernels):
    reward = np.full((9, 9), -1.0)
    demo = DemoSample(None, path([(8, 8), (8, 7)], heading=4), (8, 8, 4), (0, 0))
    with pytest.warns(RuntimeWarning, match="unreachable"):
        ll = trajectory_log_likelihood(reward, kernels, demo, K=1)
    assert ll == pytest.approx(-1.0 - V_MIN)


def test_partition_sums_to_one_small(kernels_undiscounted):
    rng = np.random.default_rng(3)
    reward = rng.uniform(-6.0, -3.0, (4, 4))
    v, _ = soft_value_iteration(reward, kernels_undiscounted, (3, 2), 150)
    mass, dropped, _ = enumerate_trajectory_mass(reward, kernels_undiscounted, (0, 0, 0), (3, 2),
                                                 v[0, 0, 0], prune=1e-9)
    assert abs(mass - 1.0) < 1e-3 and dropped < 1e-3


def test_zero_gap_gives_zero_update():
    rng = np.random.default_rng(0)
    p = init_params(0)
    _, cache = fcn_forward(p, rng.normal(size=(3, 8, 8)))
    mu = rng.random((8, 8))
    g = fcn_backward(p, cache, -loss_gradient_wrt_cost(mu, mu))
    q, _ = adam_step(p, g, AdamState())
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))


@pytest.fixture(scope="module")
def corridor():
    return make_dataset("E2", 10, 300, size=16, road_width_cells=6)


def test_small_step_along_gradient_lowers_nll(corridor, kernels):
    cfg = TrainConfig()
    p = init_params(1)
    demo = corridor[0]
    grads, stats = sample_gradient(p, demo, kernels, cfg, seed=0)
    eps = 1e-4 / max(np.abs(a).max() for a in grads.arrays())
    q = type(p).from_arrays([a - eps * g for a, g in zip(p.arrays(), grads.arrays())])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cost, _ = fcn_forward(q, demo.scene)
        nll_after = -trajectory_log_likelihood(-cost, kernels, demo, cfg.K)
    assert nll_after < stats[1]


def test_one_iteration_report_and_change(corridor):
    p0 = zero_params()
    p1, report = train(TrainConfig(iterations=1, batch_size=3), corridor, p0)
    assert len(report) == 1 and len(report.rows()) == 1
    assert all(np.isfinite(x) for x in report.rows()[0])
    assert any(not np.array_equal(a, b) for a, b in zip(p0.arrays(), p1.arrays()))


def test_training_deterministic(corridor):
    cfg = TrainConfig(iterations=3, batch_size=2, seed=5)
    a = train(cfg, corridor, init_params(2))
    b = train(cfg, corridor, init_params(2))
    assert a[1].rows() == b[1].rows()
    assert all(np.array_equal(x, y) for x, y in zip(a[0].arrays(), b[0].arrays()))


def test_learning_rate_decays_per_epoch(corridor, monkeypatch):
    seen = []
    import kinirl.irl_trainer as mod

    def spy(params, grads, state):
        seen.append(state.lr)
        return adam_step(params, grads, state)

    monkeypatch.setattr(mod, "adam_step", spy)
    train(TrainConfig(iterations=6, batch_size=5, lr=1.0, lr_decay=0.5), corridor, init_params(0))
    # 10 samples / batch 5 = 2 iterations per epoch
    assert seen == [1.0, 1.0, 0.5, 0.5, 0.25, 0.25]


def test_checkpoints_and_csv(corridor, tmp_path):
    cfg = TrainConfig(iterations=3, batch_size=2, checkpoint_every=2)
    params, report = train(cfg, corridor, init_params(0), checkpoint_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["model_00002.fcn", "model_00003.fcn"]
    final = load_model(tmp_path / "model_00003.fcn")
    assert all(np.array_equal(a, b) for a, b in zip(final.arrays(), params.arrays()))
    report.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "iteration,l1_svf_gap,mean_nll,expert_reward,policy_reward"
    assert len(lines) == 4 and lines[1].startswith("1,")


def test_invalid_sample_named(corridor):
    bad = list(corridor[:3])
    d = bad[1]
    bad[1] = DemoSample(d.scene, d.trajectory, (d.start[0], d.start[1] + 1, d.start[2]), d.goal)
    with pytest.raises(DataError, match="sample 1"):
        train(TrainConfig(iterations=1), bad, init_params(0))
    with pytest.raises(DataError, match="empty"):
        train(TrainConfig(iterations=1), [], init_params(0))


def test_config_validation():
    for bad in [dict(batch_size=0), dict(lr=0.0), dict(lr_decay=0.0), dict(lr_decay=1.01),
                dict(iterations=0), dict(K=0), dict(T=0)]:
        with pytest.raises(ArgumentError):
            TrainConfig(**bad)
    assert TrainConfig(lr_decay=1.0).lr_decay == 1.0


def test_smoothed_gap():
    r = TrainReport(l1_svf_gap=[4.0, 2.0, 0.0, 6.0])
    assert r.smoothed_gap(2).tolist() == [4.0, 3.0, 1.0, 3.0]


def test_toy_corridor_gap_halves(corridor):
    """10 pit-avoiding demos, 100 iterations: the smoothed visitation gap halves."""
    _, report = train(TrainConfig(iterations=100, lr=1e-3), corridor, init_params(0))
    s = report.smoothed_gap()
    assert s[-1] <= 0.5 * s[0]

"""Maximum-entropy deep IRL training loop.

Per demonstration: the network maps scene features to a cost map, soft
value iteration on the negated cost gives a stochastic policy, visitation
propagation from the demo's start gives the expected counts ``mu_E``, and
the demo itself gives ``mu_D``.  The log-likelihood gradient with respect
to the cost map is ``mu_E - mu_D``; it is back-propagated through the
network and the parameters take an Adam step *up* the likelihood.
"""

from __future__ import annotations

import csv
import dataclasses
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DataError, KinIRLError, NumericError
from .grid_mdp import build_transition_kernels
from .planner_eval import sample_trajectory, trajectory_reward
from .reward_net import AdamState, FcnParams, adam_step, fcn_backward, fcn_forward
from .soft_vi import V_MIN, soft_value_iteration
from .svf import expected_svf, one_hot_init
from .trajectory import Trajectory, validate_trajectory


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 200
    batch_size: int = 5
    lr: float = 1e-4
    lr_decay: float = 0.99
    K: int = 150
    T: int = 120
    gamma: float = 0.95
    seed: int = 0
    rows: int = 0          # 0: take the grid size from the data
    cols: int = 0
    behavior: str = ""
    data: str = ""
    out: str = ""
    checkpoint_every: int = 50

    def __post_init__(self):
        checks = [
            (self.iterations >= 1, "iterations must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.lr > 0, "lr must be positive"),
            (0 < self.lr_decay <= 1, "lr_decay must lie in (0, 1]"),
            (self.K >= 1, "K must be >= 1"),
            (self.T >= 1, "T must be >= 1"),
            (0 <= self.gamma <= 1, "gamma must lie in [0, 1]"),
            (self.rows >= 0 and self.cols >= 0, "rows and cols must be non-negative"),
            (self.checkpoint_every >= 0, "checkpoint_every must be non-negative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ArgumentError(msg)

    @classmethod
    def field_types(cls):
        kinds = {"int": int, "float": float, "str": str}
        return {f.name: kinds[f.type] for f in dataclasses.fields(cls)}


@dataclass
class TrainReport:
    l1_svf_gap: list = field(default_factory=list)
    mean_nll: list = field(default_factory=list)
    expert_reward: list = field(default_factory=list)
    policy_reward: list = field(default_factory=list)

    COLUMNS = ("iteration", "l1_svf_gap", "mean_nll", "expert_reward", "policy_reward")

    def __len__(self):
        return len(self.l1_svf_gap)

    def rows(self):
        return [(i + 1, *vals) for i, vals in enumerate(zip(self.l1_svf_gap, self.mean_nll,
                                                            self.expert_reward, self.policy_reward))]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.COLUMNS)
            for row in self.rows():
                writer.writerow([row[0]] + [repr(float(x)) for x in row[1:]])

    def smoothed_gap(self, window: int = 10):
        """Trailing moving average of the visitation gap."""
        x = np.asarray(self.l1_svf_gap, dtype=np.float64)
        c = np.concatenate([[0.0], np.cumsum(x)])
        idx = np.arange(1, len(x) + 1)
        lo = np.maximum(idx - window, 0)
        return (c[idx] - c[lo]) / (idx - lo)


def demo_svf(traj: Trajectory, dims) -> np.ndarray:
    """Visit counts of a demonstrated trajectory (every record counts)."""
    if len(traj) == 0:
        raise DataError("empty trajectory")
    h, w = dims
    rows, cols = traj.cells[:, 0], traj.cells[:, 1]
    if np.any((rows < 0) | (rows >= h) | (cols < 0) | (cols >= w)):
        raise DataError(f"trajectory leaves the {h}x{w} grid")
    mu = np.zeros((h, w))
    np.add.at(mu, (rows, cols), 1.0)
    return mu


def loss_gradient_wrt_cost(mu_e, mu_d) -> np.ndarray:
    """``mu_E - mu_D``: derivative of the demo log-likelihood with respect to cost.

    Negative where the expert visits more often than the current policy
    expects, so an ascent step on the likelihood lowers the cost there.
    """
    mu_e = np.asarray(mu_e, dtype=np.float64)
    mu_d = np.asarray(mu_d, dtype=np.float64)
    if mu_e.shape != mu_d.shape:
        raise ArgumentError(f"visitation maps differ in shape: {mu_e.shape} vs {mu_d.shape}")
    return mu_e - mu_d


def _demo_reward_sum(reward, demo, gamma):
    """Discounted reward over the demo, excluding a terminal goal record."""
    traj = demo.trajectory
    n = len(traj)
    if n and tuple(traj.cells[-1]) == tuple(demo.goal):
        n -= 1
    rows, cols = traj.cells[:n, 0], traj.cells[:n, 1]
    return float(np.dot(float(gamma) ** np.arange(n), reward[rows, cols]))


def _log_likelihood_from_values(reward, values, demo, gamma):
    r, c, k = demo.start
    v0 = values[k, r, c]
    if v0 <= V_MIN:
        warnings.warn(f"goal unreachable from start {tuple(demo.start)}; log-likelihood "
                      f"uses the sentinel value", RuntimeWarning, stacklevel=3)
    return _demo_reward_sum(reward, demo, gamma) - v0


def trajectory_log_likelihood(reward, kernels, demo, K: int = 150) -> float:
    """``sum_t gamma^(t-1) R(s_t) - V(start)`` with ``V`` from soft value iteration.

    The goal record is left out of the reward sum because the goal's value
    is pinned to 0.  With ``gamma = 1`` this is exactly the log-probability
    of the demo's action sequence under the soft-optimal policy.
    """
    reward = np.asarray(reward, dtype=np.float64)
    values, _ = soft_value_iteration(reward, kernels, demo.goal, K)
    return _log_likelihood_from_values(reward, values, demo, kernels.gamma)


def _thread_count():
    raw = os.environ.get("KINIRL_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ArgumentError(f"KINIRL_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ArgumentError("KINIRL_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def check_dataset(dataset, kernels, config: TrainConfig | None = None):
    if not dataset:
        raise DataError("dataset is empty")
    for i, demo in enumerate(dataset):
        try:
            scene = np.asarray(demo.scene)
            if scene.ndim != 3:
                raise DataError(f"scene has shape {scene.shape}")
            dims = scene.shape[1:]
            if config is not None and config.rows and config.cols and dims != (config.rows, config.cols):
                raise DataError(f"grid {dims} differs from configured {config.rows}x{config.cols}")
            validate_trajectory(demo.trajectory, kernels, dims, demo.start, demo.goal)
        except KinIRLError as exc:
            raise DataError(f"sample {i}: {exc}") from None


def sample_gradient(params, demo, kernels, config: TrainConfig, seed: int):
    """Per-demo forward pass, expected visitation and parameter gradient."""
    cost, cache = fcn_forward(params, demo.scene)
    if not np.all(np.isfinite(cost)):
        raise NumericError("network produced a non-finite cost")
    reward = -cost
    values, policy = soft_value_iteration(reward, kernels, demo.goal, config.K)
    dims = reward.shape
    init = one_hot_init(dims, demo.start[:2], demo.start[2], kernels.n_orient)
    mu_e = expected_svf(policy, kernels, init, demo.goal, config.T)
    mu_d = demo_svf(demo.trajectory, dims)
    d_ll = loss_gradient_wrt_cost(mu_e, mu_d)
    # descend on the negative log-likelihood
    grads = fcn_backward(params, cache, -d_ll)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        nll = -_log_likelihood_from_values(reward, values, demo, kernels.gamma)
    sampled, _ = sample_trajectory(policy, kernels, demo.start, demo.goal, config.T, seed=seed)
    stats = (np.abs(d_ll).sum(), nll, trajectory_reward(reward, demo.trajectory, kernels.gamma),
             trajectory_reward(reward, sampled, kernels.gamma))
    return grads, stats


def train(config: TrainConfig, dataset, params: FcnParams, checkpoint_dir=None, progress=None):
    """Run the training loop; returns ``(params, report)``.

    Deterministic given ``(config, dataset, params)``.  With
    ``checkpoint_dir`` a model file is written every ``checkpoint_every``
    iterations and after the last one.
    """
    from .io_formats import save_model

    kernels = build_transition_kernels(gamma=config.gamma)
    check_dataset(dataset, kernels, config)
    rng = np.random.default_rng(config.seed)
    state = AdamState(lr=config.lr, decay=config.lr_decay)
    report = TrainReport()
    n = len(dataset)
    batch = min(config.batch_size, n)
    per_epoch = -(-n // batch)
    threads = min(_thread_count(), batch)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    try:
        for it in range(1, config.iterations + 1):
            idx = rng.choice(n, size=batch, replace=False)
            seeds = rng.integers(0, 2**63 - 1, size=batch)
            jobs = [(params, dataset[i], kernels, config, int(s)) for i, s in zip(idx, seeds)]
            if pool is None:
                results = [sample_gradient(*job) for job in jobs]
            else:
                results = list(pool.map(lambda job: sample_gradient(*job), jobs))
            arrays = [sum(a) / batch for a in zip(*(g.arrays() for g, _ in results))]
            grads = FcnParams.from_arrays(arrays)
            params, state = adam_step(params, grads, state)
            gap, nll, er, pr = np.mean([s for _, s in results], axis=0)
            report.l1_svf_gap.append(float(gap))
            report.mean_nll.append(float(nll))
            report.expert_reward.append(float(er))
            report.policy_reward.append(float(pr))
            if it % per_epoch == 0:
                state.lr *= state.decay
            if checkpoint_dir is not None and (
                    it == config.iterations or (config.checkpoint_every and it % config.checkpoint_every == 0)):
                save_model(Path(checkpoint_dir) / f"model_{it:05d}.fcn", params)
            if progress is not None:
                progress(it, report)
    finally:
        if pool is not None:
            pool.shutdown()
    return params, report

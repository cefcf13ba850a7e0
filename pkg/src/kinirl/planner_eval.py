"""Rolling out policies and scoring the resulting trajectories."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, DataError, PlanningError
from .grid_mdp import check_cell
from .trajectory import NO_ACTION, Trajectory


def _check_policy(policy, kernels):
    policy = np.asarray(policy, dtype=np.float64)
    m, n = kernels.n_orient, kernels.n_actions
    if policy.ndim != 4 or policy.shape[:2] != (m, n):
        raise ArgumentError(f"policy must have shape ({m}, {n}, H, W), got {policy.shape}")
    return policy


def _check_start(dims, start, n_orient):
    r, c = check_cell(dims, start[:2], "start")
    k = int(start[2])
    if not 0 <= k < n_orient:
        raise ArgumentError(f"start heading {k} outside [0, {n_orient})")
    return r, c, k


def _rollout(policy, kernels, start, goal, t_max, choose):
    """Shared stepping loop; ``choose(probs, state)`` returns an action index.

    Returns ``(trajectory, reached_goal, left_map)``.  A move off the map
    ends the rollout where it stands.
    """
    h, w = policy.shape[2:]
    r, c, k = start
    goal = tuple(goal)
    recs = []
    reached = (r, c) == goal
    left = False
    for _ in range(t_max):
        if reached:
            break
        a = choose(policy[k, :, r, c], (r, c, k))
        dr, dc, nk = kernels.moves[k, a]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < h and 0 <= nc < w):
            left = True
            break
        recs.append((r, c, k, a))
        r, c, k = int(nr), int(nc), int(nk)
        reached = (r, c) == goal
    recs.append((r, c, k, NO_ACTION))
    return Trajectory.from_records(recs), reached, left


def sample_trajectory(policy, kernels, start, goal, t_max: int, seed: int = 0, rng=None):
    """Draw a trajectory from a stochastic policy.

    ``start`` is ``(row, col, heading)``.  The rollout stops on reaching the
    goal or after ``t_max`` moves.  Returns ``(trajectory, reached_goal)``.
    """
    policy = _check_policy(policy, kernels)
    if int(t_max) < 1:
        raise ArgumentError(f"t_max must be >= 1, got {t_max}")
    dims = policy.shape[2:]
    start = _check_start(dims, start, kernels.n_orient)
    goal = check_cell(dims, goal, "goal")
    rng = np.random.default_rng(seed) if rng is None else rng
    n = kernels.n_actions

    def choose(p, _state):
        a = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        return min(a, n - 1)

    traj, reached, _ = _rollout(policy, kernels, start, goal, int(t_max), choose)
    return traj, reached


def greedy_plan(policy, kernels, start, goal, t_max: int) -> Trajectory:
    """Argmax-action decode (ties go to the lowest action index).

    Raises PlanningError on a repeated (cell, heading), on leaving the map,
    or when the goal is not reached within ``t_max`` moves.
    """
    policy = _check_policy(policy, kernels)
    if int(t_max) < 1:
        raise ArgumentError(f"t_max must be >= 1, got {t_max}")
    dims = policy.shape[2:]
    start = _check_start(dims, start, kernels.n_orient)
    goal = check_cell(dims, goal, "goal")
    seen = set()

    def choose(p, state):
        if state in seen:
            raise PlanningError(f"greedy decode cycles at cell {state[:2]} heading {state[2]}")
        seen.add(state)
        return int(np.argmax(p))

    traj, reached, left = _rollout(policy, kernels, start, goal, int(t_max), choose)
    end = tuple(int(x) for x in traj.cells[-1])
    if left:
        raise PlanningError(f"greedy decode drives off the map at {end}")
    if not reached:
        raise PlanningError(f"greedy decode did not reach goal {goal} within {t_max} moves "
                            f"(stopped at {end})")
    return traj


def trajectory_reward(reward, traj: Trajectory, gamma: float = 1.0) -> float:
    """Discounted sum of per-cell rewards over every record of ``traj``."""
    reward = np.asarray(reward, dtype=np.float64)
    if len(traj) == 0:
        return 0.0
    h, w = reward.shape
    rows, cols = traj.cells[:, 0], traj.cells[:, 1]
    if np.any((rows < 0) | (rows >= h) | (cols < 0) | (cols >= w)):
        raise DataError(f"trajectory leaves the {h}x{w} grid")
    disc = float(gamma) ** np.arange(len(traj))
    return float(np.dot(disc, reward[rows, cols]))


def _cells(traj):
    if isinstance(traj, Trajectory):
        return traj.cells.astype(np.float64)
    return np.asarray(traj, dtype=np.float64).reshape(-1, 2)


def hausdorff_distance(a, b, resolution_m: float = 1.0) -> float:
    """Symmetric Hausdorff distance between cell-centre sets, in metres."""
    pa, pb = _cells(a), _cells(b)
    if len(pa) == 0 or len(pb) == 0:
        raise ArgumentError("Hausdorff distance needs two nonempty trajectories")
    d = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=-1))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()) * resolution_m)


def average_hd(policy, kernels, demo, n: int = 30, seed: int = 0, t_max: int = 120,
               resolution_m: float = 1.0, details: bool = False):
    """Mean Hausdorff distance between a demo and ``n`` sampled rollouts.

    Rollouts that stop short of the goal are included.  ``demo`` needs
    ``trajectory``, ``start`` and ``goal`` attributes.  With ``details`` the
    per-rollout ``(hd, reached, trajectory)`` list is returned too.
    """
    if int(n) < 1:
        raise ArgumentError(f"need at least one rollout, got {n}")
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(int(n)):
        traj, reached = sample_trajectory(policy, kernels, demo.start, demo.goal, t_max, rng=rng)
        rows.append((hausdorff_distance(demo.trajectory, traj, resolution_m), reached, traj))
    mean = float(np.mean([r[0] for r in rows]))
    return (mean, rows) if details else mean

"""Expected state-visitation frequency under a heading-augmented policy.

All three estimators share the same semantics: ``T`` occupancy snapshots
are summed (the first one is the initial distribution), the goal is
absorbing (mass reaching it is counted, then removed), visitation is
undiscounted, and mass pushed off the map is lost.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError
from .grid_mdp import TransitionKernelSet, check_cell
from .soft_vi import gather_index, kernel_taps


def one_hot_init(dims, cell, heading, n_orient=8):
    """Unit mass at ``cell`` facing ``heading``; shape ``(M, H, W)``."""
    r, c = check_cell(dims, cell, "start")
    if not 0 <= heading < n_orient:
        raise ArgumentError(f"start heading {heading} outside [0, {n_orient})")
    init = np.zeros((n_orient,) + tuple(dims))
    init[heading, r, c] = 1.0
    return init


def _check(policy, kernels, init, goal, n_steps, tol=1e-9):
    policy = np.asarray(policy, dtype=np.float64)
    init = np.asarray(init, dtype=np.float64)
    m, n = kernels.n_orient, kernels.n_actions
    if policy.ndim != 4 or policy.shape[:2] != (m, n):
        raise ArgumentError(f"policy must have shape ({m}, {n}, H, W), got {policy.shape}")
    dims = policy.shape[2:]
    if init.shape != (m,) + dims:
        raise ArgumentError(f"initial distribution must have shape {(m,) + dims}, got {init.shape}")
    if np.any(init < 0) or not np.all(np.isfinite(init)):
        raise ArgumentError("initial distribution must be finite and non-negative")
    if np.any(policy < -tol) or np.abs(policy.sum(axis=1) - 1.0).max() > tol:
        raise ArgumentError("policy is not normalised over actions")
    if int(n_steps) < 1:
        raise ArgumentError(f"step count must be >= 1, got {n_steps}")
    goal = check_cell(dims, goal, "goal")
    return policy, init, goal, int(n_steps)


def expected_svf(policy, kernels: TransitionKernelSet, init, goal, n_steps: int = 120,
                 per_heading: bool = False):
    """Convolutional visitation propagation.

    Each step splits the heading occupancy over actions (pixel-wise product
    with the policy), correlates every split map with its flipped kernel and
    regroups the results by successor heading.  Returns the orientation
    marginal ``(H, W)``; with ``per_heading`` also the ``(M, H, W)`` planes.
    """
    policy, init, (gr, gc), n_steps = _check(policy, kernels, init, goal, n_steps)
    m, n = kernels.n_orient, kernels.n_actions
    h, w = init.shape[1:]
    plane = (h + 2) * (w + 2)
    # gather from padded (heading, action) split maps; regroup by successor
    ident = np.zeros((m, n), dtype=np.intp)
    ident[:] = np.arange(m * n).reshape(m, n)
    index, weights = gather_index(kernels.svf, ident, (h, w), m * n * plane)
    regroup = np.zeros((m, m * n))
    regroup[kernels.g.reshape(-1), np.arange(m * n)] = 1.0
    unit = bool(np.all(weights[0] == 1.0)) and index.shape[0] == 1

    buf = np.zeros(m * n * plane + 1)
    split = buf[:-1].reshape(m, n, h + 2, w + 2)[:, :, 1:-1, 1:-1]
    sigma = np.empty((m, n, h, w))
    scratch = np.empty_like(sigma)

    occ = init.copy()
    mu = np.zeros((m, h, w))
    for _ in range(n_steps):
        mu += occ
        occ[:, gr, gc] = 0.0
        np.multiply(policy, occ[:, None], out=split)
        np.take(buf, index[0], out=sigma)
        if not unit:
            sigma *= weights[0]
            for idx, wt in zip(index[1:], weights[1:]):
                np.take(buf, idx, out=scratch)
                scratch *= wt
                sigma += scratch
        occ = (regroup @ sigma.reshape(m * n, h * w)).reshape(m, h, w)
    if per_heading:
        return mu.sum(axis=0), mu
    return mu.sum(axis=0)


def reference_expected_svf(policy, kernels: TransitionKernelSet, init, goal, n_steps: int = 120):
    """Explicit-state visitation propagation (slow oracle).

    Pull form: the next occupancy of a state sums policy-weighted occupancy
    over every (predecessor state, action) whose transition lands there.
    """
    policy, init, (gr, gc), n_steps = _check(policy, kernels, init, goal, n_steps)
    m, n = kernels.n_orient, kernels.n_actions
    h, w = init.shape[1:]
    hw = h * w
    n_states = m * hw
    g = kernels.g.tolist()
    taps = kernel_taps(kernels.svf)

    # pred[s] = [(predecessor state, action, weight), ...]
    pred = [[] for _ in range(n_states)]
    for j in range(m):
        for i in range(n):
            nj = g[j][i]
            for u, v, wt in taps[j][i]:
                du, dv = u - 1, v - 1
                for r in range(h):
                    rr = r + du
                    if not 0 <= rr < h:
                        continue
                    for c in range(w):
                        cc = c + dv
                        if 0 <= cc < w:
                            pred[nj * hw + r * w + c].append((j * hw + rr * w + cc, i, wt))

    pi = [policy[s // hw, :, (s % hw) // w, s % w].tolist() for s in range(n_states)]
    occ = init.ravel().tolist()
    mu = [0.0] * n_states
    goal_states = {j * hw + gr * w + gc for j in range(m)}
    for _ in range(n_steps):
        for s in range(n_states):
            mu[s] += occ[s]
        for s in goal_states:
            occ[s] = 0.0
        nxt = [0.0] * n_states
        for s in range(n_states):
            acc = 0.0
            for sp, a, wt in pred[s]:
                acc += wt * pi[sp][a] * occ[sp]
            nxt[s] = acc
        occ = nxt
    return np.array(mu).reshape(m, h, w).sum(axis=0)


def monte_carlo_svf(policy, kernels: TransitionKernelSet, init, goal, n_steps: int = 120,
                    n_rollouts: int = 50_000, seed: int = 0):
    """Rollout estimate of the visitation map (independent stochastic oracle).

    Start states are drawn from the normalised initial distribution and the
    visit counts are rescaled by its total mass.  Deterministic kernels only.
    """
    policy, init, (gr, gc), n_steps = _check(policy, kernels, init, goal, n_steps)
    if int(n_rollouts) < 1:
        raise ArgumentError(f"need at least one rollout, got {n_rollouts}")
    if any(len(t) != 1 for row in kernel_taps(kernels.svf) for t in row):
        raise ArgumentError("rollouts need one nonzero tap per kernel")
    m, n = kernels.n_orient, kernels.n_actions
    h, w = init.shape[1:]
    mass = init.sum()
    counts = np.zeros(h * w)
    if mass == 0.0:
        return counts.reshape(h, w)

    rng = np.random.default_rng(seed)
    state = rng.choice(init.size, size=int(n_rollouts), p=(init / mass).ravel())
    hw = h * w
    # per augmented state: cumulative action probabilities and decoded moves
    cum = np.cumsum(policy, axis=1).transpose(0, 2, 3, 1).reshape(m * hw, n)
    rows, cols = np.divmod(np.arange(hw), w)
    nxt = np.full((m * hw, n), -1, dtype=np.int64)
    for j in range(m):
        for i in range(n):
            dr, dc, nj = kernels.moves[j, i]
            rr, cc = rows + dr, cols + dc
            ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            nxt[j * hw + np.flatnonzero(ok), i] = nj * hw + rr[ok] * w + cc[ok]
    goal_cell = gr * w + gc
    for _ in range(n_steps):
        cell = state % hw
        counts += np.bincount(cell, minlength=hw)
        state = state[cell != goal_cell]
        if state.size == 0:
            break
        u = rng.random(state.size)
        a = (u[:, None] > cum[state]).sum(axis=1)
        np.minimum(a, n - 1, out=a)
        state = nxt[state, a]
        state = state[state >= 0]
    return counts.reshape(h, w) * (mass / n_rollouts)

"""Soft (log-sum-exp) value iteration on orientation-stacked value maps.

Two engines share one contract:

* :func:`soft_value_iteration` correlates every successor value plane with
  its kinematic kernel, all headings and actions per sweep (Jacobi).
* :func:`reference_value_iteration` walks the explicit augmented state space
  ``rows x cols x headings`` with plain Python loops.  It is slow on purpose:
  it checks the first engine and is the benchmark baseline.

Conventions shared by both engines:

* values start at minus infinity; off-map successors read minus infinity;
  a Q entry with a dead successor is dead, and a state whose actions are all
  dead stays dead.  Dead states are reported as ``V_MIN`` and get the
  uniform policy.
* the goal is clamped to 0 in every heading plane before and after each
  sweep, and also gets the uniform policy (it is terminal).
"""

from __future__ import annotations

import math
from itertools import repeat
from operator import itemgetter, sub

import numpy as np

from .errors import ArgumentError
from .grid_mdp import TransitionKernelSet, check_cell

V_MIN = -1e6
_NEG_INF = float("-inf")


def soft_max_reduce(q_values) -> float:
    """log(sum(exp(q))) with a max shift.

    Inputs at or below ``V_MIN`` are treated as dead branches; with no live
    input the result is ``V_MIN``.
    """
    live = [float(x) for x in q_values if x > V_MIN]
    if not live:
        return V_MIN
    m = max(live)
    return m + math.log(sum(math.exp(x - m) for x in live))


def _check_inputs(reward, goal, n_iter):
    reward = np.asarray(reward, dtype=np.float64)
    if reward.ndim != 2:
        raise ArgumentError(f"reward must be a 2-D grid, got shape {reward.shape}")
    if not np.all(np.isfinite(reward)):
        raise ArgumentError("reward grid contains non-finite values")
    if int(n_iter) < 1:
        raise ArgumentError(f"iteration count must be >= 1, got {n_iter}")
    goal = check_cell(reward.shape, goal, "goal")
    return reward, goal, int(n_iter)


def kernel_taps(kern):
    """taps[j][i] = [(u, v, weight), ...] for the nonzero entries of a kernel stack."""
    m, n = kern.shape[:2]
    return [[[(u, v, float(kern[j, i, u, v])) for u in range(3) for v in range(3)
              if kern[j, i, u, v] != 0.0] for i in range(n)] for j in range(m)]


def gather_index(kern, g, dims, pad_slot):
    """im2col-style index for correlating successor planes with the kernels.

    The successor planes live in a flat buffer of ``M`` zero-border padded
    planes followed by one spare slot.  Layer ``l`` of the returned index
    picks, for every (heading, action, row, col), the cell under the
    kernel's ``l``-th nonzero tap; kernels with fewer taps point at
    ``pad_slot`` with weight 0.  Returns ``(index, weights)`` with shapes
    ``(L, M, N, H, W)`` and ``(L, M, N, 1, 1)``.
    """
    h, w = dims
    m, n = kern.shape[:2]
    taps = kernel_taps(kern)
    layers = max(len(t) for row in taps for t in row)
    plane = (h + 2) * (w + 2)
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    index = np.full((layers, m, n, h, w), pad_slot, dtype=np.intp)
    weights = np.zeros((layers, m, n, 1, 1))
    for j in range(m):
        for i in range(n):
            for layer, (u, v, wt) in enumerate(taps[j][i]):
                index[layer, j, i] = g[j, i] * plane + (rows + u) * (w + 2) + (cols + v)
                weights[layer, j, i] = wt
    return index, weights


def soft_value_iteration(reward, kernels: TransitionKernelSet, goal, n_iter: int = 150):
    """Convolutional soft value iteration.

    Returns ``(values, policy)`` with shapes ``(M, H, W)`` and
    ``(M, N, H, W)``.
    """
    reward, (gr, gc), n_iter = _check_inputs(reward, goal, n_iter)
    h, w = reward.shape
    m, n = kernels.n_orient, kernels.n_actions
    plane = (h + 2) * (w + 2)
    index, weights = gather_index(kernels.vi, kernels.g, (h, w), m * plane)

    # padded value planes (border = dead) plus a spare zero slot
    buf = np.full(m * plane + 1, _NEG_INF)
    buf[-1] = 0.0
    inner = buf[:-1].reshape(m, h + 2, w + 2)[:, 1:-1, 1:-1]
    inner[...] = _NEG_INF
    q = np.empty((m, n, h, w))
    scratch = np.empty_like(q)

    with np.errstate(invalid="ignore"):
        for _ in range(n_iter):
            inner[:, gr, gc] = 0.0
            np.take(buf, index[0], out=q)
            q *= weights[0]
            for idx, wt in zip(index[1:], weights[1:]):
                np.take(buf, idx, out=scratch)
                scratch *= wt
                q += scratch
            q += reward
            qmax = q.max(axis=1)
            np.subtract(q, qmax[:, None], out=scratch)
            np.exp(scratch, out=scratch)
            values = scratch.sum(axis=1)
            np.log(values, out=values)
            values += qmax
            values[qmax == _NEG_INF] = _NEG_INF
            values[:, gr, gc] = 0.0
            inner[...] = values

        dead = values == _NEG_INF
        policy = np.exp(q - values[:, None])
    dead_or_goal = dead.copy()
    dead_or_goal[:, gr, gc] = True
    policy[np.broadcast_to(dead_or_goal[:, None], policy.shape)] = 1.0 / n
    values[dead] = V_MIN
    return values, policy


def reference_value_iteration(reward, kernels: TransitionKernelSet, goal, n_iter: int = 150):
    """Explicit augmented-state soft value iteration (slow oracle).

    Only single-tap (deterministic) kernels are supported, which is every
    kernel set :func:`~kinirl.grid_mdp.build_transition_kernels` produces.
    """
    reward, (gr, gc), n_iter = _check_inputs(reward, goal, n_iter)
    h, w = reward.shape
    m, n = kernels.n_orient, kernels.n_actions
    hw = h * w
    n_states = m * hw
    g = kernels.g.tolist()
    taps = kernel_taps(kernels.vi)
    if any(len(t) != 1 for row in taps for t in row):
        raise ArgumentError("explicit solver needs one nonzero tap per kernel")

    # one extra slot past the last state stands for every off-map cell
    offmap = n_states
    succ = []
    wts = []
    for j in range(m):
        for r in range(h):
            for c in range(w):
                idx = []
                for i in range(n):
                    (u, v, _), = taps[j][i]
                    rr, cc = r + u - 1, c + v - 1
                    if 0 <= rr < h and 0 <= cc < w:
                        idx.append(g[j][i] * hw + rr * w + cc)
                    else:
                        idx.append(offmap)
                succ.append(itemgetter(*idx))
    for j in range(m):
        wts.append(tuple(t[0][2] for t in taps[j]))
    rew = reward.ravel().tolist() * m
    goal_states = [j * hw + gr * w + gc for j in range(m)]
    exp, log, neg_inf = math.exp, math.log, _NEG_INF

    # with one shared weight, pre-scale the previous sweep once so each
    # state only needs R + ym + log(sum(exp(y - ym)))
    shared = len({x for row in wts for x in row}) == 1
    wt0 = wts[0][0]

    values = [neg_inf] * (n_states + 1)
    for _ in range(n_iter):
        for s in goal_states:
            values[s] = 0.0
        prev = values
        values = []
        push = values.append
        if shared and n == 6:
            # the default action set, unrolled: this loop dominates the oracle's cost
            scaled = [wt0 * x for x in prev]
            for get, rs in zip(succ, rew):
                y0, y1, y2, y3, y4, y5 = ys = get(scaled)
                ym = max(ys)
                if ym == neg_inf:
                    push(neg_inf)
                else:
                    push(rs + ym + log(exp(y0 - ym) + exp(y1 - ym) + exp(y2 - ym)
                                       + exp(y3 - ym) + exp(y4 - ym) + exp(y5 - ym)))
        elif shared:
            scaled = [wt0 * x for x in prev]
            for get, rs in zip(succ, rew):
                ys = get(scaled)
                ym = max(ys)
                if ym == neg_inf:
                    push(neg_inf)
                else:
                    push(rs + ym + log(sum(map(exp, map(sub, ys, repeat(ym, n))))))
        else:
            for s, (get, rs) in enumerate(zip(succ, rew)):
                qs = [rs + wi * y for wi, y in zip(wts[s // hw], get(prev))]
                qm = max(qs)
                push(neg_inf if qm == neg_inf else qm + log(sum([exp(x - qm) for x in qs])))
        values.append(neg_inf)
        for s in goal_states:
            values[s] = 0.0

    # final Q from the last sweep's input buffer
    for s in goal_states:
        prev[s] = 0.0
    policy = np.full((m, n, h, w), 1.0 / n)
    v_out = np.empty(n_states)
    goal_set = set(goal_states)
    for s in range(n_states):
        vs = values[s]
        if vs == neg_inf:
            v_out[s] = V_MIN
            continue
        v_out[s] = vs
        if s in goal_set:
            continue
        j, rem = divmod(s, hw)
        r, c = divmod(rem, w)
        rs = rew[s]
        for i, (wi, y) in enumerate(zip(wts[j], succ[s](prev))):
            policy[j, i, r, c] = exp(rs + wi * y - vs)
    return v_out.reshape(m, h, w), policy

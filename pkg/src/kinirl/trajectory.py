"""Trajectory records: time-ordered (cell, heading, action) tuples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

#: action code stored on the last record of a trajectory (no move taken)
NO_ACTION = -1


@dataclass(frozen=True)
class Trajectory:
    """``cells`` is ``(n, 2)`` (row, col); ``orient`` and ``actions`` are ``(n,)``.

    Record ``t`` (1-based) sits at ``cells[t-1]`` facing ``orient[t-1]`` and
    then takes ``actions[t-1]``; the final record carries ``NO_ACTION``.
    """

    cells: np.ndarray
    orient: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 2)
        orient = np.asarray(self.orient, dtype=np.int64).reshape(-1)
        actions = np.asarray(self.actions, dtype=np.int64).reshape(-1)
        if not len(cells) == len(orient) == len(actions):
            raise DataError("trajectory fields have different lengths")
        for arr in (cells, orient, actions):
            arr.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "orient", orient)
        object.__setattr__(self, "actions", actions)

    def __len__(self):
        return len(self.cells)

    @property
    def n_moves(self) -> int:
        return max(len(self) - 1, 0)

    @classmethod
    def from_records(cls, records):
        """Build from ``(row, col, heading, action)`` tuples."""
        rec = np.asarray(list(records), dtype=np.int64).reshape(-1, 4)
        return cls(rec[:, :2], rec[:, 2], rec[:, 3])

    def records(self):
        """Rows of ``(t, row, col, heading, action)`` with ``t`` from 1."""
        t = np.arange(1, len(self) + 1)
        return np.column_stack([t, self.cells, self.orient, self.actions])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (np.array_equal(self.cells, other.cells) and np.array_equal(self.orient, other.orient)
                and np.array_equal(self.actions, other.actions))

    __hash__ = None


def validate_trajectory(traj: Trajectory, kernels, dims, start=None, goal=None):
    """Raise DataError unless every step is a legal kernel move inside the grid.

    ``start`` is ``(row, col, heading)``, ``goal`` is ``(row, col)``.
    """
    if len(traj) == 0:
        raise DataError("empty trajectory")
    h, w = dims
    rows, cols = traj.cells[:, 0], traj.cells[:, 1]
    bad = np.flatnonzero((rows < 0) | (rows >= h) | (cols < 0) | (cols >= w))
    if bad.size:
        raise DataError(f"record {bad[0] + 1}: cell {tuple(traj.cells[bad[0]])} outside {h}x{w} grid")
    m, n = kernels.n_orient, kernels.n_actions
    if np.any((traj.orient < 0) | (traj.orient >= m)):
        raise DataError("heading index out of range")
    for t in range(len(traj) - 1):
        a = int(traj.actions[t])
        if not 0 <= a < n:
            raise DataError(f"record {t + 1}: action {a} out of range")
        dr, dc, nj = kernels.moves[traj.orient[t], a]
        exp_cell = (traj.cells[t, 0] + dr, traj.cells[t, 1] + dc)
        if tuple(traj.cells[t + 1]) != exp_cell or traj.orient[t + 1] != nj:
            raise DataError(f"record {t + 2}: not reachable from record {t + 1} by action {a}")
    if traj.actions[-1] != NO_ACTION:
        raise DataError("last record must carry action -1")
    if start is not None and (tuple(traj.cells[0]), int(traj.orient[0])) != (tuple(start[:2]), int(start[2])):
        raise DataError(f"trajectory starts at {tuple(traj.cells[0])}/{traj.orient[0]}, expected {tuple(start)}")
    if goal is not None and tuple(traj.cells[-1]) != tuple(goal):
        raise DataError(f"trajectory ends at {tuple(traj.cells[-1])}, expected goal {tuple(goal)}")
    return traj

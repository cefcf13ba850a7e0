"""Orientation-augmented grid MDP and its kinematic transition kernels.

Axis convention: row 0 is the top of the map and East is +col.  Headings are
indexed counter-clockwise from East in 45 degree steps, so a +45 degree
steer increments the heading index.

Every (heading, action) pair owns two 3x3 kernels.  The value-iteration
kernel is *correlated* with the successor value map: its single nonzero tap
sits at the move offset and carries the discount.  The visitation kernel is
the same tap rotated by 180 degrees with unit weight, so correlating it with
an occupancy map pushes mass along the move.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError

#: unit displacement (drow, dcol) of each heading, counter-clockwise from East
HEADINGS = (
    (0, 1),    # E
    (-1, 1),   # NE
    (-1, 0),   # N
    (-1, -1),  # NW
    (0, -1),   # W
    (1, -1),   # SW
    (1, 0),    # S
    (1, 1),    # SE
)
HEADING_NAMES = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")

FORWARD = 1
BACKWARD = -1

#: (steer in 45 degree steps, direction); index 0 is straight ahead so that
#: argmax ties fall on driving straight
ACTIONS = (
    (0, FORWARD),
    (1, FORWARD),
    (-1, FORWARD),
    (0, BACKWARD),
    (1, BACKWARD),
    (-1, BACKWARD),
)
ACTION_NAMES = ("fwd", "fwd+45", "fwd-45", "bwd", "bwd+45", "bwd-45")


@dataclass(frozen=True)
class GridShape:
    rows: int
    cols: int
    resolution_m: float = 0.25

    def __post_init__(self):
        if int(self.rows) < 3 or int(self.cols) < 3:
            raise ArgumentError(f"grid must be at least 3x3, got {self.rows}x{self.cols}")
        if not self.resolution_m > 0:
            raise ArgumentError(f"resolution must be positive, got {self.resolution_m}")

    @property
    def dims(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def contains(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols


def check_cell(dims, cell, what="cell"):
    """Raise ArgumentError unless ``cell`` lies inside a grid of ``dims``."""
    rows, cols = dims
    r, c = cell
    if not (0 <= r < rows and 0 <= c < cols):
        raise ArgumentError(f"{what} {tuple(cell)} outside {rows}x{cols} grid")
    return int(r), int(c)


def next_orientation(j: int, action: int, n_orient: int = 8) -> int:
    """Heading index after taking ``action`` from heading ``j``.

    Reversing does not change the heading update; only the displacement
    direction flips.
    """
    if not 0 <= j < n_orient:
        raise ArgumentError(f"orientation index {j} outside [0, {n_orient})")
    if not 0 <= action < len(ACTIONS):
        raise ArgumentError(f"action index {action} outside [0, {len(ACTIONS)})")
    steer, _ = ACTIONS[action]
    return (j + steer) % n_orient


def displacement(j_next: int, direction: int) -> tuple[int, int]:
    dr, dc = HEADINGS[j_next]
    if direction == BACKWARD:
        return (-dr, -dc)
    return (dr, dc)


@dataclass(frozen=True)
class TransitionKernelSet:
    """Kinematic kernels plus the heading automaton.

    ``vi[j, i]`` and ``svf[j, i]`` are 3x3 arrays, ``g[j, i]`` the successor
    heading.  ``moves[j, i] = (drow, dcol, next_heading)`` is the decoded
    deterministic move, used by the samplers and the explicit-state solvers.
    """

    vi: np.ndarray
    svf: np.ndarray
    g: np.ndarray
    gamma: float
    moves: np.ndarray = field(repr=False)

    @property
    def n_orient(self) -> int:
        return self.vi.shape[0]

    @property
    def n_actions(self) -> int:
        return self.vi.shape[1]

    def dump(self) -> str:
        lines = []
        for j in range(self.n_orient):
            for i in range(self.n_actions):
                dr, dc, nj = self.moves[j, i]
                w = self.vi[j, i, 1 + dr, 1 + dc]
                lines.append(f"({j},{i}) -> offset({dr:+d},{dc:+d}), next_j={nj}, weight={w:.17g}")
        return "\n".join(lines) + "\n"


def build_transition_kernels(n_orient: int = 8, n_actions: int = 6,
                             gamma: float = 0.95) -> TransitionKernelSet:
    """Build the heading-by-action kernel set.

    ``gamma`` may be 1.0: the planners run a fixed number of sweeps, so the
    undiscounted finite-horizon problem is well defined and is the setting
    in which the trajectory likelihood is exactly normalised.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ArgumentError(f"gamma must lie in [0, 1], got {gamma}")
    if n_orient != len(HEADINGS):
        raise ArgumentError(f"only {len(HEADINGS)} headings are supported, got {n_orient}")
    if n_actions != len(ACTIONS):
        raise ArgumentError(f"only {len(ACTIONS)} actions are supported, got {n_actions}")

    vi = np.zeros((n_orient, n_actions, 3, 3))
    svf = np.zeros((n_orient, n_actions, 3, 3))
    g = np.zeros((n_orient, n_actions), dtype=np.int64)
    moves = np.zeros((n_orient, n_actions, 3), dtype=np.int64)
    for j in range(n_orient):
        for i, (_, direction) in enumerate(ACTIONS):
            nj = next_orientation(j, i, n_orient)
            dr, dc = displacement(nj, direction)
            vi[j, i, 1 + dr, 1 + dc] = gamma
            svf[j, i, 1 - dr, 1 - dc] = 1.0
            g[j, i] = nj
            moves[j, i] = (dr, dc, nj)
    for arr in (vi, svf, g, moves):
        arr.setflags(write=False)
    return TransitionKernelSet(vi=vi, svf=svf, g=g, gamma=float(gamma), moves=moves)


def heading_from_move(dr: int, dc: int) -> int:
    """Heading index whose unit displacement is (dr, dc)."""
    try:
        return HEADINGS.index((int(dr), int(dc)))
    except ValueError:
        raise ArgumentError(f"({dr}, {dc}) is not a unit heading") from None

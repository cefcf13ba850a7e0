"""Synthetic road scenes and planner-generated demonstrations.

A scene is a horizontal road band crossing the map from West to East,
flanked by vegetation.  Pits (bowl-shaped depressions) sit on the road.
Four behaviours differ only in how the hidden ground-truth cost treats
pits:

* ``E1`` no pits: stay on the road.
* ``E2`` pits are as bad as vegetation: drive around them.
* ``E3`` pits are mildly costly: avoid them unless a trench blocks the road.
* ``E4`` pits are cheaper than road: drive through them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArgumentError, PlanningError
from .grid_mdp import GridShape, build_transition_kernels
from .planner_eval import greedy_plan
from .soft_vi import soft_value_iteration
from .trajectory import Trajectory, validate_trajectory

BEHAVIORS = ("E1", "E2", "E3", "E4")

# cell labels
ROAD, VEGETATION, PIT, OBSTACLE, MISSING = 0, 1, 2, 3, 4

ROAD_COST = 1.0
VEGETATION_COST = 50.0
PIT_COST = {"E1": 50.0, "E2": 50.0, "E3": 3.0, "E4": 0.2}

#: the demo planner runs soft value iteration on ``-SHARPNESS * cost``; a
#: large factor makes the soft optimum follow the cheapest path
SHARPNESS = 10.0
DEMO_HORIZON = 150


@dataclass(frozen=True)
class SceneSpec:
    shape: GridShape = field(default_factory=lambda: GridShape(32, 32))
    road_width_cells: int = 8
    n_positive_obstacles: int = 3
    n_pits: int = 2
    pit_depth_m: float = 0.8
    vegetation_height_m: float = 1.5
    behavior: str = "E2"
    seed: int = 0

    def __post_init__(self):
        h, w = self.shape.dims
        if self.behavior not in BEHAVIORS:
            raise ArgumentError(f"behavior must be one of {BEHAVIORS}, got {self.behavior!r}")
        if not 3 <= self.road_width_cells <= h - 4:
            raise ArgumentError(f"road width {self.road_width_cells} does not fit a {h}-row grid")
        if w < 16:
            raise ArgumentError(f"scenes need at least 16 columns, got {w}")
        if self.n_pits < 0 or self.n_positive_obstacles < 0:
            raise ArgumentError("obstacle counts must be non-negative")
        if self.behavior == "E1" and self.n_pits:
            raise ArgumentError("E1 scenes have no pits")
        if self.behavior == "E3" and self.n_pits < 1:
            raise ArgumentError("E3 scenes need at least one pit (the blocking trench)")
        if self.behavior in ("E2", "E3") and _pit_span(self.road_width_cells) >= self.road_width_cells - 2:
            raise ArgumentError(f"pits would be as wide as the {self.road_width_cells}-cell road")
        if not self.pit_depth_m > 0 or not self.vegetation_height_m > 0:
            raise ArgumentError("pit depth and vegetation height must be positive")


@dataclass
class Scene:
    features: np.ndarray   # (3, H, W): height, gradient magnitude, mask
    gt_cost: np.ndarray    # (H, W), hidden from the learner
    labels: np.ndarray     # (H, W) cell classes
    start: tuple           # (row, col, heading)
    goal: tuple            # (row, col)


@dataclass
class DemoSample:
    scene: np.ndarray
    trajectory: Trajectory
    start: tuple
    goal: tuple
    behavior: str = ""
    seed: int = 0
    labels: np.ndarray | None = None
    resolution_m: float = 0.25


def _pit_radius(road_width):
    """Cross-road semi-axis of a pit bowl, scaled to the road width."""
    return max(1.5, 0.3 * road_width)


def _pit_span(road_width):
    # cells with normalised radius^2 <= 0.5 form the pit floor
    return int(np.ceil(2 * _pit_radius(road_width) * np.sqrt(0.5)))


def generate_scene(spec: SceneSpec) -> Scene:
    rng = np.random.default_rng(spec.seed)
    h, w = spec.shape.dims
    rows, cols = np.mgrid[0:h, 0:w]
    half = spec.road_width_cells / 2.0
    margin = int(np.ceil(half)) + 1
    center = int(rng.integers(margin, h - margin))
    top = center - spec.road_width_cells // 2
    road = (rows >= top) & (rows < top + spec.road_width_cells)

    labels = np.where(road, ROAD, VEGETATION)
    height = np.where(road, rng.normal(0.0, 0.02, (h, w)),
                      spec.vegetation_height_m + rng.normal(0.0, 0.1, (h, w)))

    # rocks sit in the vegetation along the road edges
    for _ in range(spec.n_positive_obstacles):
        side = top - 2 if rng.random() < 0.5 else top + spec.road_width_cells + 1
        r0, c0 = np.clip(side, 0, h - 1), rng.uniform(0, w)
        bump = np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / 2.0)
        rock = (bump > 0.3) & ~road
        height = np.where(~road, height + 1.0 * bump, height)
        labels = np.where(rock, OBSTACLE, labels)

    pit_floor = np.zeros((h, w), bool)
    bowl = np.zeros((h, w))
    b = _pit_radius(spec.road_width_cells)
    col_lo, col_hi = 6, w - 7
    slots = np.linspace(col_lo, col_hi, spec.n_pits + 2)[1:-1] if spec.n_pits else []
    for idx, slot in enumerate(slots):
        a = rng.uniform(2.0, 3.0)
        c0 = slot + rng.uniform(-1.0, 1.0)
        if spec.behavior == "E3" and idx == 0:
            # trench across the whole road
            d2 = ((cols - c0) / a) ** 2
        else:
            # pits straddle the driving line so demos have to react to them
            r0 = center - 0.5 + rng.uniform(-1.0, 1.0)
            d2 = ((cols - c0) / a) ** 2 + ((rows - r0) / b) ** 2
        inside = (d2 < 1.0) & road
        bowl = np.where(inside, np.minimum(bowl, -spec.pit_depth_m * (1.0 - d2)), bowl)
        pit_floor |= (d2 <= 0.5) & road
    height = np.where(bowl < 0, bowl, height)
    labels = np.where(pit_floor, PIT, labels)

    # unobserved patches in the vegetation read as height 0 with mask 0
    missing = (rng.random((h, w)) < 0.03) & ~road
    mask = (~missing).astype(np.float64)
    height = np.where(missing, 0.0, height)
    labels = np.where(missing, MISSING, labels)

    grad = np.hypot(*np.gradient(height))
    features = np.stack([height, grad, mask])

    gt = np.full((h, w), VEGETATION_COST)
    gt[labels == ROAD] = ROAD_COST
    gt[labels == PIT] = PIT_COST[spec.behavior]
    start = (center, 1, 0)
    goal = (center, w - 2)
    return Scene(features, gt, labels, start, goal)


def synthesize_demo(scene: Scene, kernels=None, horizon: int = DEMO_HORIZON) -> Trajectory:
    """Greedy decode of the soft-optimal policy for the hidden cost."""
    if kernels is None:
        kernels = build_transition_kernels(gamma=1.0)
    _, policy = soft_value_iteration(-SHARPNESS * scene.gt_cost, kernels, scene.goal, horizon)
    traj = greedy_plan(policy, kernels, scene.start, scene.goal, horizon)
    validate_trajectory(traj, kernels, scene.gt_cost.shape, scene.start, scene.goal)
    return traj


def make_dataset(behavior: str, count: int, base_seed: int = 0, size: int = 32,
                 **spec_kwargs) -> list[DemoSample]:
    """``count`` scenes with demos; scene ``i`` uses seed ``base_seed + i``."""
    if int(count) < 1:
        raise ArgumentError(f"count must be >= 1, got {count}")
    spec_kwargs.setdefault("n_pits", 0 if behavior == "E1" else 2)
    base = SceneSpec(shape=GridShape(size, size), behavior=behavior, **spec_kwargs)
    kernels = build_transition_kernels(gamma=1.0)
    out = []
    for i in range(int(count)):
        spec = replace(base, seed=base_seed + i)
        scene = generate_scene(spec)
        try:
            traj = synthesize_demo(scene, kernels)
        except PlanningError as exc:
            raise PlanningError(f"scene seed {spec.seed}: {exc}") from None
        out.append(DemoSample(scene.features, traj, scene.start, scene.goal, behavior,
                              spec.seed, scene.labels, spec.shape.resolution_m))
    return out

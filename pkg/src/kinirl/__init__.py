"""Maximum-entropy deep inverse RL for traversability cost maps on a
heading-augmented grid, with vehicle kinematics baked into 3x3 kernels."""

from .errors import (ArgumentError, ConfigError, DataError, FormatError, KinIRLError,
                     NumericError, PlanningError, StateError)
from .grid_mdp import GridShape, TransitionKernelSet, build_transition_kernels
from .soft_vi import V_MIN, reference_value_iteration, soft_value_iteration
from .svf import expected_svf, monte_carlo_svf, one_hot_init, reference_expected_svf
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "ConfigError", "DataError", "FormatError", "KinIRLError", "NumericError",
    "PlanningError", "StateError", "GridShape", "TransitionKernelSet", "build_transition_kernels",
    "V_MIN", "reference_value_iteration", "soft_value_iteration", "expected_svf",
    "monte_carlo_svf", "one_hot_init", "reference_expected_svf", "Trajectory",
]

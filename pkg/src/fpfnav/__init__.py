"""Formation potential fields for multi-robot formation design and navigation."""

from .dynamics import IntegratorConfig, World, WorldState, run, step
from .errors import (
    ConfigError,
    DegenerateDistanceError,
    DivergenceError,
    FpfNavError,
    InfeasibleSeedingError,
    MalformedParameterError,
    MalformedRangeError,
    NoEquilibriumError,
)
from .fields import Goal, InterRobotParams, Obstacle, Robot, VirtualAgent
from .fpf_core import (
    DesignMapEntry,
    FpfParams,
    design_map,
    eval_fpf,
    formation_radius,
    fpf_force,
    solve_scaled_radius,
    validate_params,
)
from .scenario import RunResult, Scenario, assemble, navigate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateDistanceError",
    "DesignMapEntry",
    "DivergenceError",
    "FpfNavError",
    "FpfParams",
    "Goal",
    "InfeasibleSeedingError",
    "IntegratorConfig",
    "InterRobotParams",
    "MalformedParameterError",
    "MalformedRangeError",
    "NoEquilibriumError",
    "Obstacle",
    "Robot",
    "RunResult",
    "Scenario",
    "VirtualAgent",
    "World",
    "WorldState",
    "assemble",
    "design_map",
    "eval_fpf",
    "formation_radius",
    "fpf_force",
    "navigate",
    "run",
    "solve_scaled_radius",
    "step",
    "validate_params",
]

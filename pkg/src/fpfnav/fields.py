"""Goal, obstacle and inter-robot fields, and the composite forces built on them.

Every force here is the negative gradient of a named potential, which the
tests check against central differences. Per-item functions (``robot_force``
and friends) are the reference path; :func:`robot_forces` is the vectorised
path the integrator uses and must agree with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateDistanceError, MalformedParameterError
from .fpf_core import FpfParams, fpf_force, radial_force, radial_potential


@dataclass(frozen=True)
class Robot:
    id: int
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    body_radius: float = 0.016


@dataclass(frozen=True)
class VirtualAgent:
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Goal:
    position: tuple[float, float]
    lam: float = 1.0
    # pull with -lam * |dq| * dq (gradient of a cubic bowl) instead of the
    # quadratic bowl's -lam * dq; kept for comparison runs only
    literal_attraction: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise MalformedParameterError(f"goal lambda must be > 0, got {self.lam}")


@dataclass(frozen=True, eq=False)
class Obstacle:
    source_points: np.ndarray
    k_r: float = 1.0
    sigma_o: float = 2.0
    name: str = ""

    def __post_init__(self):
        pts = np.array(self.source_points, dtype=float).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "source_points", pts)
        if len(pts) == 0:
            raise MalformedParameterError("obstacle needs at least one source point")
        if not self.k_r > 0:
            raise MalformedParameterError(f"obstacle k_r must be > 0, got {self.k_r}")
        if not self.sigma_o > 0:
            raise MalformedParameterError(f"obstacle sigma_o must be > 0, got {self.sigma_o}")

    def __eq__(self, other):
        if not isinstance(other, Obstacle):
            return NotImplemented
        return (
            self.k_r == other.k_r
            and self.sigma_o == other.sigma_o
            and self.name == other.name
            and np.array_equal(self.source_points, other.source_points)
        )

    __hash__ = None


def polyline_sources(vertices: Sequence[Sequence[float]], spacing: float) -> np.ndarray:
    """Discretise a polyline into point sources no further than ``spacing`` apart.

    Both end points of every segment are included; shared vertices appear once.
    """
    if not spacing > 0:
        raise MalformedParameterError(f"spacing must be > 0, got {spacing}")
    verts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(verts) == 1:
        return verts.copy()
    points = [verts[0]]
    for a, b in zip(verts[:-1], verts[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing - 1e-9)))
        for k in range(1, n + 1):
            points.append(a + (b - a) * (k / n))
    return np.array(points)


@dataclass(frozen=True)
class InterRobotParams:
    k_a: float = 1.0
    sigma_r: float = 5.0

    def __post_init__(self):
        if not self.k_a > 0:
            raise MalformedParameterError(f"k_a must be > 0, got {self.k_a}")
        if not self.sigma_r > 0:
            raise MalformedParameterError(f"sigma_r must be > 0, got {self.sigma_r}")


def _separation(a, b, what):
    delta = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = math.hypot(delta[0], delta[1])
    if d == 0.0:
        raise DegenerateDistanceError(f"{what}: coincident positions {tuple(a)}", pair=what)
    return delta, d


# --- potentials ---------------------------------------------------------------


def inter_robot_potential(p: InterRobotParams, q_i, q_j) -> float:
    d = math.hypot(q_i[0] - q_j[0], q_i[1] - q_j[1])
    return p.k_a * math.exp(-p.sigma_r * d)


def obstacle_potential(obs: Obstacle, q) -> float:
    d = np.hypot(*(np.asarray(q, dtype=float) - obs.source_points).T)
    return float(np.sum(obs.k_r * np.exp(-obs.sigma_o * d)))


def goal_potential(g: Goal, q_v) -> float:
    dx, dy = q_v[0] - g.position[0], q_v[1] - g.position[1]
    return 0.5 * g.lam * (dx * dx + dy * dy)


def virtual_agent_potential(g: Goal, obstacles: Sequence[Obstacle], q_v) -> float:
    return goal_potential(g, q_v) + sum(obstacle_potential(o, q_v) for o in obstacles)


def robot_potential(fpf: FpfParams, irp: InterRobotParams, obstacles, positions, i: int, q_v) -> float:
    """Total potential felt by robot ``i``: formation field, robot repulsion, obstacles."""
    q = positions[i]
    u = float(radial_potential(fpf, math.hypot(q[0] - q_v[0], q[1] - q_v[1])))
    u += sum(inter_robot_potential(irp, q, positions[j]) for j in range(len(positions)) if j != i)
    u += sum(obstacle_potential(o, q) for o in obstacles)
    return u


# --- forces -------------------------------------------------------------------


def inter_robot_force(p: InterRobotParams, q_i, q_j) -> np.ndarray:
    """Repulsion on robot i from robot j, pointing from j to i."""
    delta, d = _separation(q_i, q_j, "robot pair")
    return p.k_a * p.sigma_r * math.exp(-p.sigma_r * d) * delta / d


def obstacle_force(obs: Obstacle, q) -> np.ndarray:
    delta = np.asarray(q, dtype=float) - obs.source_points
    d = np.hypot(delta[:, 0], delta[:, 1])
    if np.any(d == 0.0):
        k = int(np.flatnonzero(d == 0.0)[0])
        raise DegenerateDistanceError(
            f"position {tuple(q)} coincides with source point {k} of obstacle {obs.name!r}",
            pair=("obstacle", obs.name, k),
        )
    mag = obs.k_r * obs.sigma_o * np.exp(-obs.sigma_o * d) / d
    return (mag[:, None] * delta).sum(axis=0)


def goal_force(g: Goal, q_v) -> np.ndarray:
    delta = np.asarray(q_v, dtype=float) - np.asarray(g.position, dtype=float)
    if g.literal_attraction:
        return -g.lam * math.hypot(delta[0], delta[1]) * delta
    return -g.lam * delta


def virtual_agent_force(g: Goal, obstacles: Sequence[Obstacle], q_v) -> np.ndarray:
    f = goal_force(g, q_v)
    for o in obstacles:
        f = f + obstacle_force(o, q_v)
    return f


def robot_force(fpf: FpfParams, irp: InterRobotParams, obstacles, positions, i: int, q_v) -> np.ndarray:
    """Force on robot ``i``. The goal does not act on robots directly."""
    q = positions[i]
    f = fpf_force(fpf, q, q_v)
    for j in range(len(positions)):
        if j == i:
            continue
        try:
            f = f + inter_robot_force(irp, q, positions[j])
        except DegenerateDistanceError:
            raise DegenerateDistanceError(
                f"robots {i} and {j} coincide at {tuple(q)}", pair=(i, j)
            ) from None
    for o in obstacles:
        f = f + obstacle_force(o, q)
    return f


# --- vectorised path ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SourceCloud:
    """All obstacle source points flattened, with per-point gains."""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    k_r: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma_o: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def from_obstacles(cls, obstacles: Sequence[Obstacle]) -> "SourceCloud":
        if not obstacles:
            return cls()
        pts = np.concatenate([o.source_points for o in obstacles])
        k_r = np.concatenate([np.full(len(o.source_points), o.k_r) for o in obstacles])
        s_o = np.concatenate([np.full(len(o.source_points), o.sigma_o) for o in obstacles])
        return cls(pts, k_r, s_o)

    def __len__(self):
        return len(self.points)

    def forces(self, positions: np.ndarray) -> np.ndarray:
        """Summed obstacle force at each row of ``positions``."""
        if len(self.points) == 0:
            return np.zeros_like(positions)
        delta = positions[:, None, :] - self.points[None, :, :]
        d = np.sqrt(delta[..., 0] ** 2 + delta[..., 1] ** 2)
        if np.any(d == 0.0):
            i, k = np.argwhere(d == 0.0)[0]
            raise DegenerateDistanceError(
                f"body {i} coincides with obstacle source point {k}", pair=(int(i), ("source", int(k)))
            )
        mag = self.k_r * self.sigma_o * np.exp(-self.sigma_o * d) / d
        return np.einsum("ij,ijk->ik", mag, delta)


def robot_forces(fpf: FpfParams, irp: InterRobotParams, cloud: SourceCloud, positions: np.ndarray, q_v) -> np.ndarray:
    """Force on every robot at once; rows follow ``positions``."""
    positions = np.asarray(positions, dtype=float)
    q_v = np.asarray(q_v, dtype=float)
    rel = positions - q_v
    d_v = np.sqrt(rel[:, 0] ** 2 + rel[:, 1] ** 2)
    safe = np.where(d_v > 0.0, d_v, 1.0)
    f = (np.where(d_v > 0.0, radial_force(fpf, d_v), 0.0) / safe)[:, None] * rel

    n = len(positions)
    if n > 1:
        delta = positions[:, None, :] - positions[None, :, :]
        d = np.sqrt(delta[..., 0] ** 2 + delta[..., 1] ** 2)
        np.fill_diagonal(d, np.inf)
        if np.any(d == 0.0):
            i, j = np.argwhere(d == 0.0)[0]
            raise DegenerateDistanceError(f"robots {i} and {j} coincide", pair=(int(i), int(j)))
        mag = irp.k_a * irp.sigma_r * np.exp(-irp.sigma_r * d) / d
        f = f + np.einsum("ij,ijk->ik", mag, delta)

    if len(cloud):
        f = f + cloud.forces(positions)
    return f

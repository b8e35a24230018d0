"""Experiments: seeding, formation assembly, navigation and the metrics on top."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dynamics import ASSEMBLE, REACH_GOAL, IntegratorConfig, Trajectory, World, WorldState, run
from .errors import DegenerateDistanceError, InfeasibleSeedingError, MalformedParameterError
from .fields import Goal, InterRobotParams, Obstacle
from .fpf_core import FpfParams, formation_radius, require_valid

# rejection-sampling attempts allowed per robot
SEEDING_BUDGET = 10_000


@dataclass(frozen=True)
class Seeding:
    low: tuple[float, float]
    high: tuple[float, float]
    min_separation: float
    seed: int

    def __post_init__(self):
        if not (self.high[0] > self.low[0] and self.high[1] > self.low[1]):
            raise MalformedParameterError(f"seeding box is empty: low={self.low}, high={self.high}")
        if not self.min_separation >= 0:
            raise MalformedParameterError("min_separation must be >= 0")


@dataclass(frozen=True)
class Safety:
    min_robot_clearance: float
    min_obstacle_clearance: float

    def __post_init__(self):
        if not (self.min_robot_clearance > 0 and self.min_obstacle_clearance > 0):
            raise MalformedParameterError("safety clearances must be > 0")


@dataclass(frozen=True)
class FormationTolerance:
    radius_rel: float = 0.01  # radii within this fraction of the design radius
    gap_deg: float = 1.0  # angular gaps within this many degrees of 360/N


@dataclass(frozen=True)
class Scenario:
    fpf: FpfParams
    inter_robot: InterRobotParams
    n_robots: int
    seeding: Seeding
    goal: Goal
    integrator: IntegratorConfig
    safety: Safety
    virtual_start: tuple[float, float] = (0.0, 0.0)
    obstacles: tuple[Obstacle, ...] = ()
    goal_tolerance: float = 0.05
    body_radius: Optional[float] = None  # None -> 2% of the formation radius
    formation: FormationTolerance = field(default_factory=FormationTolerance)
    name: str = ""
    notes: str = ""

    def __post_init__(self):
        require_valid(self.fpf)
        if not (isinstance(self.n_robots, int) and self.n_robots >= 1):
            raise MalformedParameterError(f"n_robots must be an integer >= 1, got {self.n_robots}")
        if not self.goal_tolerance > 0:
            raise MalformedParameterError("goal_tolerance must be > 0")
        if self.body_radius is not None and not self.body_radius > 0:
            raise MalformedParameterError("body_radius must be > 0")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        _check_seeding_capacity(self.seeding, self.n_robots)

    @property
    def world_radius(self) -> float:
        return formation_radius(self.fpf)

    @property
    def robot_body_radius(self) -> float:
        if self.body_radius is None:
            return 0.02 * self.world_radius
        return self.body_radius

    def world(self) -> World:
        return World(self.fpf, self.inter_robot, self.goal, self.obstacles)

    def assembly_world(self) -> World:
        # the virtual agent is held at its start while the robots organise
        return World(self.fpf, self.inter_robot, replace(self.goal, position=tuple(self.virtual_start)), ())

    @property
    def assembly_threshold(self) -> float:
        """RMS radius error below which a formation counts as assembled."""
        return self.formation.radius_rel * self.world_radius


@dataclass(frozen=True)
class Regularity:
    radii: np.ndarray
    angular_gaps_sorted: np.ndarray  # degrees, between successive polar angles


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    kind: str  # "robot" or "obstacle"
    pair: tuple  # (robot_id, robot_id) or (robot_id, (obstacle_index, source_index))
    distance: float


@dataclass(frozen=True, eq=False)
class Metrics:
    formation_rms_error: np.ndarray
    min_inter_robot_distance: np.ndarray  # NaN with a single robot
    min_obstacle_clearance: np.ndarray  # surface clearance; NaN without obstacles
    per_robot_force: np.ndarray  # (T, N, 2)

    def __len__(self):
        return len(self.formation_rms_error)


@dataclass(frozen=True, eq=False)
class RunResult:
    trajectory: Trajectory
    collision_events: list[CollisionEvent]
    metrics: Metrics
    termination: str
    wall_time: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.trajectory) - 1


@dataclass(frozen=True)
class ForceTrace:
    robot_id: int
    times: np.ndarray
    fx: np.ndarray
    fy: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.fx, self.fy)

    def __len__(self):
        return len(self.times)


def _check_seeding_capacity(seeding: Seeding, n: int) -> None:
    # disks of diameter min_sep packed at ~0.9 density into the box grown by min_sep/2
    s = seeding.min_separation
    width = seeding.high[0] - seeding.low[0] + s
    height = seeding.high[1] - seeding.low[1] + s
    needed = n * math.pi * s * s / 4.0 / 0.9
    if needed > width * height:
        raise InfeasibleSeedingError(
            f"box of {width - s:g} x {height - s:g} cannot hold {n} points {s:g} apart"
        )


def seed_initial_positions(seeding: Seeding, n: int) -> np.ndarray:
    """Draw ``n`` points in the box, pairwise at least ``min_separation`` apart."""
    _check_seeding_capacity(seeding, n)
    rng = np.random.default_rng(seeding.seed)
    low = np.asarray(seeding.low, dtype=float)
    high = np.asarray(seeding.high, dtype=float)
    points = []
    attempts = 0
    while len(points) < n:
        if attempts >= SEEDING_BUDGET * n:
            raise InfeasibleSeedingError(
                f"placed only {len(points)} of {n} points after {attempts} draws"
            )
        attempts += 1
        cand = rng.uniform(low, high)
        if all(math.hypot(*(cand - p)) >= seeding.min_separation for p in points):
            points.append(cand)
    return np.array(points)


def polygon_regularity(positions, center) -> Regularity:
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise MalformedParameterError("need at least two positions")
    rel = pts - np.asarray(center, dtype=float)
    radii = np.hypot(rel[:, 0], rel[:, 1])
    if np.any(radii == 0.0):
        raise DegenerateDistanceError("a position coincides with the centre")
    angles = np.sort(np.degrees(np.arctan2(rel[:, 1], rel[:, 0])))
    gaps = np.diff(np.append(angles, angles[0] + 360.0))
    return Regularity(radii, gaps)


def formation_ok(state: WorldState, scenario: Scenario) -> bool:
    """Radii and angular gaps of ``state`` are within the scenario tolerances."""
    r_world = scenario.world_radius
    radii = np.hypot(*(state.positions - state.va_position).T)
    if np.any(np.abs(radii - r_world) > scenario.formation.radius_rel * r_world):
        return False
    if state.n_robots < 2:
        return True
    reg = polygon_regularity(state.positions, state.va_position)
    return bool(np.all(np.abs(reg.angular_gaps_sorted - 360.0 / state.n_robots) <= scenario.formation.gap_deg))


def check_collisions(state: WorldState, obstacles: Sequence[Obstacle], safety: Safety) -> list[CollisionEvent]:
    """Safety violations in one state; thresholds are strict (equal is safe)."""
    events = []
    n = state.n_robots
    for a in range(n):
        for b in range(a + 1, n):
            d = math.hypot(*(state.positions[a] - state.positions[b]))
            limit = state.body_radii[a] + state.body_radii[b] + safety.min_robot_clearance
            if d < limit:
                events.append(CollisionEvent(state.time, "robot", (state.ids[a], state.ids[b]), d))
    for a in range(n):
        limit = state.body_radii[a] + safety.min_obstacle_clearance
        for oi, obs in enumerate(obstacles):
            d = np.hypot(*(state.positions[a] - obs.source_points).T)
            for k in np.flatnonzero(d < limit):
                events.append(CollisionEvent(state.time, "obstacle", (state.ids[a], (oi, int(k))), float(d[k])))
    return events


def scan_collisions(traj: Trajectory, obstacles: Sequence[Obstacle], safety: Safety) -> list[CollisionEvent]:
    """:func:`check_collisions` over every state, vectorised over time."""
    events = []
    pos = traj.positions
    radii = traj.body_radii
    n = pos.shape[1]
    for a in range(n):
        for b in range(a + 1, n):
            d = np.hypot(*(pos[:, a] - pos[:, b]).T)
            limit = radii[a] + radii[b] + safety.min_robot_clearance
            for k in np.flatnonzero(d < limit):
                events.append(CollisionEvent(float(traj.times[k]), "robot", (traj.ids[a], traj.ids[b]), float(d[k])))
    for oi, obs in enumerate(obstacles):
        for a in range(n):
            limit = radii[a] + safety.min_obstacle_clearance
            d = _distances(pos[:, a], obs.source_points)
            for k, j in np.argwhere(d < limit):
                events.append(
                    CollisionEvent(float(traj.times[k]), "obstacle", (traj.ids[a], (oi, int(j))), float(d[k, j]))
                )
    events.sort(key=lambda e: (e.time, e.kind, str(e.pair)))
    return events


def _distances(track: np.ndarray, points: np.ndarray) -> np.ndarray:
    delta = track[:, None, :] - points[None, :, :]
    return np.sqrt(delta[..., 0] ** 2 + delta[..., 1] ** 2)


def compute_metrics(traj: Trajectory, obstacles: Sequence[Obstacle], world_radius: float) -> Metrics:
    """Per-step formation and safety metrics; a pure function of the trajectory."""
    rel = traj.positions - traj.va_positions[:, None, :]
    radii = np.sqrt(rel[..., 0] ** 2 + rel[..., 1] ** 2)
    rms = np.sqrt(np.mean((radii - world_radius) ** 2, axis=1))

    t, n = traj.positions.shape[:2]
    if n > 1:
        delta = traj.positions[:, :, None, :] - traj.positions[:, None, :, :]
        d = np.sqrt(delta[..., 0] ** 2 + delta[..., 1] ** 2)
        iu = np.triu_indices(n, 1)
        min_pair = d[:, iu[0], iu[1]].min(axis=1)
    else:
        min_pair = np.full(t, np.nan)

    if obstacles:
        pts = np.concatenate([o.source_points for o in obstacles])
        clearance = np.full(t, np.inf)
        for a in range(n):
            clearance = np.minimum(clearance, _distances(traj.positions[:, a], pts).min(axis=1) - traj.body_radii[a])
    else:
        clearance = np.full(t, np.nan)
    return Metrics(rms, min_pair, clearance, traj.robot_forces.copy())


def _result(outcome, obstacles, scenario: Scenario, started: float) -> RunResult:
    traj = outcome.trajectory
    return RunResult(
        trajectory=traj,
        collision_events=scan_collisions(traj, obstacles, scenario.safety),
        metrics=compute_metrics(traj, obstacles, scenario.world_radius),
        termination=outcome.termination,
        wall_time=time.perf_counter() - started,
    )


def initial_state(s: Scenario) -> WorldState:
    positions = seed_initial_positions(s.seeding, s.n_robots)
    n = s.n_robots
    return WorldState(
        time=0.0,
        va_position=s.virtual_start,
        va_velocity=(0.0, 0.0),
        positions=positions,
        velocities=np.zeros((n, 2)),
        ids=range(1, n + 1),
        body_radii=np.full(n, s.robot_body_radius),
    )


def assemble(s: Scenario) -> RunResult:
    """Seed the robots and let them organise around the stationary virtual agent.

    Obstacles are ignored. Termination is ``"converged"`` or ``"max_steps"``;
    check :func:`formation_ok` on the final state for the polygon itself.
    """
    started = time.perf_counter()
    outcome = run(initial_state(s), s.assembly_world(), s.integrator, ASSEMBLE)
    return _result(outcome, (), s, started)


def navigate(s: Scenario, assembled: WorldState) -> RunResult:
    """Drive the assembled formation to the goal through the scenario's obstacles."""
    started = time.perf_counter()
    outcome = run(assembled, s.world(), s.integrator, REACH_GOAL, s.goal_tolerance)
    return _result(outcome, s.obstacles, s, started)


def force_trace(result: RunResult, robot_id: int) -> ForceTrace:
    ids = result.trajectory.ids
    if robot_id not in ids:
        raise KeyError(f"unknown robot id {robot_id}; have {list(ids)}")
    col = ids.index(robot_id)
    f = result.metrics.per_robot_force[:, col]
    return ForceTrace(robot_id, result.trajectory.times.copy(), f[:, 0].copy(), f[:, 1].copy())


def obstacle_proximity(result: RunResult, obstacles: Sequence[Obstacle], reach: float = 3.0) -> np.ndarray:
    """Boolean per step: some robot lies within ``reach / sigma_o`` of a source point."""
    traj = result.trajectory
    near = np.zeros(len(traj), dtype=bool)
    for obs in obstacles:
        for a in range(traj.positions.shape[1]):
            d = _distances(traj.positions[:, a], obs.source_points).min(axis=1)
            near |= d < reach / obs.sigma_o
    return near


@dataclass(frozen=True)
class Phases:
    """Step masks splitting a navigation run around its obstacle encounter."""

    cruise: np.ndarray  # before any robot first comes near an obstacle
    passage: np.ndarray  # some robot near an obstacle
    after: np.ndarray  # after the last step with a robot near an obstacle


def navigation_phases(result: RunResult, obstacles: Sequence[Obstacle], reach: float = 3.0) -> Phases:
    near = obstacle_proximity(result, obstacles, reach)
    idx = np.arange(len(near))
    if not near.any():
        return Phases(np.ones_like(near), near, np.zeros_like(near))
    first, last = np.flatnonzero(near)[[0, -1]]
    return Phases(idx < first, near, idx > last)

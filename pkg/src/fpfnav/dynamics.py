"""Damped gradient-flow integration of the virtual agent and its robots."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DivergenceError, MalformedParameterError
from .fields import (
    Goal,
    InterRobotParams,
    Obstacle,
    Robot,
    SourceCloud,
    VirtualAgent,
    goal_force,
    robot_forces,
)
from .fpf_core import FpfParams

ASSEMBLE = "assemble"
REACH_GOAL = "reach_goal"


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.01
    damping_va: Optional[float] = None  # None -> critical damping of the goal spring
    damping_robot: float = 2.0
    max_steps: int = 1_000_000
    speed_tolerance: float = 1e-4
    force_tolerance: float = 1e-4

    def __post_init__(self):
        if not self.dt > 0:
            raise MalformedParameterError(f"dt must be > 0, got {self.dt}")
        if self.damping_va is not None and not self.damping_va >= 0:
            raise MalformedParameterError(f"damping_va must be >= 0, got {self.damping_va}")
        if not self.damping_robot >= 0:
            raise MalformedParameterError(f"damping_robot must be >= 0, got {self.damping_robot}")
        if not (isinstance(self.max_steps, int) and self.max_steps > 0):
            raise MalformedParameterError(f"max_steps must be a positive integer, got {self.max_steps}")
        if not (self.speed_tolerance > 0 and self.force_tolerance > 0):
            raise MalformedParameterError("tolerances must be > 0")

    def va_damping(self, goal: Goal) -> float:
        if self.damping_va is None:
            return 2.0 * math.sqrt(goal.lam)
        return self.damping_va


@dataclass(frozen=True, eq=False)
class World:
    """Everything besides the state that the forces depend on."""

    fpf: FpfParams
    inter_robot: InterRobotParams
    goal: Goal
    obstacles: tuple[Obstacle, ...] = ()

    @cached_property
    def cloud(self) -> SourceCloud:
        return SourceCloud.from_obstacles(self.obstacles)


@dataclass(frozen=True, eq=False)
class WorldState:
    """Virtual agent plus N robots at one instant, stored as arrays.

    Row ``i`` of ``positions``/``velocities`` is the robot with ``ids[i]``;
    the order never changes during a run.
    """

    time: float
    va_position: np.ndarray
    va_velocity: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    ids: tuple[int, ...]
    body_radii: np.ndarray

    def __post_init__(self):
        for name in ("va_position", "va_velocity", "positions", "velocities", "body_radii"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        n = len(self.ids)
        if n < 1:
            raise MalformedParameterError("a world state needs at least one robot")
        if self.positions.shape != (n, 2) or self.velocities.shape != (n, 2):
            raise MalformedParameterError("positions and velocities must be (N, 2)")
        if len(set(self.ids)) != n:
            raise MalformedParameterError(f"robot ids must be unique, got {self.ids}")
        if np.any(self.body_radii <= 0):
            raise MalformedParameterError("body radii must be > 0")

    @classmethod
    def from_bodies(cls, time: float, virtual_agent: VirtualAgent, robots: Sequence[Robot]) -> "WorldState":
        return cls(
            time=time,
            va_position=virtual_agent.position,
            va_velocity=virtual_agent.velocity,
            positions=[r.position for r in robots],
            velocities=[r.velocity for r in robots],
            ids=[r.id for r in robots],
            body_radii=[r.body_radius for r in robots],
        )

    @property
    def n_robots(self) -> int:
        return len(self.ids)

    @property
    def virtual_agent(self) -> VirtualAgent:
        return VirtualAgent(tuple(self.va_position), tuple(self.va_velocity))

    @property
    def robots(self) -> list[Robot]:
        return [
            Robot(rid, tuple(p), tuple(v), float(b))
            for rid, p, v, b in zip(self.ids, self.positions, self.velocities, self.body_radii)
        ]

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.va_position).all()
            and np.isfinite(self.va_velocity).all()
            and np.isfinite(self.positions).all()
            and np.isfinite(self.velocities).all()
        )


@dataclass(frozen=True)
class Forces:
    virtual_agent: np.ndarray
    robots: np.ndarray


def compute_forces(state: WorldState, world: World) -> Forces:
    f_va = goal_force(world.goal, state.va_position)
    if len(world.cloud):
        f_va = f_va + world.cloud.forces(state.va_position[None, :])[0]
    f_r = robot_forces(world.fpf, world.inter_robot, world.cloud, state.positions, state.va_position)
    return Forces(f_va, f_r)


def _advance(state: WorldState, forces: Forces, world: World, cfg: IntegratorConfig) -> WorldState:
    dt = cfg.dt
    c_va = cfg.va_damping(world.goal)
    va_vel = state.va_velocity + (forces.virtual_agent - c_va * state.va_velocity) * dt
    va_pos = state.va_position + va_vel * dt
    vel = state.velocities + (forces.robots - cfg.damping_robot * state.velocities) * dt
    pos = state.positions + vel * dt
    return WorldState(state.time + dt, va_pos, va_vel, pos, vel, state.ids, state.body_radii)


def step(state: WorldState, world: World, cfg: IntegratorConfig, forces: Optional[Forces] = None) -> WorldState:
    """Advance one semi-implicit Euler step with unit masses.

    Velocities update first from ``F - c v``, then positions use the new
    velocities. The virtual agent and the robots all read the pre-step state.
    """
    index = int(round(state.time / cfg.dt))
    if forces is None:
        forces = compute_forces(state, world)
    if not (np.isfinite(forces.virtual_agent).all() and np.isfinite(forces.robots).all()):
        raise DivergenceError(f"non-finite force at step {index}", index)
    new = _advance(state, forces, world, cfg)
    if not new.is_finite():
        raise DivergenceError(f"non-finite state after step {index}", index)
    return new


def detect_convergence(state: WorldState, forces: Forces, cfg: IntegratorConfig) -> bool:
    """True when every body is both slow and nearly force-free."""
    return _converged(state.va_velocity, state.velocities, forces.virtual_agent, forces.robots, cfg)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stacked time series of states plus the robot forces at each state."""

    times: np.ndarray
    va_positions: np.ndarray
    va_velocities: np.ndarray
    positions: np.ndarray  # (T, N, 2)
    velocities: np.ndarray  # (T, N, 2)
    robot_forces: np.ndarray  # (T, N, 2)
    va_forces: np.ndarray  # (T, 2)
    ids: tuple[int, ...]
    body_radii: np.ndarray

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> WorldState:
        return WorldState(
            float(self.times[k]),
            self.va_positions[k],
            self.va_velocities[k],
            self.positions[k],
            self.velocities[k],
            self.ids,
            self.body_radii,
        )

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def final(self) -> WorldState:
        return self[len(self) - 1]


@dataclass(frozen=True, eq=False)
class RunOutcome:
    trajectory: Trajectory
    termination: str  # "converged", "goal_reached" or "max_steps"
    steps: int


def run(
    initial: WorldState,
    world: World,
    cfg: IntegratorConfig,
    termination: str = ASSEMBLE,
    epsilon_goal: float = 0.05,
) -> RunOutcome:
    """Integrate until the termination test passes or ``max_steps`` is hit.

    ``termination`` is ``"assemble"`` (stop at convergence) or
    ``"reach_goal"`` (stop when the virtual agent is within ``epsilon_goal``
    of the goal and everything has converged). Hitting ``max_steps`` is an
    outcome, not an error.
    """
    if termination not in (ASSEMBLE, REACH_GOAL):
        raise ValueError(f"unknown termination mode {termination!r}")
    goal = np.asarray(world.goal.position, dtype=float)
    dt = cfg.dt
    c_va = cfg.va_damping(world.goal)
    c_r = cfg.damping_robot
    # same arithmetic as step()/_advance(), on bare arrays to skip per-step objects
    va_q, va_v = initial.va_position.copy(), initial.va_velocity.copy()
    q, v = initial.positions.copy(), initial.velocities.copy()
    t = initial.time
    index0 = int(round(t / dt))

    def forces_at(va_q, q):
        f = compute_forces(_Snapshot(va_q, q), world)
        return f.virtual_agent, f.robots

    f_va, f_r = forces_at(va_q, q)
    rec = {k: [] for k in ("t", "va_q", "va_v", "q", "v", "f_va", "f_r")}

    def record():
        rec["t"].append(t)
        rec["va_q"].append(va_q)
        rec["va_v"].append(va_v)
        rec["q"].append(q)
        rec["v"].append(v)
        rec["f_va"].append(f_va)
        rec["f_r"].append(f_r)

    record()
    reason = "max_steps"
    for n in range(cfg.max_steps + 1):
        if _converged(va_v, v, f_va, f_r, cfg):
            if termination == ASSEMBLE:
                reason = "converged"
                break
            if math.hypot(va_q[0] - goal[0], va_q[1] - goal[1]) < epsilon_goal:
                reason = "goal_reached"
                break
        if n == cfg.max_steps:
            break
        if not (np.isfinite(f_va).all() and np.isfinite(f_r).all()):
            raise DivergenceError(f"non-finite force at step {index0 + n}", index0 + n)
        va_v = va_v + (f_va - c_va * va_v) * dt
        va_q = va_q + va_v * dt
        v = v + (f_r - c_r * v) * dt
        q = q + v * dt
        t = t + dt
        if not (np.isfinite(va_q).all() and np.isfinite(va_v).all() and np.isfinite(q).all() and np.isfinite(v).all()):
            raise DivergenceError(f"non-finite state after step {index0 + n}", index0 + n)
        f_va, f_r = forces_at(va_q, q)
        record()

    traj = Trajectory(
        times=np.array(rec["t"]),
        va_positions=np.array(rec["va_q"]),
        va_velocities=np.array(rec["va_v"]),
        positions=np.array(rec["q"]),
        velocities=np.array(rec["v"]),
        robot_forces=np.array(rec["f_r"]),
        va_forces=np.array(rec["f_va"]),
        ids=initial.ids,
        body_radii=initial.body_radii,
    )
    return RunOutcome(traj, reason, len(traj) - 1)


@dataclass(frozen=True)
class _Snapshot:
    va_position: np.ndarray
    positions: np.ndarray


def _converged(va_v, v, f_va, f_r, cfg: IntegratorConfig) -> bool:
    tol_v2 = cfg.speed_tolerance**2
    tol_f2 = cfg.force_tolerance**2
    return bool(
        va_v[0] ** 2 + va_v[1] ** 2 < tol_v2
        and f_va[0] ** 2 + f_va[1] ** 2 < tol_f2
        and np.all(np.einsum("ij,ij->i", v, v) < tol_v2)
        and np.all(np.einsum("ij,ij->i", f_r, f_r) < tol_f2)
    )

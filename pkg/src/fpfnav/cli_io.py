"""Scenario documents, CSV/JSON outputs and run summaries.

Scenario files are strict JSON: unknown keys are rejected and every error
names the dotted key it is about, so a typo can never silently change the
physics.
"""

from __future__ import annotations

import contextlib
import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from .dynamics import IntegratorConfig
from .errors import ConfigError, FpfNavError, InfeasibleSeedingError, MalformedParameterError
from .fields import Goal, InterRobotParams, Obstacle, polyline_sources
from .fpf_core import DesignMapEntry, FpfParams, validate_params
from .scenario import FormationTolerance, RunResult, Safety, Scenario, Seeding, navigation_phases

SCHEMA_VERSION = 1
SUPPORTED_VERSIONS = (1,)
BUNDLED = ("pentagon", "decagon", "narrow_passage")


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``pentagon``, ``decagon``, ``narrow_passage``)."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled config {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("fpfnav") / "configs" / f"{name}.json"))


# --- parsing ------------------------------------------------------------------


class _Reader:
    """Pops keys out of one JSON object and complains about leftovers."""

    def __init__(self, obj, path: str):
        if not isinstance(obj, dict):
            raise ConfigError("invariant", "expected an object", path or None)
        self.obj = dict(obj)
        self.path = path

    def key(self, name):
        return f"{self.path}.{name}" if self.path else name

    def take(self, name, kind, default=..., nullable=False):
        if name not in self.obj:
            if default is ...:
                raise ConfigError("missing_key", "required key is missing", self.key(name))
            return default
        value = self.obj.pop(name)
        if value is None and nullable:
            return None
        return _coerce(value, kind, self.key(name))

    def sub(self, name, default=...):
        if name not in self.obj:
            if default is ...:
                raise ConfigError("missing_key", "required key is missing", self.key(name))
            return None
        return _Reader(self.obj.pop(name), self.key(name))

    def done(self):
        if self.obj:
            extra = sorted(self.obj)[0]
            raise ConfigError("unknown_key", "unknown key", self.key(extra))


def _coerce(value, kind, key):
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError("invariant", f"expected a finite number, got {value!r}", key)
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("invariant", f"expected an integer, got {value!r}", key)
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError("invariant", f"expected true/false, got {value!r}", key)
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError("invariant", f"expected a string, got {value!r}", key)
        return value
    if kind == "point":
        if not (isinstance(value, list) and len(value) == 2):
            raise ConfigError("invariant", f"expected [x, y], got {value!r}", key)
        return tuple(_coerce(v, "number", key) for v in value)
    if kind == "points":
        if not (isinstance(value, list) and value):
            raise ConfigError("invariant", "expected a non-empty list of [x, y] points", key)
        return [_coerce(v, "point", f"{key}[{i}]") for i, v in enumerate(value)]
    raise AssertionError(kind)


def _invariant(key, build):
    try:
        return build()
    except (MalformedParameterError, InfeasibleSeedingError) as exc:
        raise ConfigError("invariant", str(exc), key) from None


def _parse_obstacle(obj, key) -> Obstacle:
    r = _Reader(obj, key)
    name = r.take("name", "str", "")
    k_r = r.take("k_r", "number")
    sigma_o = r.take("sigma_o", "number")
    points = r.take("points", "points", None)
    polyline = r.take("polyline", "points", None)
    spacing = r.take("spacing", "number", None)
    r.done()
    if (points is None) == (polyline is None):
        raise ConfigError("invariant", "give exactly one of 'points' or 'polyline'", key)
    if polyline is not None:
        if spacing is None:
            raise ConfigError("missing_key", "polyline obstacles need a spacing", f"{key}.spacing")
        points = _invariant(f"{key}.spacing", lambda: polyline_sources(polyline, spacing))
    elif spacing is not None:
        raise ConfigError("unknown_key", "spacing only applies to polylines", f"{key}.spacing")
    return _invariant(key, lambda: Obstacle(np.array(points, dtype=float), k_r, sigma_o, name))


def scenario_from_dict(doc: Any) -> Scenario:
    r = _Reader(doc, "")
    version = r.take("schema_version", "int")
    if version not in SUPPORTED_VERSIONS:
        raise ConfigError("schema_version", f"unsupported schema_version {version}", "schema_version")
    name = r.take("name", "str", "")
    notes = r.take("notes", "str", "")

    f = r.sub("fpf")
    fpf = FpfParams(f.take("k_v", "number"), f.take("sigma1", "number"), f.take("sigma2", "number"))
    f.done()
    violations = validate_params(fpf)
    if violations:
        v = violations[0]
        field = {"k_v > 1": "k_v", "sigma1 > 0": "sigma1", "sigma2 > 0": "sigma2"}.get(v.rule, "sigma2")
        raise ConfigError("invariant", "; ".join(str(x) for x in violations), f"fpf.{field}")

    ir = r.sub("inter_robot")
    inter = _invariant("inter_robot", lambda: InterRobotParams(ir.take("k_a", "number"), ir.take("sigma_r", "number")))
    ir.done()

    n_robots = r.take("n_robots", "int")
    if n_robots < 1:
        raise ConfigError("invariant", "n_robots must be >= 1", "n_robots")

    sd = r.sub("seeding")
    seeding = _invariant(
        "seeding",
        lambda: Seeding(sd.take("low", "point"), sd.take("high", "point"), sd.take("min_separation", "number"), sd.take("seed", "int")),
    )
    sd.done()

    virtual_start = r.take("virtual_start", "point")

    g = r.sub("goal")
    goal = _invariant(
        "goal",
        lambda: Goal(g.take("position", "point"), g.take("lambda", "number"), g.take("literal_attraction", "bool", False)),
    )
    goal_tolerance = g.take("tolerance", "number")
    g.done()

    obstacles_raw = r.obj.pop("obstacles", [])
    if not isinstance(obstacles_raw, list):
        raise ConfigError("invariant", "expected a list", "obstacles")
    obstacles = tuple(_parse_obstacle(o, f"obstacles[{i}]") for i, o in enumerate(obstacles_raw))

    it = r.sub("integrator")
    integrator = _invariant(
        "integrator",
        lambda: IntegratorConfig(
            dt=it.take("dt", "number"),
            damping_va=it.take("damping_va", "number", None, nullable=True),
            damping_robot=it.take("damping_robot", "number"),
            max_steps=it.take("max_steps", "int"),
            speed_tolerance=it.take("speed_tolerance", "number"),
            force_tolerance=it.take("force_tolerance", "number"),
        ),
    )
    it.done()

    sf = r.sub("safety")
    safety = _invariant(
        "safety", lambda: Safety(sf.take("min_robot_clearance", "number"), sf.take("min_obstacle_clearance", "number"))
    )
    sf.done()

    body_radius = r.take("body_radius", "number", None, nullable=True)
    fm = r.sub("formation", None)
    formation = FormationTolerance()
    if fm is not None:
        formation = FormationTolerance(fm.take("radius_rel", "number", 0.01), fm.take("gap_deg", "number", 1.0))
        fm.done()
    r.done()

    return _invariant(
        "scenario",
        lambda: Scenario(
            fpf=fpf,
            inter_robot=inter,
            n_robots=n_robots,
            seeding=seeding,
            goal=goal,
            integrator=integrator,
            safety=safety,
            virtual_start=virtual_start,
            obstacles=obstacles,
            goal_tolerance=goal_tolerance,
            body_radius=body_radius,
            formation=formation,
            name=name,
            notes=notes,
        ),
    )


def parse_scenario(document: str) -> Scenario:
    """Parse and fully validate a scenario document (JSON text)."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ConfigError("syntax", f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def scenario_to_dict(s: Scenario) -> dict:
    it = s.integrator
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "notes": s.notes,
        "fpf": {"k_v": s.fpf.k_v, "sigma1": s.fpf.sigma1, "sigma2": s.fpf.sigma2},
        "inter_robot": {"k_a": s.inter_robot.k_a, "sigma_r": s.inter_robot.sigma_r},
        "n_robots": s.n_robots,
        "seeding": {
            "low": list(s.seeding.low),
            "high": list(s.seeding.high),
            "min_separation": s.seeding.min_separation,
            "seed": s.seeding.seed,
        },
        "virtual_start": list(s.virtual_start),
        "goal": {
            "position": list(s.goal.position),
            "lambda": s.goal.lam,
            "tolerance": s.goal_tolerance,
            "literal_attraction": s.goal.literal_attraction,
        },
        "obstacles": [
            {"name": o.name, "k_r": o.k_r, "sigma_o": o.sigma_o, "points": o.source_points.tolist()}
            for o in s.obstacles
        ],
        "integrator": {
            "dt": it.dt,
            "damping_va": it.damping_va,
            "damping_robot": it.damping_robot,
            "max_steps": it.max_steps,
            "speed_tolerance": it.speed_tolerance,
            "force_tolerance": it.force_tolerance,
        },
        "safety": {
            "min_robot_clearance": s.safety.min_robot_clearance,
            "min_obstacle_clearance": s.safety.min_obstacle_clearance,
        },
        "body_radius": s.body_radius,
        "formation": {"radius_rel": s.formation.radius_rel, "gap_deg": s.formation.gap_deg},
    }


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2)


# --- writers --------------------------------------------------------------------


@contextlib.contextmanager
def _atomic_open(destination):
    """Write to a temp file beside ``destination`` and rename it into place."""
    dest = Path(destination)
    fd, tmp = tempfile.mkstemp(prefix=f".{dest.name}.", dir=dest.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, dest)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _num(x) -> str:
    return format(float(x), ".17g")


def trajectory_header(ids: Iterable[int]) -> list[str]:
    cols = ["t", "qv_x", "qv_y"]
    for i in ids:
        cols += [f"r{i}_x", f"r{i}_y", f"r{i}_vx", f"r{i}_vy", f"r{i}_Fx", f"r{i}_Fy"]
    return cols


def write_trajectory(result: RunResult, destination) -> Path:
    traj = result.trajectory
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    n = len(traj.ids)
    # per robot: x, y, vx, vy, Fx, Fy
    block = np.concatenate([traj.positions, traj.velocities, result.metrics.per_robot_force], axis=2)
    block = block.reshape(len(traj), n * 6)
    table = np.column_stack([traj.times, traj.va_positions, block])
    with _atomic_open(destination) as fh:
        fh.write(",".join(trajectory_header(traj.ids)) + "\n")
        for row in table:
            fh.write(",".join(_num(v) for v in row) + "\n")
    return Path(destination)


def read_trajectory(source) -> tuple[list[str], np.ndarray]:
    """Header and numeric table of a trajectory CSV."""
    lines = Path(source).read_text().splitlines()
    header = lines[0].split(",")
    table = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, table.reshape(len(lines) - 1, len(header))


def write_design_map(entries: list[DesignMapEntry], destination) -> Path:
    if not entries:
        raise ValueError("no design map entries to write")
    with _atomic_open(destination) as fh:
        fh.write("k_v,varsigma,scaled_radius\n")
        for e in entries:
            r = "NA" if e.scaled_radius is None else _num(e.scaled_radius)
            fh.write(f"{_num(e.k_v)},{_num(e.varsigma)},{r}\n")
    return Path(destination)


def read_design_map(source) -> list[DesignMapEntry]:
    lines = Path(source).read_text().splitlines()
    out = []
    for line in lines[1:]:
        k_v, vs, r = line.split(",")
        out.append(DesignMapEntry(float(k_v), float(vs), None if r == "NA" else float(r)))
    return out


def _finite_or_none(x) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


def run_summary(result: RunResult, scenario: Scenario, mode: str) -> dict:
    """Structured summary of one run; ``mode`` is ``"assemble"`` or ``"navigate"``."""
    from .scenario import formation_ok, polygon_regularity

    m = result.metrics
    final = result.trajectory.final
    final_metrics = {
        "formation_rms_error": float(m.formation_rms_error[-1]),
        "min_inter_robot_distance": _finite_or_none(m.min_inter_robot_distance[-1]),
        "min_obstacle_clearance": _finite_or_none(m.min_obstacle_clearance[-1]),
        "formation_ok": formation_ok(final, scenario),
        "radii": np.hypot(*(final.positions - final.va_position).T).tolist(),
    }
    if final.n_robots >= 2:
        final_metrics["angular_gaps_deg"] = polygon_regularity(final.positions, final.va_position).angular_gaps_sorted.tolist()
    summary = {
        "mode": mode,
        "termination": result.termination,
        "steps": result.steps,
        "wall_clock_s": result.wall_time,
        "final_metrics": final_metrics,
        "design_radius": scenario.world_radius,
        "assembly_threshold": scenario.assembly_threshold,
        "collision_event_count": len(result.collision_events),
        "collision_events": [
            {"time": e.time, "kind": e.kind, "pair": _jsonable(e.pair), "distance": e.distance}
            for e in result.collision_events[:100]
        ],
        "parameters": _parameter_echo(scenario),
    }
    if mode == "navigate" and scenario.obstacles:
        phases = navigation_phases(result, scenario.obstacles)
        rms = m.formation_rms_error
        summary["passage"] = {
            "steps_near_obstacles": int(phases.passage.sum()),
            "peak_formation_rms_error": float(rms[phases.passage].max()) if phases.passage.any() else None,
            "min_obstacle_clearance": _finite_or_none(np.nanmin(m.min_obstacle_clearance)),
        }
    return summary


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x


def _parameter_echo(s: Scenario) -> dict:
    doc = scenario_to_dict(s)
    doc["obstacles"] = [
        {"name": o.name, "k_r": o.k_r, "sigma_o": o.sigma_o, "n_points": len(o.source_points)} for o in s.obstacles
    ]
    return doc


def write_summary(summary: dict, destination) -> Path:
    with _atomic_open(destination) as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return Path(destination)


__all__ = [
    "ConfigError",
    "FpfNavError",
    "bundled_config",
    "load_scenario",
    "parse_scenario",
    "read_design_map",
    "read_trajectory",
    "run_summary",
    "scenario_from_dict",
    "scenario_to_dict",
    "serialize_scenario",
    "write_design_map",
    "write_summary",
    "write_trajectory",
]

"""Formation potential field: evaluation, gradient, parameter checks, design maps.

The field is radially symmetric about the virtual agent,

    U(d) = 1 + tanh^2(sigma1 d) - k_v tanh^2(sigma2 d),

with a maximum of 1 at the centre, a ring of minima at the formation radius
and the limit ``2 - k_v`` far away. Radii in this module are *scaled*
(``sigma1 * R``); conversion to world units happens in :mod:`fpfnav.scenario`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import MalformedParameterError, MalformedRangeError, NoEquilibriumError

# bracket scan and bisection settings for the equilibrium equation
SCAN_STEP = 0.05
SCAN_HORIZON = 50.0
ROOT_TOL = 1e-10


@dataclass(frozen=True)
class FpfParams:
    k_v: float
    sigma1: float
    sigma2: float

    @property
    def varsigma(self) -> float:
        return self.sigma2 / self.sigma1


@dataclass(frozen=True)
class Violation:
    rule: str
    value: float

    def __str__(self):
        return f"violates {self.rule} (got {self.value:.6g})"


@dataclass(frozen=True)
class DesignMapEntry:
    k_v: float
    varsigma: float
    scaled_radius: Optional[float]  # None marks a cell without a solution

    @property
    def solved(self) -> bool:
        return self.scaled_radius is not None


def validate_params(p: FpfParams) -> list[Violation]:
    """Return every violated design rule; an empty list means ``p`` is valid."""
    for name in ("k_v", "sigma1", "sigma2"):
        value = getattr(p, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise MalformedParameterError(f"{name} must be a finite number, got {value!r}")

    violations = []
    if not p.sigma1 > 0:
        violations.append(Violation("sigma1 > 0", p.sigma1))
    if not p.sigma2 > 0:
        violations.append(Violation("sigma2 > 0", p.sigma2))
    if not p.k_v > 1:
        violations.append(Violation("k_v > 1", p.k_v))
    if p.sigma1 > 0 and p.sigma2 > 0:
        if not p.varsigma > 1:
            violations.append(Violation("varsigma > 1", p.varsigma))
        ratio = p.sigma1 / p.sigma2
        if not (p.k_v > 0 and ratio < math.sqrt(p.k_v)):
            violations.append(Violation("sigma1/sigma2 < sqrt(k_v)", ratio))
    return violations


def require_valid(p: FpfParams) -> FpfParams:
    violations = validate_params(p)
    if violations:
        raise MalformedParameterError("; ".join(str(v) for v in violations))
    return p


def _tanh_sech2(x):
    # tanh(x) / cosh(x)^2 for x >= 0 without overflowing cosh
    e = np.exp(-2.0 * np.asarray(x, dtype=float))
    return (1.0 - e) / (1.0 + e) * 4.0 * e / (1.0 + e) ** 2


def radial_potential(p: FpfParams, d):
    """Field value at distance(s) ``d`` from the centre (array friendly)."""
    d = np.asarray(d, dtype=float)
    return 1.0 + np.tanh(p.sigma1 * d) ** 2 - p.k_v * np.tanh(p.sigma2 * d) ** 2


def radial_force(p: FpfParams, d):
    """Outward component of the force, ``-dU/dd``; negative means pulled inward."""
    d = np.asarray(d, dtype=float)
    return 2.0 * (
        p.k_v * p.sigma2 * _tanh_sech2(p.sigma2 * d) - p.sigma1 * _tanh_sech2(p.sigma1 * d)
    )


def eval_fpf(p: FpfParams, q, q_v) -> float:
    d = math.hypot(q[0] - q_v[0], q[1] - q_v[1])
    return float(radial_potential(p, d))


def fpf_force(p: FpfParams, q, q_v) -> np.ndarray:
    """Force on a robot at ``q``; the zero vector at the centre itself."""
    delta = np.asarray(q, dtype=float) - np.asarray(q_v, dtype=float)
    d = math.hypot(delta[0], delta[1])
    if d == 0.0:
        return np.zeros(2)
    return float(radial_force(p, d)) * delta / d


def equilibrium_residual(scaled_radius, k_v: float, varsigma: float):
    """Left side of the scaled equilibrium equation; zero at the formation radius."""
    r = np.asarray(scaled_radius, dtype=float)
    return _tanh_sech2(r) - k_v * varsigma * _tanh_sech2(varsigma * r)


def solve_scaled_radius(k_v: float, varsigma: float) -> float:
    """Scaled formation radius for the given gain and spread ratio.

    Scans outward from zero in steps of ``SCAN_STEP`` until the residual turns
    positive, then bisects the bracket until ``|g| < ROOT_TOL`` and the
    bracket has shrunk to a few ulps. The residual alone is not enough when the
    field is very flat around the ring (spread ratio near one).
    """
    if not (math.isfinite(k_v) and math.isfinite(varsigma)) or varsigma <= 0:
        raise MalformedParameterError(f"bad parameters k_v={k_v!r}, varsigma={varsigma!r}")
    # g(r) ~ r (1 - k_v varsigma^2) near zero; it must start negative
    if k_v * varsigma**2 <= 1.0:
        raise NoEquilibriumError(
            f"k_v * varsigma^2 = {k_v * varsigma**2:.6g} <= 1: centre is not a maximum"
        )

    lo = 0.0
    hi = None
    n_steps = int(round(SCAN_HORIZON / SCAN_STEP))
    for k in range(1, n_steps + 1):
        r = k * SCAN_STEP
        if float(equilibrium_residual(r, k_v, varsigma)) > 0.0:
            hi = r
            break
        lo = r
    if hi is None:
        raise NoEquilibriumError(
            f"no sign change up to scaled radius {SCAN_HORIZON} for k_v={k_v}, varsigma={varsigma}"
        )

    while True:
        mid = 0.5 * (lo + hi)
        g = float(equilibrium_residual(mid, k_v, varsigma))
        if mid in (lo, hi) or (abs(g) < ROOT_TOL and hi - lo < 1e-13 * hi):
            return mid
        if g == 0.0:
            return mid
        if g > 0.0:
            hi = mid
        else:
            lo = mid


def formation_radius(p: FpfParams) -> float:
    """Formation radius in world units."""
    return solve_scaled_radius(p.k_v, p.varsigma) / p.sigma1


def _axis(bounds: Sequence[float], n: int, name: str) -> np.ndarray:
    lo, hi = (float(b) for b in bounds)
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise MalformedRangeError(f"{name} range must satisfy lo < hi, got ({lo}, {hi})")
    if lo < 1.0:
        raise MalformedRangeError(f"{name} range must lie above 1, got lower bound {lo}")
    if n < 1:
        raise MalformedRangeError(f"{name} grid resolution must be >= 1, got {n}")
    # half-open (lo, hi]: the lower bound itself is never a valid design
    return lo + (hi - lo) * np.arange(1, n + 1) / n


def design_map(
    k_v_range: Sequence[float],
    varsigma_range: Sequence[float],
    resolution: Union[int, tuple[int, int]],
) -> list[DesignMapEntry]:
    """Solve for the scaled radius on a grid over ``(lo, hi]`` in each axis.

    Entries are row-major with ``k_v`` as the outer loop. Cells with no
    equilibrium are kept with ``scaled_radius=None``.
    """
    if isinstance(resolution, int):
        n_kv = n_vs = resolution
    else:
        n_kv, n_vs = resolution
    kvs = _axis(k_v_range, n_kv, "k_v")
    vss = _axis(varsigma_range, n_vs, "varsigma")

    entries = []
    for k_v in kvs:
        for vs in vss:
            try:
                r = solve_scaled_radius(float(k_v), float(vs))
            except NoEquilibriumError:
                r = None
            entries.append(DesignMapEntry(float(k_v), float(vs), r))
    return entries

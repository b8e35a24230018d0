"""Exception hierarchy shared by every fpfnav module."""


class FpfNavError(Exception):
    """Base class for all errors raised by fpfnav."""


class MalformedParameterError(FpfNavError, ValueError):
    """A parameter is non-finite or otherwise unusable."""


class MalformedRangeError(FpfNavError, ValueError):
    """A sweep range is empty or inverted."""


class NoEquilibriumError(FpfNavError):
    """The equilibrium equation has no positive root for these parameters."""


class DegenerateDistanceError(FpfNavError):
    """Two points coincide, so a repulsion direction is undefined."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class DivergenceError(FpfNavError):
    """The integrator produced a non-finite state."""

    def __init__(self, message, step_index):
        super().__init__(message)
        self.step_index = step_index


class InfeasibleSeedingError(FpfNavError):
    """Rejection sampling could not place every robot."""


class ConfigError(FpfNavError):
    """A scenario document could not be turned into a Scenario.

    ``kind`` is one of ``"syntax"``, ``"unknown_key"``, ``"missing_key"``,
    ``"invariant"`` or ``"schema_version"``; ``key`` is the dotted path of the
    offending entry when there is one.
    """

    def __init__(self, kind, message, key=None):
        super().__init__(message)
        self.kind = kind
        self.key = key

    def __str__(self):
        prefix = f"[{self.kind}]"
        if self.key:
            prefix += f" {self.key}:"
        return f"{prefix} {self.args[0]}"

"""Command-line entry point: ``fpfnav {design-map,assemble,navigate,check}``.

Exit status is 0 on success, 1 for invalid input (bad flags, bad config,
bad ranges) and 2 when a run fails (divergence, no convergence, seeding).
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import cli_io
from .errors import (
    ConfigError,
    DivergenceError,
    InfeasibleSeedingError,
    MalformedParameterError,
    MalformedRangeError,
)
from .fpf_core import design_map
from .scenario import assemble, formation_ok, navigate

log = logging.getLogger("fpfnav")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fpfnav", description="Formation potential field design and simulation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    dm = sub.add_parser("design-map", help="solve the formation radius over a (k_v, varsigma) grid")
    dm.add_argument("--kv-min", type=float, default=1.0)
    dm.add_argument("--kv-max", type=float, default=2.5)
    dm.add_argument("--vs-min", type=float, default=1.0)
    dm.add_argument("--vs-max", type=float, default=2.5)
    dm.add_argument("--grid", type=int, default=50)
    dm.add_argument("--out", required=True)

    for name, help_text in (
        ("assemble", "self-organise the robots around a stationary virtual agent"),
        ("navigate", "assemble, then drive the formation to the goal"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out-traj", required=True)
        p.add_argument("--out-summary", required=True)

    ck = sub.add_parser("check", help="validate a scenario file and exit")
    ck.add_argument("--config", required=True)
    return parser


def _design_map(args) -> int:
    entries = design_map((args.kv_min, args.kv_max), (args.vs_min, args.vs_max), args.grid)
    cli_io.write_design_map(entries, args.out)
    solved = sum(e.solved for e in entries)
    print(f"wrote {len(entries)} cells ({solved} solved) to {args.out}")
    return EXIT_OK


def _check(args) -> int:
    s = cli_io.load_scenario(args.config)
    print(f"ok: {s.name or args.config} (N={s.n_robots}, design radius {s.world_radius:.6g})")
    return EXIT_OK


def _assemble(args) -> int:
    s = cli_io.load_scenario(args.config)
    result = assemble(s)
    cli_io.write_trajectory(result, args.out_traj)
    cli_io.write_summary(cli_io.run_summary(result, s, "assemble"), args.out_summary)
    ok = result.termination == "converged"
    print(f"assemble: {result.termination} after {result.steps} steps; formation ok: {formation_ok(result.trajectory.final, s)}")
    return EXIT_OK if ok else EXIT_RUNTIME


def _navigate(args) -> int:
    s = cli_io.load_scenario(args.config)
    assembled = assemble(s)
    if assembled.termination != "converged":
        print(f"navigate: assembly did not converge ({assembled.termination})", file=sys.stderr)
        return EXIT_RUNTIME
    result = navigate(s, assembled.trajectory.final)
    cli_io.write_trajectory(result, args.out_traj)
    cli_io.write_summary(cli_io.run_summary(result, s, "navigate"), args.out_summary)
    print(
        f"navigate: {result.termination} after {result.steps} steps; "
        f"{len(result.collision_events)} collision events"
    )
    return EXIT_OK if result.termination == "goal_reached" else EXIT_RUNTIME


COMMANDS = {"design-map": _design_map, "check": _check, "assemble": _assemble, "navigate": _navigate}


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, MalformedParameterError, MalformedRangeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DivergenceError, InfeasibleSeedingError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()

"""Command line entry point: ``imcf run | verify | fit | demo``."""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from pathlib import Path

from .certificates import InitialStats, check
from .decay import verify_rates
from .errors import FormatError, ImcfError, InadmissibleInitialData, IoError, ParseError, ValidationError
from .flow import Trajectory, evolve
from .geometry import GraphState
from .io import (
    make_initial,
    parse_config,
    read_monitors,
    read_snapshot,
    write_certificates,
    write_outputs,
    write_rates,
)

EXIT_OK = 0
EXIT_CERT_FAIL = 1
EXIT_CONFIG = 2
EXIT_BREAKDOWN = 3

HOROSPHERE_CONFIG = """\
# horosphere y = 1 over a 64x64 torus
dimension = 2
grid.points_per_axis = 64
grid.length = 6.283185307179586
initial.family = constant
initial.c = 1.0
flow.t_end = 2.0
"""

PERTURBED_CONFIG = """\
# perturbed horosphere y = 1 + 0.1 sin x
dimension = 1
grid.points_per_axis = 256
grid.length = 6.283185307179586
initial.family = sine
initial.c = 1.0
initial.a = 0.1
initial.k = 1
flow.t_end = 4.0
"""

log = logging.getLogger("imcf")


def execute(initial: GraphState, config, out_dir) -> tuple[int, Trajectory]:
    """Run the flow from ``initial``, evaluate everything and write outputs."""
    trajectory = evolve(initial, config.flow)
    stats = None
    report = fits = None
    try:
        stats = InitialStats.from_state(initial)
    except ImcfError as exc:
        log.warning("certificates skipped: %s", exc)
    if stats is not None:
        report = check(trajectory, stats, h=initial.grid.spacing)
        fits = verify_rates(trajectory, stats)
    write_outputs(trajectory, report, fits, out_dir, initial=initial)

    if trajectory.termination != "completed":
        print(f"flow breakdown: {trajectory.termination} ({trajectory.detail})", file=sys.stderr)
        return EXIT_BREAKDOWN, trajectory
    for line in report.lines():
        print(line)
    return (EXIT_OK if report.all_passed else EXIT_CERT_FAIL), trajectory


def _load_dir(directory: Path) -> tuple[Trajectory, GraphState]:
    return read_monitors(directory / "monitors.csv"), read_snapshot(directory / "initial.snap")


def cmd_run(args) -> int:
    try:
        config = parse_config(Path(args.config).read_text())
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ValidationError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.initial_snapshot:
            # bypasses admissibility checks on purpose: used to study breakdown
            initial = read_snapshot(args.initial_snapshot)
        else:
            initial = make_initial(config)
    except (InadmissibleInitialData, FormatError, IoError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or config.directory
    code, _ = execute(initial, config, out)
    return code


def cmd_verify(args) -> int:
    directory = Path(args.directory)
    trajectory, initial = _load_dir(directory)
    report = check(trajectory, InitialStats.from_state(initial), h=initial.grid.spacing)
    for line in report.lines():
        print(line)
    if args.write:
        write_certificates(report, directory / "certificates.txt")
    return EXIT_OK if report.all_passed else EXIT_CERT_FAIL


def cmd_fit(args) -> int:
    directory = Path(args.directory)
    trajectory, initial = _load_dir(directory)
    checks = verify_rates(trajectory, InitialStats.from_state(initial))
    write_rates(checks, directory / "rates.txt")
    for c in checks:
        print(c.line())
    return EXIT_OK


def cmd_demo(args) -> int:
    base = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="imcf-demo-"))
    worst = EXIT_OK
    for name, text in (("horosphere", HOROSPHERE_CONFIG), ("perturbed", PERTURBED_CONFIG)):
        config = parse_config(text)
        out = base / name
        print(f"== {name} -> {out}")
        code, _ = execute(make_initial(config), config, out)
        print((out / "rates.txt").read_text(), end="")
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imcf", description="Inverse mean curvature flow of graphs in hyperbolic space")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured simulation")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: output.directory)")
    run.add_argument("--initial-snapshot", help="start from a snapshot file instead of the configured family")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="re-evaluate certificates of a finished run")
    verify.add_argument("directory")
    verify.add_argument("--write", action="store_true", help="rewrite certificates.txt")
    verify.set_defaults(func=cmd_verify)

    fit = sub.add_parser("fit", help="fit decay rates of a finished run, writes rates.txt")
    fit.add_argument("directory")
    fit.set_defaults(func=cmd_fit)

    demo = sub.add_parser("demo", help="run the built-in horosphere and perturbed-horosphere cases")
    demo.add_argument("--out")
    demo.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FormatError, IoError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

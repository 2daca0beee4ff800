"""Run configuration, initial data and on-disk formats.

Config files are line oriented::

    # comment
    dimension = 1
    grid.points_per_axis = 256
    grid.length = 6.283185307179586
    initial.family = sine
    initial.c = 1.0
    initial.a = 0.1
    flow.t_end = 3.0

Snapshot files hold a two-line text header followed by the height array,
row-major, as little-endian float64::

    IMCF-SNAP 1
    n=<n> shape=<p1[,p2]> L=<L> t=<t>
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .certificates import CertificateReport
from .decay import RateCheck
from .errors import (
    FormatError,
    InadmissibleInitialData,
    IoError,
    NonPositiveHeight,
    ParseError,
    ValidationError,
)
from .flow import MONITOR_COLUMNS, SCHEMES, FlowConfig, Monitors, Trajectory
from .geometry import GraphState, Grid, flow_terms

FAMILIES = ("constant", "sine", "gaussian_bump", "band_limited_random")
SNAP_MAGIC = "IMCF-SNAP 1"
MAX_RANDOM_MODES = 5

# key -> (parser, default); a default of ... marks a required key
_FLOAT, _INT, _STR = float, int, str


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


_SCHEMA = {
    "dimension": (_INT, ...),
    "grid.points_per_axis": (_INT, ...),
    "grid.length": (_FLOAT, ...),
    "initial.family": (_STR, ...),
    "initial.c": (_FLOAT, 1.0),
    "initial.a": (_FLOAT, 0.1),
    "initial.k": (_ints, None),
    "initial.sigma": (_FLOAT, None),
    "initial.center": (_floats, None),
    "initial.modes": (_INT, 3),
    "initial.seed": (_INT, 0),
    "flow.scheme": (_STR, "rk4"),
    "flow.safety": (_FLOAT, 0.25),
    "flow.t_end": (_FLOAT, ...),
    "flow.max_steps": (_INT, 1_000_000),
    "output.directory": (_STR, "."),
    "output.snapshot_times": (_floats, ()),
    "output.stride": (_INT, 10),
}


@dataclass(frozen=True)
class InitialSpec:
    family: str
    c: float = 1.0
    a: float = 0.1
    k: tuple[int, ...] | None = None
    sigma: float | None = None
    center: tuple[float, ...] | None = None
    modes: int = 3
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    initial: InitialSpec
    flow: FlowConfig
    directory: str = "."
    snapshot_times: tuple[float, ...] = ()
    stride: int = 10
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.grid.n


def parse_config(text: str) -> RunConfig:
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(lineno, f"expected 'key = value', got {body!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if not key:
            raise ParseError(lineno, "empty key")
        if key not in _SCHEMA:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in raw:
            raise ParseError(lineno, f"duplicate key {key!r}")
        parser = _SCHEMA[key][0]
        try:
            raw[key] = parser(value)
        except ValueError:
            raise ParseError(lineno, f"cannot read {value!r} for {key!r}") from None

    problems = [f"missing required key {k!r}" for k, (_, d) in _SCHEMA.items() if d is ... and k not in raw]
    vals = {k: raw.get(k, d) for k, (_, d) in _SCHEMA.items()}

    n = vals["dimension"]
    if n is not ... and n not in (1, 2):
        problems.append(f"dimension must be 1 or 2, got {n}")
    ppa = vals["grid.points_per_axis"]
    if ppa is not ... and ppa < 8:
        problems.append(f"grid.points_per_axis must be >= 8, got {ppa}")
    L = vals["grid.length"]
    if L is not ... and not (math.isfinite(L) and L > 0):
        problems.append(f"grid.length must be positive, got {L}")
    family = vals["initial.family"]
    if family is not ... and family not in FAMILIES:
        problems.append(f"initial.family must be one of {FAMILIES}, got {family!r}")
    if vals["flow.scheme"] not in SCHEMES:
        problems.append(f"flow.scheme must be one of {SCHEMES}, got {vals['flow.scheme']!r}")
    if not 0 < vals["flow.safety"] <= 1:
        problems.append(f"flow.safety must lie in (0, 1], got {vals['flow.safety']}")
    t_end = vals["flow.t_end"]
    if t_end is not ... and not (math.isfinite(t_end) and t_end >= 0):
        problems.append(f"flow.t_end must be finite and >= 0, got {t_end}")
    if vals["flow.max_steps"] < 1:
        problems.append("flow.max_steps must be positive")
    if vals["output.stride"] < 1:
        problems.append("output.stride must be positive")
    if any(s < 0 or not math.isfinite(s) for s in vals["output.snapshot_times"]):
        problems.append("output.snapshot_times must be finite and >= 0")
    if vals["initial.sigma"] is not None and not vals["initial.sigma"] > 0:
        problems.append("initial.sigma must be positive")
    if not 1 <= vals["initial.modes"] <= MAX_RANDOM_MODES:
        problems.append(f"initial.modes must lie in [1, {MAX_RANDOM_MODES}]")
    if vals["initial.seed"] < 0:
        problems.append("initial.seed must be unsigned")
    if n in (1, 2):
        for key in ("initial.k", "initial.center"):
            if vals[key] is not None and len(vals[key]) not in (1, n):
                problems.append(f"{key} needs 1 or {n} entries")
    if problems:
        raise ValidationError(problems)

    grid = Grid(n, ppa, L)
    initial = InitialSpec(
        family=family,
        c=vals["initial.c"],
        a=vals["initial.a"],
        k=vals["initial.k"],
        sigma=vals["initial.sigma"],
        center=vals["initial.center"],
        modes=vals["initial.modes"],
        seed=vals["initial.seed"],
    )
    flow = FlowConfig(
        t_end=t_end,
        scheme=vals["flow.scheme"],
        safety=vals["flow.safety"],
        sample_stride=vals["output.stride"],
        max_steps=vals["flow.max_steps"],
        snapshot_times=vals["output.snapshot_times"],
    )
    return RunConfig(
        grid=grid,
        initial=initial,
        flow=flow,
        directory=vals["output.directory"],
        snapshot_times=flow.snapshot_times,
        stride=vals["output.stride"],
        source=raw,
    )


def _per_axis(values, n: int, default) -> np.ndarray:
    if values is None:
        return np.full(n, default, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    return np.full(n, values[0]) if values.size == 1 else values


def make_initial(config: RunConfig) -> GraphState:
    """Build and validate the initial height function (``y > 0``, ``H > 0``)."""
    grid, spec = config.grid, config.initial
    n, L = grid.n, grid.length
    xs = grid.coords()
    c, a = spec.c, spec.a

    if spec.family == "constant":
        y = np.full(grid.shape, c, dtype=np.float64)
        floor = c
    elif spec.family == "sine":
        k = _per_axis(spec.k, n, 1)
        phase = sum(ki * xi for ki, xi in zip(k, xs))
        y = c + a * np.sin(2 * np.pi * phase / L)
        floor = c - abs(a)
    elif spec.family == "gaussian_bump":
        sigma = spec.sigma if spec.sigma is not None else L / 8
        center = _per_axis(spec.center, n, L / 2)
        bump = np.zeros(grid.shape)
        # sum over neighbouring periodic images keeps the bump smooth across the seam
        for shift in np.ndindex(*(3,) * n):
            d2 = sum((xi - ci - (si - 1) * L) ** 2 for xi, ci, si in zip(xs, center, shift))
            bump += np.exp(-d2 / sigma**2)
        y = c + a * bump
        floor = c + min(a, 0.0) * float(bump.max())
    elif spec.family == "band_limited_random":
        rng = np.random.default_rng(spec.seed)
        weights = rng.random(spec.modes) + 0.5
        weights *= abs(a) / weights.sum()
        y = np.full(grid.shape, c, dtype=np.float64)
        for m in range(spec.modes):
            wave = rng.integers(-3, 4, size=n)
            while not wave.any():
                wave = rng.integers(-3, 4, size=n)
            theta = rng.uniform(0, 2 * np.pi)
            y = y + weights[m] * np.cos(2 * np.pi * sum(ki * xi for ki, xi in zip(wave, xs)) / L + theta)
        floor = c - abs(a)
    else:
        raise InadmissibleInitialData(f"unknown family {spec.family!r}")

    if floor <= 0:
        raise InadmissibleInitialData(f"height lower bound c - |a| = {floor} is not positive")
    state = GraphState(grid, 0.0, y)
    validate_state(state)
    return state


def validate_state(state: GraphState) -> None:
    if np.any(state.y <= 0):
        loc = tuple(int(i) for i in np.unravel_index(np.argmin(state.y), state.y.shape))
        raise InadmissibleInitialData("y <= 0", loc)
    try:
        _, denom = flow_terms(state)
    except NonPositiveHeight as exc:
        raise InadmissibleInitialData("y <= 0", exc.location) from None
    if np.any(denom <= 0):
        loc = tuple(int(i) for i in np.unravel_index(np.argmin(denom), denom.shape))
        raise InadmissibleInitialData("H <= 0 (not mean convex)", loc)


# --- snapshots -----------------------------------------------------------


def write_snapshot(state: GraphState, path) -> None:
    grid = state.grid
    shape = ",".join(str(s) for s in state.y.shape)
    header = f"{SNAP_MAGIC}\nn={grid.n} shape={shape} L={grid.length!r} t={float(state.t)!r}\n"
    try:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(np.ascontiguousarray(state.y, dtype="<f8").tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_snapshot(path) -> GraphState:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    parts = data.split(b"\n", 2)
    if len(parts) < 3 or parts[0].decode("ascii", "replace") != SNAP_MAGIC:
        raise FormatError(f"{path}: bad magic")
    try:
        meta = dict(item.split("=", 1) for item in parts[1].decode("ascii").split())
        n = int(meta["n"])
        shape = tuple(int(s) for s in meta["shape"].split(","))
        L = float(meta["L"])
        t = float(meta["t"])
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: malformed header ({exc})") from None
    if len(shape) != n or len(set(shape)) != 1:
        raise FormatError(f"{path}: shape {shape} does not match n={n}")
    payload = parts[2]
    expected = 8 * math.prod(shape)
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} data bytes, found {len(payload)}")
    y = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    try:
        return GraphState(Grid(n, shape[0], L), t, y)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# --- monitors, reports ---------------------------------------------------


def write_monitors(trajectory: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(MONITOR_COLUMNS) + "\n")
        for sample in trajectory.samples:
            fh.write(",".join(f"{v:.17g}" for v in sample.row()) + "\n")


def read_monitors(path) -> Trajectory:
    """Rebuild a samples-only trajectory from ``monitors.csv``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = rows[0]
    if tuple(header[: len(MONITOR_COLUMNS)]) != MONITOR_COLUMNS:
        raise FormatError(f"{path}: unexpected columns {header}")
    samples = []
    for i, row in enumerate(rows[1:], start=2):
        try:
            values = [float(v) for v in row[: len(MONITOR_COLUMNS)]]
        except ValueError:
            raise FormatError(f"{path}:{i}: non-numeric entry") from None
        if len(values) != len(MONITOR_COLUMNS):
            raise FormatError(f"{path}:{i}: expected {len(MONITOR_COLUMNS)} values")
        samples.append(Monitors(**dict(zip(MONITOR_COLUMNS, values))))
    return Trajectory(tuple(samples))


def write_certificates(report: CertificateReport, path) -> None:
    Path(path).write_text("\n".join(report.lines()) + "\n")


def write_rates(checks: list[RateCheck], path) -> None:
    Path(path).write_text("\n".join(c.line() for c in checks) + "\n")


def snapshot_name(index: int) -> str:
    return f"snap_{index:04d}.snap"


def write_outputs(
    trajectory: Trajectory,
    report: CertificateReport | None,
    fits: list[RateCheck] | None,
    directory,
    initial: GraphState | None = None,
) -> None:
    """Write monitors.csv, certificates.txt, rates.txt and snapshot files."""
    out = Path(directory)
    try:
        os.makedirs(out, exist_ok=True)
        write_monitors(trajectory, out / "monitors.csv")
        if report is not None:
            write_certificates(report, out / "certificates.txt")
        if fits is not None:
            write_rates(fits, out / "rates.txt")
        if initial is not None:
            write_snapshot(initial, out / "initial.snap")
        for i, snap in enumerate(trajectory.snapshots):
            write_snapshot(snap, out / snapshot_name(i))
        (out / "termination.txt").write_text(f"{trajectory.termination} steps={trajectory.steps} {trajectory.detail}\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc

"""Explicit time integration of the graphical inverse mean curvature flow.

The unknown is the height ``y(x, t)`` over a periodic grid, evolved by

    dy/dt = -y v^2 / (n + y dt^{ij} y_ij) = -y v / H,

which is the flow ``d(phi)/dt = nu / H`` written at fixed ``x``.  The two
parametrisations differ by a tangential motion of the foot points,
``dx/dt = (y / (v H)) grad y``; :func:`trace_particles` integrates it and
:func:`evolution_residual` uses it to convert fixed-``x`` time derivatives
into derivatives along the normal flow.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from .errors import (
    HeightNonPositive,
    InsufficientSnapshots,
    LostMeanConvexity,
    NonPositiveHeight,
    NonUniformSampling,
)
from .geometry import (
    GeometryFields,
    GraphState,
    flow_terms,
    geometry,
    gradient,
    laplace_beltrami,
    speed,
)

log = logging.getLogger(__name__)

SCHEMES = ("euler", "rk4")
TERMINATIONS = ("completed", "lost_mean_convexity", "height_nonpositive", "max_steps")

# Columns written to monitors.csv, in order.  The first eleven are the public
# interface; the trailing three feed certificates that need more than sups.
MONITOR_COLUMNS = (
    "t",
    "y_inf",
    "y_sup",
    "v_sup",
    "w_inf",
    "H_inf",
    "H_sup",
    "grad_sup2",
    "hess_sup",
    "G_sup",
    "P_max_sup",
    "H_at_grad_argmax",
    "Hw_inf",
    "winv_sup",
)


@dataclass(frozen=True)
class FlowConfig:
    t_end: float
    scheme: str = "rk4"
    safety: float = 0.25
    sample_stride: int = 10
    max_steps: int = 1_000_000
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        problems = []
        if self.scheme not in SCHEMES:
            problems.append(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not (0 < self.safety <= 1):
            problems.append(f"safety must lie in (0, 1], got {self.safety}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            problems.append(f"t_end must be finite and >= 0, got {self.t_end}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            problems.append(f"sample_stride must be a positive integer, got {self.sample_stride}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            problems.append(f"max_steps must be a positive integer, got {self.max_steps}")
        times = tuple(float(s) for s in self.snapshot_times)
        if any(not math.isfinite(s) or s < 0 for s in times):
            problems.append("snapshot_times must be finite and >= 0")
        if problems:
            raise ValueError("; ".join(problems))
        object.__setattr__(self, "snapshot_times", tuple(sorted(set(times))))


@dataclass(frozen=True)
class Monitors:
    """Scalar summary of one sampled state."""

    t: float
    y_inf: float
    y_sup: float
    v_sup: float
    w_inf: float
    H_inf: float
    H_sup: float
    grad_sup2: float
    hess_sup: float
    G_sup: float
    P_max_sup: float
    H_at_grad_argmax: float
    Hw_inf: float
    winv_sup: float
    locations: dict = field(default_factory=dict, compare=False, repr=False)

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in MONITOR_COLUMNS)


def _loc(values: np.ndarray, use_max: bool) -> tuple[int, ...]:
    flat = np.argmax(values) if use_max else np.argmin(values)
    return tuple(int(i) for i in np.unravel_index(flat, values.shape))


def monitors(state: GraphState, fields: GeometryFields | None = None) -> Monitors:
    if fields is None:
        fields = geometry(state)
    psi = fields.grad_norm2
    Hw = fields.H * fields.w
    locs = {
        "y_inf": _loc(fields.y, False),
        "y_sup": _loc(fields.y, True),
        "v_sup": _loc(fields.v, True),
        "w_inf": _loc(fields.w, False),
        "H_inf": _loc(fields.H, False),
        "H_sup": _loc(fields.H, True),
        "grad_sup2": _loc(psi, True),
        "G_sup": _loc(fields.G, True),
        "P_max_sup": _loc(fields.P_max, True),
    }
    return Monitors(
        t=float(state.t),
        y_inf=float(fields.y.min()),
        y_sup=float(fields.y.max()),
        v_sup=float(fields.v.max()),
        w_inf=float(fields.w.min()),
        H_inf=float(fields.H.min()),
        H_sup=float(fields.H.max()),
        grad_sup2=float(psi.max()),
        hess_sup=float(np.abs(fields.hess).max()),
        G_sup=float(fields.G.max()),
        P_max_sup=float(fields.P_max.max()),
        H_at_grad_argmax=float(fields.H[locs["grad_sup2"]]),
        Hw_inf=float(Hw.min()),
        winv_sup=float((1.0 / fields.w).max()),
        locations=locs,
    )


@dataclass(frozen=True)
class Trajectory:
    samples: tuple[Monitors, ...]
    snapshots: tuple[GraphState, ...] = ()
    termination: str = "completed"
    detail: str = ""
    steps: int = 0

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def series(self, name: str) -> np.ndarray:
        if name not in {f.name for f in dc_fields(Monitors)} or name == "locations":
            raise KeyError(name)
        return np.array([getattr(s, name) for s in self.samples], dtype=np.float64)


def stable_dt(state: GraphState, safety: float, fields: GeometryFields | None = None) -> float:
    """Explicit step bound ``safety * h^2 / (2 n sup(y^2/H^2))``.

    ``y^2/H^2`` bounds the eigenvalues of the diffusion matrix
    ``(y^2/H^2) dt^{ij}`` since ``dt`` has spectrum in ``[1/v^2, 1]``.
    """
    if fields is None:
        v2, denom = flow_terms(state)
    else:
        v2, denom = fields.v**2, fields.denominator
    if np.any(denom <= 0):
        raise LostMeanConvexity(_loc(denom, False))
    grid = state.grid
    # H^2 = denom^2 / v^2
    coeff = float(np.max(state.y**2 * v2 / denom**2))
    return safety * grid.spacing**2 / (2 * grid.n * coeff)


def _positive(y: np.ndarray, stage: int) -> None:
    if np.any(y <= 0):
        raise HeightNonPositive(_loc(y, False), stage)


def _rate(state: GraphState, y: np.ndarray, stage: int) -> np.ndarray:
    try:
        return speed(state.with_y(y))
    except LostMeanConvexity as exc:
        raise LostMeanConvexity(exc.location, stage) from None
    except NonPositiveHeight as exc:
        raise HeightNonPositive(exc.location, stage) from None


def step(state: GraphState, dt: float, scheme: str = "rk4") -> GraphState:
    """Advance one explicit step.  The caller keeps ``dt <= stable_dt(state, 1)``."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    y = state.y
    if scheme == "euler":
        y_new = y + dt * _rate(state, y, 1)
        _positive(y_new, 1)
    elif scheme == "rk4":
        k1 = _rate(state, y, 1)
        y2 = y + 0.5 * dt * k1
        _positive(y2, 2)
        k2 = _rate(state, y2, 2)
        y3 = y + 0.5 * dt * k2
        _positive(y3, 3)
        k3 = _rate(state, y3, 3)
        y4 = y + dt * k3
        _positive(y4, 4)
        k4 = _rate(state, y4, 4)
        y_new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _positive(y_new, 4)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return GraphState(state.grid, state.t + dt, y_new)


def evolve(state: GraphState, config: FlowConfig) -> Trajectory:
    """Integrate to ``config.t_end``, sampling monitors and snapshots.

    Steps are shortened to land exactly on snapshot times and on ``t_end``.
    Breakdown truncates the run; the valid prefix is returned with a
    diagnostic termination code.
    """
    samples = [monitors(state)]
    pending = [s for s in config.snapshot_times if s <= config.t_end]
    snapshots = []
    if pending and pending[0] <= state.t:
        snapshots.append(state)
        pending = [s for s in pending if s > state.t]

    termination = "completed"
    detail = ""
    steps = 0
    current = state
    while current.t < config.t_end:
        if steps >= config.max_steps:
            termination = "max_steps"
            detail = f"stopped after {steps} steps at t={current.t!r}"
            break
        try:
            dt = stable_dt(current, config.safety)
            target = min([config.t_end] + pending[:1])
            landing = current.t + dt >= target * (1 - 1e-14)
            if landing:
                dt = target - current.t
            nxt = step(current, dt, config.scheme)
        except LostMeanConvexity as exc:
            termination, detail = "lost_mean_convexity", str(exc)
            break
        except NonPositiveHeight as exc:
            termination, detail = "height_nonpositive", str(exc)
            break
        if landing:
            nxt = nxt.with_y(nxt.y, t=target)
        current = nxt
        steps += 1

        hit_snapshot = bool(pending) and current.t == pending[0]
        if hit_snapshot:
            snapshots.append(current)
            pending.pop(0)
        if steps % config.sample_stride == 0 or hit_snapshot or current.t >= config.t_end:
            samples.append(monitors(current))

    if termination != "completed":
        log.warning("flow stopped: %s", detail)
    return Trajectory(tuple(samples), tuple(snapshots), termination, detail, steps)


def tangential_velocity(state: GraphState, fields: GeometryFields | None = None) -> np.ndarray:
    """Foot-point velocity ``(y / (v H)) grad y`` relating the two parametrisations."""
    if fields is None:
        fields = geometry(state)
    return (fields.y / (fields.v * fields.H)) * fields.grad


def _interp_periodic(field_: np.ndarray, grid, points: np.ndarray) -> np.ndarray:
    """(Bi)linear periodic interpolation of a scalar field at ``points`` (m, n)."""
    h = grid.spacing
    N = grid.points_per_axis
    s = np.mod(points, grid.length) / h
    i0 = np.floor(s).astype(int)
    frac = s - i0
    i0 %= N
    i1 = (i0 + 1) % N
    if grid.n == 1:
        return field_[i0[:, 0]] * (1 - frac[:, 0]) + field_[i1[:, 0]] * frac[:, 0]
    fx, fy = frac[:, 0], frac[:, 1]
    return (
        field_[i0[:, 0], i0[:, 1]] * (1 - fx) * (1 - fy)
        + field_[i1[:, 0], i0[:, 1]] * fx * (1 - fy)
        + field_[i0[:, 0], i1[:, 1]] * (1 - fx) * fy
        + field_[i1[:, 0], i1[:, 1]] * fx * fy
    )


def trace_particles(
    trajectory: Trajectory, seeds, substeps: int = 8
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate foot points of the normal flow through the stored snapshots.

    The velocity is linear in time between snapshots and (bi)linear in
    space.  Returns ``(times, paths)`` with ``paths`` shaped
    ``(len(times), len(seeds), n)``; positions are not wrapped, so the
    lifted path is continuous.  Together with ``y`` the points
    ``(x(t), y(x(t), t))`` move with velocity ``nu / H``.
    """
    snaps = trajectory.snapshots
    if len(snaps) < 2:
        raise InsufficientSnapshots(f"need at least 2 snapshots, have {len(snaps)}")
    grid = snaps[0].grid
    pts = np.atleast_2d(np.asarray(seeds, dtype=np.float64)).reshape(-1, grid.n)
    velocities = [tangential_velocity(s) for s in snaps]
    times = np.array([s.t for s in snaps])

    def rhs(k: int, tau: float, x: np.ndarray) -> np.ndarray:
        # tau in [0, 1] across interval k
        vel = (1 - tau) * velocities[k] + tau * velocities[k + 1]
        return np.stack([_interp_periodic(vel[d], grid, x) for d in range(grid.n)], axis=1)

    paths = [pts.copy()]
    x = pts.copy()
    for k in range(len(snaps) - 1):
        span = times[k + 1] - times[k]
        dtau = 1.0 / substeps
        for m in range(substeps):
            tau = m * dtau
            k1 = rhs(k, tau, x)
            k2 = rhs(k, tau + 0.5 * dtau, x + 0.5 * dtau * span * k1)
            k3 = rhs(k, tau + 0.5 * dtau, x + 0.5 * dtau * span * k2)
            k4 = rhs(k, tau + dtau, x + dtau * span * k3)
            x = x + (dtau * span / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        paths.append(x.copy())
    return times, np.array(paths)


def evolution_residual(trajectory: Trajectory, quantity: str = "w") -> np.ndarray:
    """Sup-norm defect of the heat-type identities for ``w`` or ``H``.

    With ``L = d_t - H^{-2} Delta`` along the normal flow:

        L w = (|A|^2 / H^2) w
        L H = -2 |grad H|^2 / H^3 - |A|^2 / H + n / H

    The time derivative is a centred difference over neighbouring snapshots
    at fixed ``x`` plus the tangential transport term.  One residual per
    interior snapshot; expected size ``O(dt^2 + h^2)``.
    """
    if quantity not in ("w", "H"):
        raise ValueError(f"quantity must be 'w' or 'H', got {quantity!r}")
    snaps = trajectory.snapshots
    if len(snaps) < 3:
        raise InsufficientSnapshots(f"need at least 3 snapshots, have {len(snaps)}")
    times = np.array([s.t for s in snaps])
    gaps = np.diff(times)
    if np.any(gaps <= 0) or np.ptp(gaps) > 1e-9 * gaps.mean():
        raise NonUniformSampling(f"snapshot spacing is not uniform: {gaps}")
    dt = gaps.mean()

    geo = [geometry(s) for s in snaps]
    q = [getattr(f, quantity) for f in geo]
    out = []
    for k in range(1, len(snaps) - 1):
        state, f = snaps[k], geo[k]
        grid = state.grid
        dq = gradient(q[k], grid)
        transport = np.sum(tangential_velocity(state, f) * dq, axis=0)
        dtq = (q[k + 1] - q[k - 1]) / (2 * dt) + transport
        lap = laplace_beltrami(state, q[k], f)
        H = f.H
        if quantity == "w":
            rhs = f.A_norm2 / H**2 * f.w
        else:
            grad_norm2 = np.einsum("ij...,i...,j...->...", f.g_inv, dq, dq)
            rhs = -2 * grad_norm2 / H**3 - f.A_norm2 / H + f.n / H
        out.append(float(np.max(np.abs(dtq - lap / H**2 - rhs))))
    return np.array(out)

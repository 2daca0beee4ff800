"""Runtime certificates for the closed-form estimates satisfied by the flow.

Every bound is evaluated from measured data: the constants come from the
initial state (:class:`InitialStats`) and the monitored quantities come
from a :class:`~imcf.flow.Trajectory`.  Margins are signed; a negative
margin is a violation.  A discretisation tolerance is added to every
one-sided bound since the maximum principle only holds up to truncation
error on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidStats, OdeBlowup
from .flow import Trajectory
from .geometry import GraphState, geometry

CERTIFICATES = (
    "y_barriers",
    "w_lower",
    "v_upper",
    "H_upper",
    "H_lower",
    "Hsup_ode_comparison",
    "grad_decay_inequality",
    "P_boundedness",
)


@dataclass(frozen=True)
class InitialStats:
    n: int
    y_inf0: float
    y_sup0: float
    v_sup0: float
    w_inf0: float
    H_inf0: float
    H_sup0: float
    P_max0: float
    D: float

    def __post_init__(self):
        problems = []
        if self.n not in (1, 2):
            problems.append(f"n must be 1 or 2, got {self.n}")
        if not (0 < self.y_inf0 <= self.y_sup0):
            problems.append(f"need 0 < y_inf0 <= y_sup0, got {self.y_inf0}, {self.y_sup0}")
        if not self.v_sup0 >= 1:
            problems.append(f"need v_sup0 >= 1, got {self.v_sup0}")
        if not self.H_inf0 > 0:
            problems.append(f"need H_inf0 > 0, got {self.H_inf0}")
        if not self.H_sup0 >= self.H_inf0:
            problems.append("need H_sup0 >= H_inf0")
        if not self.D >= 1:
            problems.append(f"need D >= 1, got {self.D}")
        if problems:
            raise InvalidStats("; ".join(problems))

    @classmethod
    def from_state(cls, state: GraphState) -> "InitialStats":
        f = geometry(state)
        y = f.y
        # eigenvalues of g relative to delta are 1/y^2 and v^2/y^2; of g^{-1}: y^2, y^2/v^2
        D2 = max(float(np.max(f.v**2 / y**2)), float(np.max(y**2)))
        return cls(
            n=state.grid.n,
            y_inf0=float(y.min()),
            y_sup0=float(y.max()),
            v_sup0=float(f.v.max()),
            w_inf0=float(f.w.min()),
            H_inf0=float(f.H.min()),
            H_sup0=float(f.H.max()),
            P_max0=float(f.P_max.max()),
            D=math.sqrt(D2),
        )


@dataclass(frozen=True)
class Envelopes:
    y_lo: np.ndarray | float
    y_hi: np.ndarray | float
    w_lo: np.ndarray | float
    v_hi: np.ndarray | float
    H_lo: np.ndarray | float
    H_hi: np.ndarray | float


def envelopes(stats: InitialStats, t) -> Envelopes:
    """Horosphere barriers and the derived bounds on ``w``, ``v`` and ``H``.

    ``t`` may be a scalar or an array.
    """
    if not isinstance(stats, InitialStats):
        raise InvalidStats("expected InitialStats")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise InvalidStats("envelopes are defined for t >= 0")
    n = stats.n
    decay = np.exp(-t / n)
    y_lo = stats.y_inf0 * decay
    y_hi = stats.y_sup0 * decay
    w_lo = stats.w_inf0 / decay
    v_hi = np.full_like(t, stats.y_sup0 / stats.y_inf0 * stats.v_sup0)
    base = stats.y_inf0 * stats.H_inf0 / (stats.y_sup0 * stats.v_sup0)
    if stats.H_sup0 > n:
        C0 = stats.H_sup0**2 - n**2
        H_hi = np.sqrt(C0 * decay**2 + n**2)
        H_lo = base / stats.H_sup0 * np.sqrt(n**2 + C0 * decay**2)
    else:
        H_hi = np.full_like(t, float(n))
        H_lo = np.full_like(t, base)
    out = [y_lo, y_hi, w_lo, v_hi, H_lo, H_hi]
    if t.ndim == 0:
        out = [float(a) for a in out]
    return Envelopes(*out)


def ode_compare(
    rhs: Callable[[float], float],
    u0: float,
    t_grid,
    bound: float = 1e12,
    max_internal_step: float = 1e-2,
) -> np.ndarray:
    """Solve ``phi' = rhs(phi)``, ``phi(0) = u0`` with classical RK4.

    Each interval of ``t_grid`` is split into at least ten internal steps
    and no step exceeds ``max_internal_step``.  Returns ``phi`` on
    ``t_grid``.
    """
    ts = np.asarray(t_grid, dtype=np.float64)
    if ts.ndim != 1 or ts.size == 0 or ts[0] != 0 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be strictly increasing and start at 0")
    phi = float(u0)
    out = np.empty_like(ts)
    out[0] = phi
    for k in range(1, ts.size):
        span = ts[k] - ts[k - 1]
        m = max(10, math.ceil(span / max_internal_step))
        dt = span / m
        for _ in range(m):
            k1 = rhs(phi)
            k2 = rhs(phi + 0.5 * dt * k1)
            k3 = rhs(phi + 0.5 * dt * k2)
            k4 = rhs(phi + dt * k3)
            phi = phi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not math.isfinite(phi) or abs(phi) > bound:
                raise OdeBlowup(f"|phi| exceeded {bound} before t={ts[k]}")
        out[k] = phi
    return out


def hsup_rhs(n: int) -> Callable[[float], float]:
    """Reaction term of the ``H_sup`` inequality, ``(n^2 - phi^2) / (n phi)``."""
    return lambda phi: (n * n - phi * phi) / (n * phi)


def winv_rhs(n: int) -> Callable[[float], float]:
    """Reaction term of the ``sup 1/w`` inequality, ``-phi / n``."""
    return lambda phi: -phi / n


@dataclass(frozen=True)
class CertificateResult:
    name: str
    passed: bool
    worst_margin: float
    at_t: float
    location: tuple | None = None
    first_failure_t: float | None = None

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


@dataclass(frozen=True)
class CertificateReport:
    results: tuple[CertificateResult, ...]
    tol: float
    extras: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> CertificateResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{r.name} {r.status} worst_margin={r.worst_margin!r} at_t={r.at_t!r}" for r in self.results]


def _time_derivative(t: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Centred differences of a sampled series, one-sided at the ends."""
    if t.size < 2:
        return np.zeros_like(s)
    return np.gradient(s, t)


def p_bound_constant(trajectory: Trajectory, stats: InitialStats) -> float:
    """``max(P_max0, c0')`` with ``c0' = (n + 8 D^2) / (2 inf Hw)`` over the run."""
    Hw_inf = float(np.min(trajectory.series("Hw_inf")))
    c0p = (stats.n + 8 * stats.D**2) / (2 * Hw_inf)
    return max(stats.P_max0, c0p)


def check(
    trajectory: Trajectory,
    stats: InitialStats,
    tol: float | None = None,
    h: float | None = None,
) -> CertificateReport:
    """Evaluate every certificate at every sample of ``trajectory``.

    ``tol`` defaults to ``1e-6 + h^2`` (``h`` the grid spacing, 0 if unknown).
    """
    if tol is None:
        tol = 1e-6 + (h or 0.0) ** 2
    if len(trajectory.samples) < 1:
        raise ValueError("trajectory has no samples")
    n = stats.n
    t = trajectory.times
    s = trajectory.series
    env = envelopes(stats, t)
    locs = [m.locations for m in trajectory.samples]

    results = []

    def record(name, margins, loc_key):
        margins = np.asarray(margins, dtype=np.float64)
        k = int(np.argmin(margins))
        key = loc_key(k) if callable(loc_key) else loc_key
        worst = float(margins[k])
        bad = np.flatnonzero(margins < 0)
        first = float(t[bad[0]]) if bad.size else None
        results.append(CertificateResult(name, bool(worst >= 0), worst, float(t[k]), locs[k].get(key), first))

    lower = s("y_inf") - env.y_lo + tol
    upper = env.y_hi - s("y_sup") + tol
    record("y_barriers", np.minimum(lower, upper), lambda k: "y_inf" if lower[k] <= upper[k] else "y_sup")
    record("w_lower", s("w_inf") - env.w_lo + tol, "w_inf")
    record("v_upper", env.v_hi - s("v_sup") + tol, "v_sup")
    record("H_upper", env.H_hi - s("H_sup") + tol, "H_sup")
    record("H_lower", s("H_inf") - env.H_lo + tol, "H_inf")

    H_sup = s("H_sup")
    phi = ode_compare(hsup_rhs(n), H_sup[0], t - t[0]) if t.size > 1 else H_sup[:1]
    record("Hsup_ode_comparison", phi - H_sup + tol, "H_sup")

    psi = s("grad_sup2")
    dpsi = _time_derivative(t, psi)
    bound = -2 * n * psi / s("H_at_grad_argmax") ** 2
    record("grad_decay_inequality", bound - dpsi + tol, "grad_sup2")

    cap = p_bound_constant(trajectory, stats)
    record("P_boundedness", cap * (1 + tol) - s("P_max_sup"), "P_max_sup")

    return CertificateReport(tuple(results), tol, {"P_bound": cap, "Hsup_phi": phi})

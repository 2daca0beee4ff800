"""Exponential decay-rate estimation for monitored sup-norm series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certificates import InitialStats
from .errors import InsufficientPoints, UnknownMonitor
from .flow import MONITOR_COLUMNS, Trajectory

LOG_GUARD = 100 * np.finfo(np.float64).eps
MIN_POINTS = 5
DEFAULT_WINDOW = 0.25
RATE_BAND = 0.20
MIN_R_SQUARED = 0.98


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``s(t) ~ amplitude * exp(-rate * t)``."""

    rate: float
    amplitude: float
    r_squared: float
    window: tuple[float, float]
    n_points: int


def extract_series(trajectory: Trajectory, monitor: str) -> tuple[np.ndarray, np.ndarray]:
    """Sampled ``(t, s)`` for ``monitor`` with values at or below the log guard removed."""
    if monitor not in MONITOR_COLUMNS or monitor == "t":
        raise UnknownMonitor(f"unknown monitor {monitor!r}")
    t = trajectory.times
    s = trajectory.series(monitor)
    keep = s > LOG_GUARD
    return t[keep], s[keep]


def fit_rate(t, s, window_fraction: float = DEFAULT_WINDOW, t_end: float | None = None) -> DecayFit:
    """OLS fit of ``log s`` against ``t`` on ``[window_fraction * T, T]``.

    ``T`` defaults to the last sample time.  A series with no spread in
    ``log s`` reports ``r_squared = 0``.
    """
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if not 0 <= window_fraction < 1:
        raise ValueError(f"window_fraction must lie in [0, 1), got {window_fraction}")
    if t.size == 0:
        raise InsufficientPoints("empty series")
    T = float(t[-1]) if t_end is None else float(t_end)
    t0 = window_fraction * T
    sel = (t >= t0) & (t <= T) & (s > 0)
    if sel.sum() < MIN_POINTS:
        raise InsufficientPoints(f"{int(sel.sum())} usable points in [{t0}, {T}], need {MIN_POINTS}")
    tw, logs = t[sel], np.log(s[sel])
    A = np.column_stack([np.ones_like(tw), tw])
    (intercept, slope), *_ = np.linalg.lstsq(A, logs, rcond=None)
    resid = logs - (intercept + slope * tw)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(logs**2))):
        r2 = 0.0
    else:
        r2 = float(min(1.0, max(0.0, 1.0 - ss_res / ss_tot)))
    return DecayFit(float(-slope), float(np.exp(intercept)), r2, (t0, T), int(sel.sum()))


@dataclass(frozen=True)
class RateCheck:
    monitor: str
    kind: str  # "rate", "positive" or "growth_ceiling"
    target: float
    fit: DecayFit | None
    relative_deviation: float
    status: str  # "pass", "fail" or "degenerate"
    note: str = ""

    def line(self) -> str:
        if self.fit is None:
            return f"{self.monitor} {self.kind} target={self.target!r} status={self.status} {self.note}".rstrip()
        f = self.fit
        return (
            f"{self.monitor} {self.kind} target={self.target!r} rate={f.rate!r} "
            f"amplitude={f.amplitude!r} r_squared={f.r_squared!r} "
            f"window=[{f.window[0]!r},{f.window[1]!r}] n_points={f.n_points} "
            f"rel_dev={self.relative_deviation!r} status={self.status}"
        )


def _banded(monitor, target, t, s, window_fraction, t_end) -> RateCheck:
    try:
        fit = fit_rate(t, s, window_fraction, t_end)
    except InsufficientPoints as exc:
        return RateCheck(monitor, "rate", target, None, float("nan"), "degenerate", str(exc))
    dev = (fit.rate - target) / target
    ok = abs(dev) <= RATE_BAND and fit.r_squared >= MIN_R_SQUARED
    return RateCheck(monitor, "rate", target, fit, float(dev), "pass" if ok else "fail")


def verify_rates(
    trajectory: Trajectory,
    stats: InitialStats,
    window_fraction: float = DEFAULT_WINDOW,
    late_window_fraction: float = 0.5,
) -> list[RateCheck]:
    """Compare fitted exponents with the asymptotic rates of the flow.

    * ``grad_sup2`` should decay like ``exp(-2t/n)``;
    * ``G_sup`` like ``exp(-4t/n)`` (also reported on a later window, since
      the approach to that rate can be slow);
    * ``hess_sup`` should decay at some positive rate;
    * before the transient ends ``hess_sup`` must not grow faster than
      ``exp(t/n)``.
    """
    n = stats.n
    T = float(trajectory.times[-1])
    checks = []

    t, s = extract_series(trajectory, "grad_sup2")
    checks.append(_banded("grad_sup2", 2.0 / n, t, s, window_fraction, T))

    t, s = extract_series(trajectory, "G_sup")
    checks.append(_banded("G_sup", 4.0 / n, t, s, window_fraction, T))
    late = _banded("G_sup", 4.0 / n, t, s, late_window_fraction, T)
    checks.append(RateCheck("G_sup", "rate_late_window", late.target, late.fit, late.relative_deviation, late.status, late.note))

    t, s = extract_series(trajectory, "hess_sup")
    try:
        fit = fit_rate(t, s, window_fraction, T)
        status = "pass" if fit.rate > 0 else "fail"
        checks.append(RateCheck("hess_sup", "positive", 0.0, fit, float("nan"), status))
    except InsufficientPoints as exc:
        checks.append(RateCheck("hess_sup", "positive", 0.0, None, float("nan"), "degenerate", str(exc)))

    # pre-transient window [0, window_fraction * T]
    ceiling = 1.0 / n
    pre = t <= window_fraction * T
    try:
        fit = fit_rate(t[pre], s[pre], 0.0)
        growth = -fit.rate
        status = "pass" if growth <= ceiling * (1 + RATE_BAND) else "fail"
        checks.append(
            RateCheck("hess_sup", "growth_ceiling", ceiling, fit, float((growth - ceiling) / ceiling), status)
        )
    except InsufficientPoints as exc:
        checks.append(RateCheck("hess_sup", "growth_ceiling", ceiling, None, float("nan"), "degenerate", str(exc)))
    return checks

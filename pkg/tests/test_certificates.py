import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from imcf.certificates import (
    CERTIFICATES,
    InitialStats,
    check,
    envelopes,
    hsup_rhs,
    ode_compare,
    p_bound_constant,
    winv_rhs,
)
from imcf.errors import InvalidStats, OdeBlowup
from imcf.flow import Trajectory

STATS = InitialStats(n=2, y_inf0=1.0, y_sup0=2.0, v_sup0=1.2, w_inf0=0.4, H_inf0=1.5, H_sup0=3.0, P_max0=2.0, D=2.0)


def bernoulli_closed_form(n, phi0, t):
    """phi' = (n^2 - phi^2)/(n phi): (phi^2)' = (2/n)(n^2 - phi^2)."""
    return np.sqrt(n**2 + (phi0**2 - n**2) * np.exp(-2 * np.asarray(t) / n))


# --- envelopes --------------------------------------------------------------------


def test_envelopes_tight_at_zero():
    e = envelopes(STATS, 0.0)
    assert e.y_lo == STATS.y_inf0 and e.y_hi == STATS.y_sup0
    assert e.w_lo == STATS.w_inf0
    assert e.H_hi == pytest.approx(STATS.H_sup0, rel=1e-15)


def test_envelope_values_n2():
    e = envelopes(STATS, 2.0)
    assert e.y_lo == pytest.approx(math.exp(-1), rel=1e-15)
    assert e.y_hi == pytest.approx(2 * math.exp(-1), rel=1e-15)
    assert e.y_lo == pytest.approx(0.36788, abs=1e-5)
    assert e.y_hi == pytest.approx(0.73576, abs=1e-5)
    assert e.H_hi == pytest.approx(math.sqrt(5 * math.exp(-2) + 4), rel=1e-15)
    assert e.H_hi == pytest.approx(2.16256, abs=1e-5)
    assert e.w_lo == pytest.approx(0.4 * math.e, rel=1e-15)
    assert e.v_hi == pytest.approx(2.4, rel=1e-15)
    c0 = 1.0 * 1.5 / (2.0 * 1.2 * 3.0)
    assert e.H_lo == pytest.approx(c0 * math.sqrt(4 + 5 * math.exp(-2)), rel=1e-15)


def test_envelopes_when_Hsup_at_most_n():
    stats = dataclasses.replace(STATS, H_sup0=1.8)
    e = envelopes(stats, np.array([0.0, 1.0, 5.0]))
    np.testing.assert_array_equal(e.H_hi, 2.0)
    np.testing.assert_allclose(e.H_lo, 1.0 * 1.5 / (2.0 * 1.2))


def test_invalid_stats():
    with pytest.raises(InvalidStats):
        dataclasses.replace(STATS, y_inf0=3.0)
    with pytest.raises(InvalidStats):
        dataclasses.replace(STATS, H_inf0=-0.1)
    with pytest.raises(InvalidStats):
        dataclasses.replace(STATS, v_sup0=0.5)
    with pytest.raises(InvalidStats):
        envelopes(STATS, -1.0)
    with pytest.raises(InvalidStats):
        envelopes({"n": 1}, 1.0)


@st.composite
def stats_strategy(draw):
    n = draw(st.sampled_from([1, 2]))
    y_inf = draw(st.floats(0.1, 5))
    y_sup = y_inf * draw(st.floats(1, 3))
    H_inf = draw(st.floats(0.05, 3))
    H_sup = H_inf * draw(st.floats(1, 3))
    v_sup = draw(st.floats(1, 3))
    return InitialStats(n, y_inf, y_sup, v_sup, 1 / (y_sup * v_sup), H_inf, H_sup, 1.0, max(1.0, y_sup))


@settings(max_examples=100, deadline=None)
@given(stats_strategy())
def test_envelope_consistency(stats):
    t = np.linspace(0, 40, 401)
    e = envelopes(stats, t)
    assert np.all(e.y_lo <= e.y_hi)
    assert np.all(e.H_lo <= e.H_hi + 1e-12)
    assert np.all(np.diff(e.H_hi) <= 1e-15)
    assert np.all(np.diff(e.H_lo) <= 1e-15)
    n = stats.n
    assert e.H_hi[-1] == pytest.approx(n, rel=1e-6)
    c0 = stats.y_inf0 * stats.H_inf0 / (stats.y_sup0 * stats.v_sup0)
    if stats.H_sup0 > n:
        assert e.H_lo[-1] == pytest.approx(c0 / stats.H_sup0 * n, rel=1e-6)
    else:
        assert e.H_lo[-1] == pytest.approx(c0, rel=1e-12)


# --- ode_compare -------------------------------------------------------------------


def test_ode_fixed_point():
    phi = ode_compare(hsup_rhs(2), 2.0, np.linspace(0, 10, 11))
    np.testing.assert_array_equal(phi, 2.0)


def test_ode_bernoulli_closed_form():
    t = np.linspace(0, 5, 51)
    phi = ode_compare(hsup_rhs(2), 3.0, t)
    exact = bernoulli_closed_form(2, 3.0, t)
    np.testing.assert_allclose(phi, exact, atol=1e-9)
    # independent adaptive integrator agrees with the closed form
    ref = solve_ivp(lambda _, p: hsup_rhs(2)(p), (0, 5), [3.0], rtol=1e-12, atol=1e-12).y[0, -1]
    assert ref == pytest.approx(exact[-1], abs=1e-9)
    assert phi[-1] == pytest.approx(2.00841, abs=1e-5)


def test_ode_single_interval_accuracy():
    phi = ode_compare(hsup_rhs(2), 3.0, [0.0, 5.0])
    assert abs(phi[-1] - math.sqrt(4 + 5 * math.exp(-5))) <= 1e-6


def test_ode_zero_rhs():
    np.testing.assert_array_equal(ode_compare(lambda p: 0.0, 1.7, [0, 1, 2, 3]), 1.7)


def test_ode_blowup():
    with pytest.raises(OdeBlowup):
        ode_compare(lambda p: p * p, 1.0, [0.0, 2.0], bound=1e6)


def test_ode_grid_validation():
    with pytest.raises(ValueError):
        ode_compare(lambda p: 0.0, 1.0, [0.5, 1.0])
    with pytest.raises(ValueError):
        ode_compare(lambda p: 0.0, 1.0, [0.0, 1.0, 1.0])


# --- check ---------------------------------------------------------------------------


def _fake_trajectory(t, **series):
    """Trajectory built from explicit monitor series; unspecified monitors are harmless."""
    from imcf.flow import MONITOR_COLUMNS, Monitors

    defaults = dict(
        y_inf=1.0, y_sup=1.0, v_sup=1.0, w_inf=1.0, H_inf=1.0, H_sup=1.0, grad_sup2=0.0,
        hess_sup=0.0, G_sup=0.0, P_max_sup=1.0, H_at_grad_argmax=1.0, Hw_inf=1.0, winv_sup=1.0,
    )
    samples = []
    for k, tk in enumerate(t):
        values = {name: (series[name][k] if name in series else defaults[name]) for name in MONITOR_COLUMNS[1:]}
        samples.append(Monitors(t=float(tk), **values))
    return Trajectory(tuple(samples))


def test_report_is_complete(horosphere_run):
    state, traj = horosphere_run
    report = check(traj, InitialStats.from_state(state), h=state.grid.spacing)
    assert [r.name for r in report.results] == list(CERTIFICATES)


def test_horosphere_passes_with_integrator_level_slack(horosphere_run):
    state, traj = horosphere_run
    stats = InitialStats.from_state(state)
    report = check(traj, stats, tol=0.0)
    for name in ("y_barriers", "w_lower", "v_upper", "H_upper", "H_lower", "Hsup_ode_comparison"):
        assert report[name].worst_margin >= -1e-6, name
    assert check(traj, stats, h=state.grid.spacing).all_passed


def test_non_decaying_heights_fail_barriers():
    stats = InitialStats(1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    t = np.linspace(0, 1, 11)
    traj = _fake_trajectory(t, w_inf=np.exp(t), Hw_inf=np.exp(t))
    report = check(traj, stats, tol=1e-6)
    res = report["y_barriers"]
    assert not res.passed
    assert res.worst_margin == pytest.approx(-(1 - math.exp(-1)) + 1e-6)
    assert res.at_t == 1.0
    assert report["w_lower"].passed
    # y_sup0 > y_sup0 e^{-t} + tol already at the first positive sample
    assert res.first_failure_t == t[1]


def test_perturbed_run_passes_everything(perturbed_run_3):
    state, traj = perturbed_run_3
    report = check(traj, InitialStats.from_state(state), h=state.grid.spacing)
    assert report.all_passed, report.lines()


def test_hsup_below_comparison_solution(perturbed_run_3):
    state, traj = perturbed_run_3
    t = traj.times
    H_sup = traj.series("H_sup")
    phi = bernoulli_closed_form(1, H_sup[0], t)
    assert np.all(H_sup <= phi + 1e-6 + state.grid.spacing**2)


def test_winv_sup_below_comparison_solution(perturbed_run_3):
    state, traj = perturbed_run_3
    t = traj.times
    winv = traj.series("winv_sup")
    phi = ode_compare(winv_rhs(1), winv[0], t)
    assert np.all(winv <= phi + 1e-6 + state.grid.spacing**2)


def test_grad_inequality_holds_without_tolerance_early(perturbed_run_3):
    # while psi is large the inequality must hold on its own, not through tol
    state, traj = perturbed_run_3
    t, psi = traj.times, traj.series("grad_sup2")
    dpsi = np.gradient(psi, t)
    bound = -2 * psi / traj.series("H_at_grad_argmax") ** 2
    early = (t > 0.05) & (t < 1.0)
    assert np.all(dpsi[early] <= bound[early])


def test_grad_inequality_detects_growth():
    stats = InitialStats(1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    t = np.linspace(0, 1, 11)
    traj = _fake_trajectory(t, grad_sup2=0.01 * np.exp(t), y_inf=np.exp(-t), y_sup=np.exp(-t), w_inf=np.exp(t))
    assert not check(traj, stats, tol=1e-6)["grad_decay_inequality"].passed


def test_p_bound_constant():
    stats = InitialStats(1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 2.0)
    t = np.linspace(0, 1, 5)
    traj = _fake_trajectory(t, Hw_inf=np.array([4.0, 3.0, 5.0, 5.0, 5.0]))
    assert p_bound_constant(traj, stats) == pytest.approx((1 + 8 * 4) / 6)
    traj = _fake_trajectory(t, P_max_sup=np.full(5, 100.0))
    assert not check(traj, stats, tol=1e-6)["P_boundedness"].passed

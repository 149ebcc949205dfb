import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twocars import roots
from twocars.errors import DomainError, MaxIterations, NoSignChange
from twocars.roots import Bracket, Regime

from conftest import ELL_J, ORACLE

TWO_PI = 2 * math.pi


def test_xi_eta_examples():
    xe = roots.xi_eta(1.0, 0.0)
    assert (xe.xi, xe.eta) == (pytest.approx(2.0), pytest.approx(1.0))
    xe = roots.xi_eta(1.0, math.pi)
    assert (xe.xi, xe.eta) == (pytest.approx(1 + math.pi), pytest.approx(-2.0))
    with pytest.raises(DomainError):
        roots.xi_eta(0.0, 1.0)


@given(st.floats(0.01, 10.0), st.floats(-10.0, 10.0))
def test_xi_eta_identity(ell, alpha):
    xe = roots.xi_eta(ell, alpha)
    assert xe.xi ** 2 + xe.eta ** 2 == pytest.approx((ell + alpha) ** 2 + 4, rel=1e-12)


def test_solve_bracketed_examples():
    r = roots.solve_bracketed(lambda x: x * x - 2, None, (1.0, 2.0), 1.5)
    assert r.value == pytest.approx(math.sqrt(2), abs=1e-12)
    assert abs(r.residual) <= 1e-12
    with pytest.raises(NoSignChange):
        roots.solve_bracketed(lambda x: x + 5, None, (1.0, 2.0), 1.5)
    with pytest.raises(NoSignChange):
        Bracket(2.0, 1.0, -1, 1)


def test_solve_bracketed_survives_a_bad_newton_guess():
    # Newton from 0.1 on atan overshoots wildly; the bisection safeguard recovers
    r = roots.solve_bracketed(math.atan, lambda x: 1 / (1 + x * x), (-20.0, 3.0), 2.9)
    assert abs(r.value) < 1e-12


def test_solve_bracketed_reports_exhaustion():
    with pytest.raises(MaxIterations):
        roots.solve_bracketed(lambda x: x - 1 / 3, None, (0.0, 1.0), 0.9, tol=0.0, max_iter=2)


def test_theta_j_equation_solver():
    r = roots.solve_bracketed(roots.theta_j_equation, None, (1e-6, TWO_PI - 1e-6), 2.3)
    assert r.value == pytest.approx(2.343, abs=1e-3)


def test_junction_constants_match_oracle_and_published_values():
    theta_j, ell_j = roots.junction_constants()
    assert theta_j == pytest.approx(ORACLE["theta_J"], abs=1e-12)
    assert ell_j == pytest.approx(ORACLE["ell_J"], abs=1e-12)
    assert theta_j == pytest.approx(2.343, abs=1e-3)
    assert ell_j == pytest.approx(0.671, abs=1e-3)
    assert abs(roots.theta_j_equation(theta_j)) < 1e-12


def test_theta_j_equation_is_monotone():
    grid = np.linspace(1e-3, TWO_PI - 1e-3, 10_001)
    assert np.all(np.array([roots.theta_j_derivative(t) for t in grid]) > 0)


def test_solve_w():
    r = roots.solve_w(0.5)
    assert r.value == pytest.approx(ORACLE["w_0.5"], abs=1e-10)
    assert abs(roots.w_equation(0.5, r.value)) < 1e-12
    assert roots.solve_w(ELL_J - 1e-7).value == pytest.approx(ORACLE["theta_J"], abs=1e-5)
    for bad in (ELL_J, 1.0, -0.1):
        with pytest.raises(DomainError):
            roots.solve_w(bad)


def test_solve_m_and_n():
    m, n = roots.solve_m(1.0), roots.solve_n(1.0)
    assert m.value == pytest.approx(ORACLE["m_1"], abs=1e-10)
    assert n.value == pytest.approx(ORACLE["n_1"], abs=1e-10)
    assert abs(roots.m_equation(1.0, m.value)) < 1e-12
    assert abs(roots.n_equation(1.0, n.value)) < 1e-10
    near = ELL_J + 1e-7
    assert roots.solve_m(near).value == pytest.approx(ORACLE["theta_J"], abs=1e-5)
    assert roots.solve_n(near).value == pytest.approx(ORACLE["theta_J"], abs=1e-3)
    for bad in (ELL_J, 0.5):
        with pytest.raises(DomainError):
            roots.solve_m(bad)
        with pytest.raises(DomainError):
            roots.solve_n(bad)


def test_solve_p():
    r = roots.solve_p(0.5, math.pi)
    assert r.value == pytest.approx(ORACLE["p_0.5_pi"], abs=1e-10)
    assert abs(roots.p_equation(0.5, math.pi, r.value)) < 1e-10
    _, theta2 = roots.critical_angles(0.5)
    near = roots.solve_p(0.5, theta2 + 1e-6).value
    assert near == pytest.approx(roots.solve_w(0.5).value, abs=1e-4)
    with pytest.raises(DomainError):
        roots.solve_p(0.5, 1.0)


def test_solve_q():
    r = roots.solve_q(1.0, 2.3)
    assert r.value == pytest.approx(ORACLE["q_1_2.3"], abs=1e-10)
    assert abs(roots.q_equation(1.0, 2.3, r.value)) < 1e-10
    assert r.value < 2.3
    with pytest.raises(DomainError):
        roots.solve_q(0.5, 2.3)
    with pytest.raises(DomainError):
        roots.solve_q(1.0, 3.0)


def test_safe_sqrt_clamps_only_tiny_negatives():
    assert roots.safe_sqrt(-1e-13) == 0.0
    with pytest.raises(DomainError):
        roots.safe_sqrt(-1e-6)


def test_regimes_and_critical_angles():
    assert roots.regime_of(0.5) is Regime.SMALL
    assert roots.regime_of(ELL_J) is Regime.MEDIUM
    assert roots.regime_of(ELL_J + 5e-10) is Regime.MEDIUM
    assert roots.regime_of(1.0) is Regime.LARGE
    t1, t2 = roots.critical_angles(0.5)
    assert (t1, t2) == (pytest.approx(ORACLE["w_0.5"]), pytest.approx(ORACLE["theta2_0.5"], abs=1e-12))
    assert roots.critical_angles(ELL_J) == (ORACLE["theta_J"], ORACLE["theta_J"])


ELLS = (0.1, 0.3, 0.5, ELL_J - 1e-6, ELL_J + 1e-6, 1.0, 2.0, 5.0)


@pytest.mark.parametrize("ell", ELLS)
def test_every_root_satisfies_its_equation(ell):
    t1, t2 = roots.critical_angles(ell)
    if ell < ELL_J:
        assert abs(roots.w_equation(ell, t1)) < 1e-10
    else:
        assert abs(roots.m_equation(ell, t1)) < 1e-10
        assert abs(roots.n_equation(ell, t2)) < 1e-10
    for vt in np.linspace(t2, TWO_PI - t2, 22)[1:-1]:
        p = roots.solve_p(ell, vt).value
        assert abs(roots.p_equation(ell, vt, p)) < 1e-10
        assert 0 < p < vt
    if ell > ELL_J:
        for vt in np.linspace(t1, t2, 12)[1:-1]:
            q = roots.solve_q(ell, vt).value
            assert abs(roots.q_equation(ell, vt, q)) < 1e-10
            assert q < vt


def _sign_changes(values):
    s = np.sign(values[np.isfinite(values)])
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


@pytest.mark.parametrize("ell", (0.3, 0.5, 1.0, 2.0))
def test_roots_are_unique_on_a_dense_grid(ell):
    t1, t2 = roots.critical_angles(ell)
    grid = np.linspace(1e-6, TWO_PI - 1e-6, 10_000)
    if ell < ELL_J:
        assert _sign_changes(roots.w_equation(ell, grid)) == 1
    else:
        assert _sign_changes(roots.m_equation(ell, grid)) == 1
        assert _sign_changes(np.array([roots.n_equation(ell, g) for g in grid])) == 1
    vt = 0.5 * (t2 + TWO_PI - t2)
    pg = np.linspace(1e-9, vt - 1e-9, 10_000)
    assert _sign_changes(np.array([roots.p_equation(ell, vt, g) for g in pg])) == 1
    if ell > ELL_J:
        vt = 0.5 * (t1 + t2)
        qg = np.linspace(0.0, TWO_PI - vt, 10_000)
        assert _sign_changes(roots.q_equation(ell, vt, qg)) == 1

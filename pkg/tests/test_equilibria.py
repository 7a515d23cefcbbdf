import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from pwsbif.equilibria import (
    admissibility_scan,
    boundary_crossings,
    classify,
    dnu_deta,
    find_equilibrium,
    spectrum,
    trace_h1,
)
from pwsbif.errors import NoBracket, NoConvergence
from pwsbif.scaling import fit_power_law, fit_slope_at_zero
from pwsbif.system import LEFT, RIGHT, fd_jacobian, make_normal_form

# d h1 / d mu at 0 from (f_xx + g_xy) / omega^2 with f_xx = 250/1089, g_xy = 80/1089
H1_SLOPE = 20 / 33


def test_left_equilibrium_first_order(nf):
    eq = find_equilibrium(nf, LEFT, (0, 0), (0.01, 0.0))
    assert abs(eq.location[0] + 0.02) < 3e-4
    assert eq.admissible and eq.residual < 1e-12


def test_right_equilibrium_first_order(nf):
    eq = find_equilibrium(nf, RIGHT, (0, 0), (-0.01, 0.0))
    # (-1/delta_R, tau_R/delta_R) * mu
    assert eq.location == pytest.approx((0.04, 0.008), abs=5e-4)
    assert eq.admissible
    assert eq.classification == "focus-stable"


def test_origin_is_center_at_codim2(nf):
    eq = find_equilibrium(nf, LEFT, (0.01, 0.01), (0.0, 0.0))
    assert eq.location == pytest.approx((0, 0), abs=1e-12)
    assert abs(eq.nu) < 1e-10
    assert eq.xi == pytest.approx(1 / math.sqrt(2), abs=1e-10)
    assert eq.classification == "center"


def test_admissibility_switches_at_zero(nf):
    path = [(m, 0.0) for m in np.linspace(-0.02, 0.02, 40)]
    left = admissibility_scan(nf, LEFT, path)
    right = admissibility_scan(nf, RIGHT, path)
    for p, l, r in zip(path, left, right):
        assert l.admissible == (p[0] >= 0)
        assert r.admissible == (p[0] <= 0)
    (a, b), = boundary_crossings(left)
    root = brentq(lambda m: find_equilibrium(nf, LEFT, (0, 0), (m, 0.0)).location[0], a[0], b[0], xtol=1e-12)
    assert abs(root) < 1e-6


def test_both_equilibria_at_origin_when_mu_zero(nf):
    for half in (LEFT, RIGHT):
        eq = find_equilibrium(nf, half, (0.003, -0.002), (0.0, 0.05))
        assert eq.location == pytest.approx((0, 0), abs=1e-12)


def test_h1_slope_and_residuals(nf):
    curve = trace_h1(nf, np.geomspace(1e-4, 1e-2, 12))
    assert max(curve.residuals) < 1e-11
    fit = fit_power_law(zip(curve.mu, curve.eta), expected_sign=1)
    assert fit.exponent == pytest.approx(1.0, abs=0.05)
    assert fit_slope_at_zero(zip(curve.mu, curve.eta)) == pytest.approx(H1_SLOPE, rel=0.02)
    assert curve.samples[0].eta / curve.samples[0].mu == pytest.approx(H1_SLOPE, rel=0.02)


def test_stability_flips_across_h1(nf):
    mu = 0.01
    h1 = trace_h1(nf, [mu]).samples[0].eta
    assert find_equilibrium(nf, LEFT, (0, 0), (mu, h1 - 1e-3)).classification == "focus-stable"
    assert find_equilibrium(nf, LEFT, (0, 0), (mu, h1 + 1e-3)).classification == "focus-unstable"


def test_transversality_along_h1(nf):
    for s in trace_h1(nf, [1e-3, 1e-2]).samples:
        assert dnu_deta(nf, s.mu, s.eta) == pytest.approx(0.5, rel=0.05)


def test_h1_rejects_nonpositive_mu(nf):
    with pytest.raises(ValueError):
        trace_h1(nf, [0.0])


def test_h1_no_bracket():
    # left trace fixed at 0.3: nu never vanishes
    def f(x, y, p):
        mu, eta = p
        return 0.3 * x + y + x * x, -mu - 0.5 * x

    with pytest.raises(NoBracket):
        trace_h1(make_normal_form(f, f, name="no-hopf"), [0.01])


def test_newton_failure(nf):
    with pytest.raises(NoConvergence):
        find_equilibrium(nf, LEFT, (5.0, 5.0), (0.01, 0.0), max_iter=2)


@given(nu=st.floats(-2, 2), xi=st.floats(0.01, 3))
def test_spectrum_of_focus_matrix(nu, xi):
    got = spectrum([[nu, xi], [-xi, nu]])
    assert got[0] == pytest.approx(nu, abs=1e-12)
    assert got[1] == pytest.approx(xi, rel=1e-9)


def test_classify_table():
    assert classify(0.1, 0.0, -1.0) == "saddle"
    assert classify(-0.1, 1.0, 1.0) == "focus-stable"
    assert classify(0.1, 1.0, 1.0) == "focus-unstable"
    assert classify(0.0, 1.0, 1.0) == "center"
    assert classify(-1.0, 0.0, 0.2) == "node"


@given(x=st.floats(-0.2, 0.2), y=st.floats(-0.2, 0.2))
def test_fd_jacobian_matches_analytic(nf, x, y):
    p = (0.01, 0.02)
    a = np.asarray(nf.jacobian(LEFT, x, y, p))
    b = fd_jacobian(nf.f_left, x, y, p)
    np.testing.assert_allclose(b, a, rtol=1e-6, atol=1e-8)
    ea, eb = np.linalg.eigvals(a), np.linalg.eigvals(b)
    assert np.allclose(np.sort_complex(ea), np.sort_complex(eb), rtol=1e-6, atol=1e-8)

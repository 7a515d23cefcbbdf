import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pwsbif.errors import DegenerateCase, WrongSpectrum
from pwsbif.normalform import (
    InvariantSet,
    build_transform,
    compute_invariants,
    criticality,
    flatten_manifold,
    locate_codim2,
    partial,
    predicted_coefficients,
)
from pwsbif.system import (
    LEFT,
    PiecewiseSystem,
    check_continuity,
    example_raw_to_nf_params,
    example_raw_to_nf_state,
    make_example_raw,
    make_normal_form,
)

A0, OMEGA, TAU_R, DELTA_R = 25 / 88, 1 / math.sqrt(2), -1 / 5, 1 / 4


def test_codim2_point(codim2):
    assert codim2.state == pytest.approx((0, 0), abs=1e-8)
    assert codim2.params == pytest.approx((0, 0), abs=1e-8)
    assert all(r < 1e-10 for r in codim2.residuals.values())


def test_codim2_spectra(codim2):
    left = sorted(codim2.left_eigs, key=lambda z: z.imag)
    right = sorted(codim2.right_eigs, key=lambda z: z.imag)
    s = 1 / math.sqrt(2)
    assert abs(left[0] - complex(0, -s)) < 1e-8 and abs(left[1] - complex(0, s)) < 1e-8
    r = math.sqrt(6) / 5
    assert abs(right[0] - complex(-0.1, -r)) < 1e-8 and abs(right[1] - complex(-0.1, r)) < 1e-8


def test_codim2_needs_complex_spectrum():
    # left trace vanishes at eta = 0 but the determinant is negative
    def f(x, y, p):
        mu, eta = p
        return eta * x + y + x * x, -mu + 0.5 * x

    with pytest.raises(WrongSpectrum):
        locate_codim2(make_normal_form(f, f, name="saddle"))


@pytest.mark.parametrize("beta", [-0.05, 0.05])
def test_phi_puts_equilibrium_on_manifold(transform, beta):
    # alpha = 2 beta / 15 makes the left equilibrium sit on the switching line
    assert transform.phi(beta) == pytest.approx(2 * beta / 15, abs=1e-8)


@given(a=st.floats(-0.03, 0.03), b=st.floats(-0.3, 0.3))
def test_psi_vanishes(transform, a, b):
    assert abs(transform.psi((a, b))) < 1e-9


@given(a=st.floats(-0.03, 0.03), b=st.floats(-0.3, 0.3))
def test_parameter_map_matches_closed_form(transform, a, b):
    assert transform.params_forward((a, b)) == pytest.approx(example_raw_to_nf_params(a, b), abs=1e-8)


@given(a=st.floats(-0.03, 0.03), b=st.floats(-0.3, 0.3))
def test_parameter_inverse_round_trip(transform, a, b):
    mu_eta = transform.params_forward((a, b))
    assert transform.params_inverse(mu_eta) == pytest.approx((a, b), abs=1e-9)


@given(u=st.floats(-0.2, 0.2), v=st.floats(-0.2, 0.2), a=st.floats(-0.03, 0.03), b=st.floats(-0.3, 0.3))
def test_state_map_matches_closed_form(transform, u, v, a, b):
    got = transform.state_forward(u, v, (a, b))
    assert got == pytest.approx(example_raw_to_nf_state(u, v, a, b), abs=1e-9)
    assert transform.state_inverse(*got, (a, b)) == pytest.approx((u, v), abs=1e-9)


def test_transformed_system_is_a_normal_form(transform, nf):
    t = transform.apply()
    r = t.invariant_residuals()
    for key in ("constant", "mu_term", "df_dy", "tau_left", "dg_dy"):
        assert r[key] < 1e-8, key
    for x, y in [(-0.1, 0.05), (0.07, -0.02), (0.0, 0.1)]:
        for p in [(0.01, 0.0), (0.02, -0.01)]:
            assert t.rhs(x, y, p) == pytest.approx(nf.rhs(x, y, p), abs=1e-9)


def test_invariants_of_example(inv):
    assert inv.a0 == pytest.approx(A0, rel=1e-5)
    assert inv.omega == pytest.approx(OMEGA, rel=1e-5)
    assert inv.tau_R == pytest.approx(TAU_R, rel=1e-5)
    assert inv.delta_R == pytest.approx(DELTA_R, rel=1e-5)
    assert inv.partials["f_xx"] == pytest.approx(250 / 1089, rel=1e-6)
    assert inv.partials["g_xy"] == pytest.approx(80 / 1089, rel=1e-6)


@pytest.mark.parametrize("h", [2e-3, 5e-3, 2e-2])
def test_a0_is_step_robust(nf, h):
    assert compute_invariants(nf, h=h).a0 == pytest.approx(A0, rel=1e-5)


def test_invariants_through_transform(transform, inv):
    got = compute_invariants(transform.apply())
    assert got.a0 == pytest.approx(inv.a0, rel=1e-5)
    assert got.tau_R == pytest.approx(inv.tau_R, rel=1e-6)


def test_omega_matches_codim2_frequency(codim2, inv):
    assert inv.omega == pytest.approx(abs(codim2.left_eigs[0].imag), abs=1e-8)


def test_linear_system_is_degenerate():
    def f(x, y, p):
        mu, eta = p
        return eta * x + y, -mu - 0.5 * x

    def g(x, y, p):
        mu, eta = p
        return (eta - 0.2) * x + y, -mu - 0.25 * x

    nf = make_normal_form(f, g, name="linear")
    with pytest.raises(DegenerateCase):
        compute_invariants(nf)
    assert compute_invariants(nf, check=False).a0 == pytest.approx(0.0, abs=1e-9)


def _complex_cubic(omega, c):
    """Companion form whose complex amplitude ``z = x + i y / omega`` obeys ``z' = -i omega z + c |z|^2 z``."""

    def make(shift):
        def f(x, y, p):
            mu, eta = p
            z = complex(x, y / omega)
            n = c * abs(z) ** 2 * z
            return (eta + shift) * x + y + n.real, -mu - omega * omega * x + omega * n.imag

        return f

    return make_normal_form(make(0.0), make(-0.2), name="cubic")


@pytest.mark.parametrize("omega", [1.0, 1 / math.sqrt(2), 2.0])
@pytest.mark.parametrize("c", [complex(-1, 0), complex(-1, 0.7), complex(0.4, -0.3)])
def test_a0_recovers_cubic_coefficient(omega, c):
    assert compute_invariants(_complex_cubic(omega, c)).a0 == pytest.approx(c.real, abs=1e-6)


def test_criticality_of_example(inv):
    assert criticality(inv) == {"hopf": "subcritical", "saddle_node_branch_exists": True,
                                "right_equilibrium": "attracting"}
    assert inv.a0 * inv.tau_R == pytest.approx(-5 / 88, rel=1e-5)


def _inv(a0, tau_R, delta_R=0.25):
    return InvariantSet(omega=1.0, a0=a0, tau_R=tau_R, delta_R=delta_R, delta_L=1.0, flags={})


def test_criticality_table():
    c = criticality(_inv(-1.0, -1.0))
    assert c["hopf"] == "supercritical" and not c["saddle_node_branch_exists"]
    assert criticality(_inv(1.0, -1.0, delta_R=-0.5))["right_equilibrium"] == "saddle"
    assert criticality(_inv(1.0, 0.3))["right_equilibrium"] == "repelling"


def test_predicted_coefficients(inv):
    pred = predicted_coefficients(inv)
    assert pred["h1_slope"] == pytest.approx(20 / 33, rel=1e-6)
    assert pred["h2_minus_h1"] == pytest.approx(-25 / 11, rel=1e-5)
    exact = -8 * math.pi**2 * A0**3 / (3 * OMEGA**12 * TAU_R**2)
    assert pred["h3_minus_h2"] == pytest.approx(exact, rel=1e-5)
    assert exact == pytest.approx(-965.5, abs=0.1)


@given(a=st.floats(-1, 1), b=st.floats(-1, 1), c=st.floats(-1, 1))
def test_partial_is_exact_on_cubics(a, b, c):
    def f(x, y):
        return a * x**3 + b * x * y * y + c * x * x

    assert partial(f, 3, 0) == pytest.approx(6 * a, abs=1e-8)
    assert partial(f, 1, 2) == pytest.approx(2 * b, abs=1e-8)
    assert partial(f, 2, 0) == pytest.approx(2 * c, abs=1e-8)


def test_curved_switch_is_rejected():
    raw = make_example_raw()
    curved = PiecewiseSystem(raw.f_left, raw.f_right, lambda u, v, p: u - 0.8 * v + u * u, raw.param_names, name="curved")
    with pytest.raises(DegenerateCase):
        build_transform(curved, locate_codim2(curved))


def test_flatten_manifold():
    def c(y):
        return 0.3 * y * y

    def f(x, y, p):
        return y + 0.1 * (x - c(y)) - abs(x - c(y)), -x

    curved = PiecewiseSystem(f, f, lambda x, y, p: x - c(y), (), name="curved", default_params=())
    flat = flatten_manifold(curved, c)
    assert flat.switch_fn(0.3, 0.2, ()) == 0.3
    for X, y in [(0.0, 0.4), (0.1, -0.2), (-0.2, 0.3)]:
        fx, fy = f(X + c(y), y, ())
        assert flat.f_left(X, y, ()) == pytest.approx((fx - 0.6 * y * fy, fy), abs=1e-8)
    assert check_continuity(flat, (-1, 1, -1, 1), 20, ()) < 1e-10
    with pytest.raises(DegenerateCase):
        flatten_manifold(curved, lambda y: 0.0)

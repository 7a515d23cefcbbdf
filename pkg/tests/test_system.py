import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pwsbif.errors import NoManifoldInRegion
from pwsbif.system import (
    FIXTURES,
    LEFT,
    RIGHT,
    PiecewiseSystem,
    check_continuity,
    example_nf_to_raw_params,
    example_nf_to_raw_state,
    example_raw_to_nf_params,
    example_raw_to_nf_state,
    get_system,
    make_example_normalform,
    make_example_raw,
)

small = st.floats(-0.2, 0.2)


def test_raw_origin_is_equilibrium_on_manifold(raw):
    assert raw.rhs(0.0, 0.0, (0.0, 0.0)) == pytest.approx((0.0, 0.0), abs=1e-15)
    assert raw.switch_fn(0.0, 0.0, (0.0, 0.0)) == 0.0


def test_raw_manifold_line(raw):
    assert raw.switch_fn(0.8, 1.0, (0.3, -0.2)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("p", [(0.0, 0.0), (0.3, -0.7), (-1.0, 2.0)])
def test_raw_pieces_agree_exactly_where_kink_vanishes(raw, p):
    # u/8 - v/10 = 0 at (0.4, 0.5)
    assert raw.f_left(0.4, 0.5, p) == raw.f_right(0.4, 0.5, p)


def test_nf_jacobians_at_origin(nf):
    np.testing.assert_allclose(nf.jacobian(LEFT, 0, 0, (0, 0)), [[0, 1], [-0.5, 0]], atol=1e-12)
    np.testing.assert_allclose(nf.jacobian(RIGHT, 0, 0, (0, 0)), [[-0.2, 1], [-0.25, 0]], atol=1e-12)


def test_nf_defining_properties(nf):
    r = nf.invariant_residuals()
    for key in ("constant", "mu_term", "df_dy", "tau_left"):
        assert r[key] < 1e-9, key
    assert r["delta_left"] == pytest.approx(0.5, rel=1e-9)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_every_fixture_is_continuous(name):
    assert check_continuity(get_system(name)) < 1e-10


def test_continuity_boxes(raw, nf):
    assert check_continuity(raw, (-1, 1, -1, 1), 100, (0.0, 0.0)) < 1e-10
    assert check_continuity(nf, (-0.5, 0.5, -0.5, 0.5), 100, (0.01, 0.0)) < 1e-10
    assert check_continuity(nf, (-0.1, 0.1, -0.1, 0.1), 100, (0.0, 0.0)) < 1e-12


def test_broken_fixture_is_detected(raw):
    def shifted(u, v, p):
        a, b = raw.f_right(u, v, p)
        return a + 0.1, b

    broken = PiecewiseSystem(raw.f_left, shifted, raw.switch_fn, raw.param_names, name="broken")
    assert check_continuity(broken, (-1, 1, -1, 1), 50, (0.0, 0.0)) >= 0.1 - 1e-12


def test_no_manifold_in_region(nf):
    with pytest.raises(NoManifoldInRegion):
        check_continuity(nf, (1.0, 2.0, -1.0, 1.0), 10, (0.0, 0.0))


def test_unknown_fixture():
    with pytest.raises(KeyError):
        get_system("nope")


def test_parameter_count_checked(nf):
    with pytest.raises(ValueError):
        check_continuity(nf, None, 10, (0.0,))


@given(u=small, v=small, a=st.floats(-0.05, 0.05), b=st.floats(-0.5, 0.5))
def test_nf_is_raw_in_new_coordinates(u, v, a, b):
    raw, nf = make_example_raw(), make_example_normalform()
    x, y = example_raw_to_nf_state(u, v, a, b)
    mu, eta = example_raw_to_nf_params(a, b)
    # the state map is linear in (u, v) at fixed parameters
    M = np.array([[1.0, -0.8], [-0.1 * (b - 4.0), 1.0]])
    expected = M @ np.array(raw.rhs(u, v, (a, b)))
    np.testing.assert_allclose(nf.rhs(x, y, (mu, eta)), expected, atol=1e-9)


@given(u=small, v=small, a=st.floats(-0.05, 0.05), b=st.floats(-0.5, 0.5))
def test_example_maps_round_trip(u, v, a, b):
    mu, eta = example_raw_to_nf_params(a, b)
    assert example_nf_to_raw_params(mu, eta) == pytest.approx((a, b), abs=1e-12)
    x, y = example_raw_to_nf_state(u, v, a, b)
    assert example_nf_to_raw_state(x, y, mu, eta) == pytest.approx((u, v), abs=1e-12)


def test_parameter_map_closed_form():
    # eta = beta / 10; mu vanishes on alpha = 2 beta / 15
    assert example_raw_to_nf_params(0.0, 0.1)[1] == pytest.approx(0.01)
    assert example_raw_to_nf_params(2 * 0.3 / 15, 0.3)[0] == pytest.approx(0.0, abs=1e-15)
    assert example_nf_to_raw_params(0.0, 0.01) == pytest.approx((2 * 0.1 / 15, 0.1))


def test_side_of(nf):
    assert nf.side_of(-1e-3, 0.0, (0, 0)) == LEFT
    assert nf.side_of(1e-3, 0.0, (0, 0)) == RIGHT
    assert math.isfinite(nf.rhs(0.0, 0.3, (0.01, 0.0))[0])

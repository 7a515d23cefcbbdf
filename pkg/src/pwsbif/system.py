"""Piecewise-smooth continuous planar systems and the built-in fixtures.

A system is two smooth vector fields glued along the zero set of a switching
function.  The left field is active where ``switch_fn <= 0``.  Fields are plain
callables ``f(x, y, p) -> (fx, fy)`` where ``p`` is the parameter tuple, so a
system is cheap to define and trivially picklable when built from module-level
functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import NoManifoldInRegion

Field = Callable[[float, float, Sequence[float]], tuple]
Jacobian = Callable[[float, float, Sequence[float]], Sequence[Sequence[float]]]
SwitchFn = Callable[[float, float, Sequence[float]], float]
ParamVector = tuple
Box2D = tuple  # (xmin, xmax, ymin, ymax)

LEFT, RIGHT = "left", "right"


def fd_jacobian(f, x, y, p):
    """Central-difference Jacobian of a planar field."""
    hx = max(1e-6, 1e-6 * abs(x))
    hy = max(1e-6, 1e-6 * abs(y))
    fxp, fxm = f(x + hx, y, p), f(x - hx, y, p)
    fyp, fym = f(x, y + hy, p), f(x, y - hy, p)
    return np.array(
        [
            [(fxp[0] - fxm[0]) / (2 * hx), (fyp[0] - fym[0]) / (2 * hy)],
            [(fxp[1] - fxm[1]) / (2 * hx), (fyp[1] - fym[1]) / (2 * hy)],
        ]
    )


@dataclass(frozen=True)
class PiecewiseSystem:
    """Two planar vector fields joined continuously across ``switch_fn = 0``.

    Parameters
    ----------
    f_left, f_right : callable
        ``(x, y, p) -> (fx, fy)``.  ``f_left`` is used where ``switch_fn <= 0``.
    switch_fn : callable
        ``(x, y, p) -> float``.
    param_names : tuple of str
        Names of the entries of the parameter tuple ``p``.
    jac_left, jac_right : callable, optional
        Analytic Jacobians.  Central differences are used when absent.
    switch_grad : callable, optional
        Analytic gradient of ``switch_fn`` in the state.
    """

    f_left: Field
    f_right: Field
    switch_fn: SwitchFn
    param_names: tuple
    name: str = ""
    jac_left: Optional[Jacobian] = None
    jac_right: Optional[Jacobian] = None
    switch_grad: Optional[Callable] = None
    continuity_tol: float = 1e-8
    default_region: Box2D = (-1.0, 1.0, -1.0, 1.0)
    default_params: Optional[tuple] = None
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def params(self, *values, **named) -> ParamVector:
        """Build a parameter tuple, positionally or by name."""
        if named:
            if values:
                raise TypeError("give parameters positionally or by name, not both")
            missing = set(self.param_names) - set(named)
            extra = set(named) - set(self.param_names)
            if missing or extra:
                raise ValueError(f"expected parameters {self.param_names}")
            values = tuple(named[n] for n in self.param_names)
        return check_params(self, values)

    def field(self, side, x, y, p):
        return self.f_left(x, y, p) if side == LEFT else self.f_right(x, y, p)

    def side_of(self, x, y, p):
        return LEFT if self.switch_fn(x, y, p) <= 0.0 else RIGHT

    def rhs(self, x, y, p):
        return self.field(self.side_of(x, y, p), x, y, p)

    def jacobian(self, side, x, y, p) -> np.ndarray:
        jac = self.jac_left if side == LEFT else self.jac_right
        if jac is not None:
            return np.asarray(jac(x, y, p), dtype=float)
        return fd_jacobian(self.f_left if side == LEFT else self.f_right, x, y, p)

    def switch_gradient(self, x, y, p) -> tuple:
        if self.switch_grad is not None:
            gx, gy = self.switch_grad(x, y, p)
            return float(gx), float(gy)
        h = 1e-6 * max(1.0, abs(x), abs(y))
        s = self.switch_fn
        return (
            (s(x + h, y, p) - s(x - h, y, p)) / (2 * h),
            (s(x, y + h, p) - s(x, y - h, p)) / (2 * h),
        )


class NormalFormSystem(PiecewiseSystem):
    """Companion-form system: switch ``x``, constant ``(0, -mu)``, ``tau_L = eta``.

    Parameters are always ``(mu, eta)``.
    """

    def invariant_residuals(self, eta=0.0) -> dict:
        """Residuals of the defining normal-form properties at ``mu = 0``."""
        p0 = (0.0, eta)
        fl = self.f_left(0.0, 0.0, p0)
        J = self.jacobian(LEFT, 0.0, 0.0, p0)
        mu = 1e-3
        shift = self.f_left(0.0, 0.0, (mu, eta))
        return {
            "constant": math.hypot(*fl),
            "mu_term": abs(shift[1] + mu) + abs(shift[0]),
            "df_dy": abs(J[0, 1] - 1.0),
            "tau_left": abs(J[0, 0] - eta),
            "dg_dy": abs(J[1, 1]),
            "delta_left": -J[1, 0],
        }


def check_params(sys: PiecewiseSystem, values) -> ParamVector:
    values = tuple(float(v) for v in values)
    if len(values) != len(sys.param_names):
        raise ValueError(
            f"{sys.name or 'system'} takes {len(sys.param_names)} parameters "
            f"{sys.param_names}, got {len(values)}"
        )
    return values


def _manifold_points(sys, region, n_samples, p, n_grid=65):
    xmin, xmax, ymin, ymax = region
    s = sys.switch_fn
    pts = []

    def scan(line):
        ts = np.linspace(0.0, 1.0, n_grid)
        vals = [s(*line(t), p) for t in ts]
        for i in range(n_grid - 1):
            if vals[i] == 0.0:
                return line(ts[i])
            if vals[i] * vals[i + 1] < 0.0:
                t = brentq(lambda t: s(*line(t), p), ts[i], ts[i + 1], xtol=1e-15, rtol=1e-15)
                return line(t)
        return None

    for yk in np.linspace(ymin, ymax, n_samples):
        pt = scan(lambda t, yk=yk: (xmin + t * (xmax - xmin), yk))
        if pt is not None:
            pts.append(pt)
    if len(pts) < n_samples:
        for xk in np.linspace(xmin, xmax, n_samples - len(pts)):
            pt = scan(lambda t, xk=xk: (xk, ymin + t * (ymax - ymin)))
            if pt is not None:
                pts.append(pt)
    return pts


def check_continuity(sys: PiecewiseSystem, region: Box2D = None, n_samples=100, params=None) -> float:
    """Largest ``|f_left - f_right|`` (max-norm) over points on the manifold.

    Points are found by root-finding ``switch_fn`` along horizontal lines
    through ``region`` (vertical lines as a fallback).
    """
    region = sys.default_region if region is None else region
    p = params if params is not None else (sys.default_params or (0.0,) * len(sys.param_names))
    p = check_params(sys, p)
    pts = _manifold_points(sys, region, n_samples, p)
    if not pts:
        raise NoManifoldInRegion(f"switch_fn has no sign change in {region}")
    worst = 0.0
    for x, y in pts:
        fl = sys.f_left(x, y, p)
        fr = sys.f_right(x, y, p)
        worst = max(worst, abs(fl[0] - fr[0]), abs(fl[1] - fr[1]))
    return worst


# ---------------------------------------------------------------------------
# fixtures


def _raw_left(u, v, p):
    a, b = p
    return (
        -a + 2.0 * b / 15.0 + v + 0.2 * u * u + u**3,
        -1.25 * a + b / 6.0 - 0.375 * u + 0.1 * (b - 1.0) * v - (0.125 * u - 0.1 * v),
    )


def _raw_right(u, v, p):
    a, b = p
    return (
        -a + 2.0 * b / 15.0 + v + 0.2 * u * u + u**3,
        -1.25 * a + b / 6.0 - 0.375 * u + 0.1 * (b - 1.0) * v + (0.125 * u - 0.1 * v),
    )


def _raw_jac(sign):
    # sign of the |u/8 - v/10| term: -1 on the left, +1 on the right
    def jac(u, v, p):
        b = p[1]
        return (
            (0.4 * u + 3.0 * u * u, 1.0),
            (-0.375 + sign * 0.125, 0.1 * (b - 1.0) - sign * 0.1),
        )

    return jac


def _raw_switch(u, v, p):
    return u - 0.8 * v


def _raw_switch_grad(u, v, p):
    return 1.0, -0.8


def make_example_raw() -> PiecewiseSystem:
    """The worked example in the original (u, v; alpha, beta) coordinates.

    The switching manifold is the line ``u = 4 v / 5``.
    """
    return PiecewiseSystem(
        f_left=_raw_left,
        f_right=_raw_right,
        switch_fn=_raw_switch,
        param_names=("alpha", "beta"),
        name="example-raw",
        jac_left=_raw_jac(-1.0),
        jac_right=_raw_jac(+1.0),
        switch_grad=_raw_switch_grad,
        default_region=(-1.0, 1.0, -1.0, 1.0),
        default_params=(0.0, 0.0),
    )


def nf_u(x, y, eta):
    """The original ``u`` coordinate seen from the normal-form frame."""
    return (25.0 * x + 20.0 * y) / (33.0 - 20.0 * eta)


def _nf_field(tau_shift, delta):
    def f(x, y, p):
        mu, eta = p
        u = (25.0 * x + 20.0 * y) / (33.0 - 20.0 * eta)
        n = 0.2 * u * u + u * u * u
        return (
            (eta + tau_shift) * x + y + n,
            -mu - delta * x + (0.4 - eta) * n,
        )

    return f


def _nf_jac(tau_shift, delta):
    def jac(x, y, p):
        mu, eta = p
        k = 1.0 / (33.0 - 20.0 * eta)
        u = k * (25.0 * x + 20.0 * y)
        dn = 0.4 * u + 3.0 * u * u
        nx, ny = dn * 25.0 * k, dn * 20.0 * k
        c = 0.4 - eta
        return (
            (eta + tau_shift + nx, 1.0 + ny),
            (-delta + c * nx, c * ny),
        )

    return jac


def _x_switch(x, y, p):
    return x


def _x_switch_grad(x, y, p):
    return 1.0, 0.0


def make_normal_form(f_left, f_right, name="", jac_left=None, jac_right=None, **kw) -> NormalFormSystem:
    """Wrap two companion-form fields as a :class:`NormalFormSystem`."""
    return NormalFormSystem(
        f_left=f_left,
        f_right=f_right,
        switch_fn=_x_switch,
        param_names=("mu", "eta"),
        name=name,
        jac_left=jac_left,
        jac_right=jac_right,
        switch_grad=_x_switch_grad,
        default_region=kw.pop("default_region", (-0.5, 0.5, -0.5, 0.5)),
        default_params=kw.pop("default_params", (0.0, 0.0)),
        **kw,
    )


def make_example_normalform() -> NormalFormSystem:
    """The worked example after the transformation to companion form."""
    return make_normal_form(
        _nf_field(0.0, 0.5),
        _nf_field(-0.2, 0.25),
        name="example-nf",
        jac_left=_nf_jac(0.0, 0.5),
        jac_right=_nf_jac(-0.2, 0.25),
    )


def example_raw_to_nf_state(u, v, alpha, beta):
    """State map raw -> normal form for the worked example."""
    return u - 0.8 * v, -0.1 * (beta - 4.0) * u + v


def example_nf_to_raw_state(x, y, mu, eta):
    u = nf_u(x, y, eta)
    return u, y - (0.4 - eta) * u


def example_raw_to_nf_params(alpha, beta):
    """Closed-form parameter map of the worked example.

    The sign of ``mu`` is fixed by requiring the normal-form constant term
    to be ``(0, -mu)``.
    """
    return 0.1 * (16.5 - beta) * (alpha - 2.0 * beta / 15.0), 0.1 * beta


def example_nf_to_raw_params(mu, eta):
    beta = 10.0 * eta
    return 10.0 * mu / (16.5 - beta) + 2.0 * beta / 15.0, beta


def _center(x, y, p):
    return y, -x


def make_linear_center() -> PiecewiseSystem:
    """``x' = y, y' = -x`` on both sides of the far-away line ``x = 10``."""
    return PiecewiseSystem(
        f_left=_center,
        f_right=_center,
        switch_fn=lambda x, y, p: x - 10.0,
        param_names=(),
        name="linear-center",
        jac_left=lambda x, y, p: ((0.0, 1.0), (-1.0, 0.0)),
        jac_right=lambda x, y, p: ((0.0, 1.0), (-1.0, 0.0)),
        switch_grad=lambda x, y, p: (1.0, 0.0),
        default_region=(9.0, 11.0, -1.0, 1.0),
        default_params=(),
    )


def make_linear_focus(nu=-0.05, xi=1.0, center=(-1.0, 0.0)) -> PiecewiseSystem:
    """Linear focus with eigenvalues ``nu +- i xi`` about ``center``.

    Both pieces are identical and the manifold ``x = 10`` is far away, so the
    return map to any ray from the centre is exactly ``exp(2 pi nu / xi)``.
    The focus turns clockwise, matching the orientation of the Hopf cycles.
    """
    cx, cy = center

    def f(x, y, p):
        dx, dy = x - cx, y - cy
        return nu * dx + xi * dy, -xi * dx + nu * dy

    def jac(x, y, p):
        return (nu, xi), (-xi, nu)

    return PiecewiseSystem(
        f_left=f,
        f_right=f,
        switch_fn=lambda x, y, p: x - 10.0,
        param_names=(),
        name="linear-focus",
        jac_left=jac,
        jac_right=jac,
        switch_grad=lambda x, y, p: (1.0, 0.0),
        default_region=(9.0, 11.0, -1.0, 1.0),
        default_params=(),
        meta={"nu": nu, "xi": xi, "center": center},
    )


FIXTURES = {
    "example-raw": make_example_raw,
    "example-nf": make_example_normalform,
    "linear-center": make_linear_center,
    "linear-focus": make_linear_focus,
}


def get_system(name: str) -> PiecewiseSystem:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown system {name!r}; known: {', '.join(sorted(FIXTURES))}") from None

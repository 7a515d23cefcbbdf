"""Reduction to companion normal form and the invariants that govern the unfolding.

The reduction follows four steps, each realized numerically for a parameter
tuple ``p`` of the raw system:

1. straighten the (affine) switching line so the switch value becomes the
   first coordinate ``X`` and keep one raw coordinate ``W``;
2. shift the first parameter by ``phi(p2)``, the value that puts the left
   equilibrium on the manifold;
3. shift ``W`` so that ``X' = 0`` at the manifold point ``(0, w0)``;
4. replace ``W`` by ``-d X + b (W - w0)`` which makes the left linear part a
   companion matrix; the parameters become ``mu = -b W'(0, w0)`` and
   ``eta = a + d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .equilibria import find_equilibrium, spectrum
from .errors import DegenerateCase, NoConvergence, OutOfChartRange, SingularJacobian, WrongSpectrum
from .system import LEFT, RIGHT, NormalFormSystem, PiecewiseSystem, make_normal_form

LOCATE_TOL = 1e-10
GENERICITY_TOL = 1e-6
FD_STEP = 5e-3

# 1D central stencils of fourth order: (offsets, weights, derivative order)
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12)),
    2: ((-2, -1, 0, 1, 2), (-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12)),
    3: ((-3, -2, -1, 1, 2, 3), (1 / 8, -1.0, 13 / 8, -13 / 8, 1.0, -1 / 8)),
}


def partial(fun, i, j, h=FD_STEP, x0=0.0, y0=0.0):
    """``d^(i+j) fun / dx^i dy^j`` at ``(x0, y0)``.

    Tensor product of fourth-order central stencils, refined by one
    Richardson step over ``{h, h/2}``.
    """

    def raw(hh):
        ox, wx = _STENCILS[i]
        oy, wy = _STENCILS[j]
        s = 0.0
        for a, wa in zip(ox, wx):
            for b, wb in zip(oy, wy):
                s += wa * wb * fun(x0 + a * hh, y0 + b * hh)
        return s / hh ** (i + j)

    if i + j == 0:
        return fun(x0, y0)
    return (16.0 * raw(0.5 * h) - raw(h)) / 15.0


# ---------------------------------------------------------------------------
# codimension-two point


@dataclass(frozen=True)
class CodimTwoPoint:
    state: tuple
    params: tuple
    residuals: dict
    left_eigs: tuple = ()
    right_eigs: tuple = ()


def _eigs(J):
    nu, xi, _, _ = spectrum(J)
    return complex(nu, xi), complex(nu, -xi)


def locate_codim2(sys: PiecewiseSystem, guess_state=(0.0, 0.0), guess_params=(0.0, 0.0),
                  tol=LOCATE_TOL, max_iter=50) -> CodimTwoPoint:
    """Solve ``f_left = 0``, ``switch = 0``, ``trace J_left = 0`` for ``(x, y, p1, p2)``.

    Raises
    ------
    NoConvergence
        Newton did not reach ``tol``.
    WrongSpectrum
        The left eigenvalues at the solution are real.
    """
    if len(sys.param_names) != 2:
        raise ValueError("locate_codim2 needs a two-parameter system")

    def F(z):
        x, y, p = z[0], z[1], (z[2], z[3])
        fx, fy = sys.f_left(x, y, p)
        J = sys.jacobian(LEFT, x, y, p)
        return np.array([fx, fy, sys.switch_fn(x, y, p), J[0, 0] + J[1, 1]])

    z = np.array([*guess_state, *guess_params], dtype=float)
    r = F(z)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            break
        D = np.empty((4, 4))
        for k in range(4):
            h = 1e-6 * max(1.0, abs(z[k]))
            e = np.zeros(4)
            e[k] = h
            D[:, k] = (F(z + e) - F(z - e)) / (2 * h)
        try:
            dz = np.linalg.solve(D, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian("singular Jacobian in codimension-two solve") from exc
        lam = 1.0
        for _ in range(30):
            zn = z + lam * dz
            rn = F(zn)
            if np.max(np.abs(rn)) < np.max(np.abs(r)):
                break
            lam *= 0.5
        z, r = zn, rn
    if np.max(np.abs(r)) >= tol:
        raise NoConvergence(f"codimension-two residual {np.max(np.abs(r)):.3e}")
    x, y, p = float(z[0]), float(z[1]), (float(z[2]), float(z[3]))
    JL = sys.jacobian(LEFT, x, y, p)
    JR = sys.jacobian(RIGHT, x, y, p)
    nu, xi, det, _ = spectrum(JL)
    if xi <= 0.0:
        raise WrongSpectrum(f"left eigenvalues are real at the solution (det={det:.3g})")
    return CodimTwoPoint(
        state=(x, y),
        params=p,
        residuals={
            "equilibrium": float(math.hypot(r[0], r[1])),
            "nu": float(abs(nu)),
            "switch": float(abs(r[2])),
        },
        left_eigs=_eigs(JL),
        right_eigs=_eigs(JR),
    )


# ---------------------------------------------------------------------------
# transformation


@dataclass(frozen=True)
class _Coeffs:
    phi: float
    w_star: float
    w0: float
    a: float
    b: float
    c: float
    d: float
    w_dot: float


@dataclass
class TransformRecord:
    """Numerical reduction of a raw system to companion normal form.

    Coefficients are recomputed (and cached) for each raw parameter tuple.
    ``phi`` and ``psi`` are available as functions; ``params_inverse`` uses a
    two-dimensional Newton solve.
    """

    sys: PiecewiseSystem
    point: CodimTwoPoint
    grad: tuple  # constant gradient of the switch in raw coordinates
    keep: int  # raw coordinate index kept as the second coordinate W
    _cache: dict = field(default_factory=dict, repr=False)

    # -- raw <-> straightened (X, W) coordinates -----------------------------
    def _to_xw(self, u, v, p):
        return self.sys.switch_fn(u, v, p), (u, v)[self.keep]

    def _from_xw(self, X, W, p):
        gu, gv = self.grad
        c0 = self.sys.switch_fn(0.0, 0.0, p)
        if self.keep == 1:
            return (X - c0 - gv * W) / gu, W
        return W, (X - c0 - gu * W) / gv

    def _xw_field(self, side, X, W, p):
        u, v = self._from_xw(X, W, p)
        fu, fv = self.sys.field(side, u, v, p)
        gu, gv = self.grad
        return gu * fu + gv * fv, (fu, fv)[self.keep]

    def _xw_jac(self, X, W, p):
        # chain rule through the constant matrix T = d(X, W)/d(u, v)
        u, v = self._from_xw(X, W, p)
        T = np.array([self.grad, (0.0, 1.0) if self.keep == 1 else (1.0, 0.0)])
        return T @ self.sys.jacobian(LEFT, u, v, p) @ np.linalg.inv(T)

    # -- scalar functions of the construction ------------------------------
    def phi(self, p2):
        """First-parameter value at which the left equilibrium sits on the manifold."""
        p1 = self.point.params[0]
        guess = self.point.state

        def s_of(q1):
            eq = find_equilibrium(self.sys, LEFT, guess, (q1, p2), newton_tol=1e-14)
            return self.sys.switch_fn(*eq.location, (q1, p2)), eq.location

        s, guess = s_of(p1)
        for _ in range(60):
            h = 1e-6 * max(1.0, abs(p1))
            ds = (s_of(p1 + h)[0] - s_of(p1 - h)[0]) / (2 * h)
            if ds == 0.0:
                raise DegenerateCase("dx*/dmu", 0.0)
            step = -s / ds
            p1 += step
            s, guess = s_of(p1)
            if abs(step) < 1e-14 * max(1.0, abs(p1)) or abs(s) < 1e-15:
                return p1
        if abs(s) < 1e-12:
            return p1
        raise NoConvergence(f"phi({p2:g}) did not converge")

    def coeffs(self, p) -> _Coeffs:
        p = (float(p[0]), float(p[1]))
        hit = self._cache.get(p)
        if hit is not None:
            return hit
        phi = self.phi(p[1])
        pc = (phi, p[1])
        eq = find_equilibrium(self.sys, LEFT, self.point.state, pc)
        w_star = self._to_xw(*eq.location, pc)[1]
        # manifold point where X' vanishes for the actual parameters
        w = w_star
        for _ in range(60):
            fx = self._xw_field(LEFT, 0.0, w, p)[0]
            h = 1e-7 * max(1.0, abs(w))
            dfx = (self._xw_field(LEFT, 0.0, w + h, p)[0] - self._xw_field(LEFT, 0.0, w - h, p)[0]) / (2 * h)
            if dfx == 0.0:
                raise DegenerateCase("b", 0.0)
            step = -fx / dfx
            w += step
            if abs(step) < 1e-15 * max(1.0, abs(w)):
                break
        J = self._xw_jac(0.0, w, p)
        c = _Coeffs(
            phi=phi, w_star=w_star, w0=w,
            a=J[0, 0], b=J[0, 1], c=J[1, 0], d=J[1, 1],
            w_dot=self._xw_field(LEFT, 0.0, w, p)[1],
        )
        self._cache[p] = c
        return c

    def psi(self, p):
        """Extra shift of ``W`` (beyond the equilibrium shift) that zeroes ``X'`` at the manifold point."""
        c = self.coeffs(p)
        return c.w0 - c.w_star

    # -- maps ---------------------------------------------------------------
    def params_forward(self, p):
        c = self.coeffs(p)
        return float(-c.b * c.w_dot), float(c.a + c.d)

    def params_inverse(self, mu_eta, guess=None, tol=1e-14):
        """Raw parameters mapping to ``(mu, eta)``.

        Raises
        ------
        OutOfChartRange
            Newton fails to converge or leaves the chart.
        """
        target = np.array(mu_eta, dtype=float)
        z = np.array(guess if guess is not None else self._linear_guess(target), dtype=float)
        for _ in range(40):
            try:
                r = np.array(self.params_forward(z)) - target
            except (NoConvergence, SingularJacobian, DegenerateCase) as exc:
                raise OutOfChartRange(f"parameters {tuple(z)} outside the chart: {exc}") from exc
            if np.max(np.abs(r)) < tol:
                return float(z[0]), float(z[1])
            D = self._param_jac(z)
            try:
                dz = np.linalg.solve(D, -r)
            except np.linalg.LinAlgError as exc:
                raise OutOfChartRange("parameter map is singular") from exc
            z = z + dz
            if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > 1e3:
                raise OutOfChartRange(f"parameter inverse of {tuple(target)} diverged")
            if np.max(np.abs(dz)) < 1e-15 * max(1.0, np.max(np.abs(z))):
                return float(z[0]), float(z[1])
        if np.max(np.abs(r)) < 1e-11:
            return float(z[0]), float(z[1])
        raise OutOfChartRange(f"parameter inverse of {tuple(target)} did not converge")

    def _param_jac(self, z):
        D = np.empty((2, 2))
        for k in range(2):
            h = 1e-6 * max(1.0, abs(z[k]))
            e = np.zeros(2)
            e[k] = h
            D[:, k] = (np.array(self.params_forward(z + e)) - np.array(self.params_forward(z - e))) / (2 * h)
        return D

    def _linear_guess(self, target):
        z0 = np.array(self.point.params)
        return z0 + np.linalg.solve(self._param_jac(z0), target - np.array(self.params_forward(z0)))

    def state_forward(self, u, v, p):
        c = self.coeffs(p)
        X, W = self._to_xw(u, v, p)
        return X, -c.d * X + c.b * (W - c.w0)

    def state_inverse(self, x, y, p):
        c = self.coeffs(p)
        W = (y + c.d * x) / c.b + c.w0
        return self._from_xw(x, W, p)

    def velocity_forward(self, side, u, v, p):
        c = self.coeffs(p)
        fu, fv = self.sys.field(side, u, v, p)
        gu, gv = self.grad
        dX = gu * fu + gv * fv
        dW = (fu, fv)[self.keep]
        return dX, -c.d * dX + c.b * dW

    def apply(self, name=None) -> NormalFormSystem:
        """The raw system expressed in normal-form coordinates and parameters."""
        inverse = lru_cache(maxsize=256)(lambda mu, eta: self.params_inverse((mu, eta)))

        def make(side):
            def f(x, y, q):
                p = inverse(float(q[0]), float(q[1]))
                u, v = self.state_inverse(x, y, p)
                return self.velocity_forward(side, u, v, p)

            return f

        return make_normal_form(make(LEFT), make(RIGHT), name=name or f"{self.sys.name}-transformed")


def flatten_manifold(sys: PiecewiseSystem, c, dc=None, n_check=9) -> PiecewiseSystem:
    """Straighten a curved switching manifold ``x = c(y)`` to ``X = 0``.

    The new state is ``(X, y) = (x - c(y), y)``, so ``X' = x' - c'(y) y'``.
    ``dc`` defaults to a central difference of ``c``.

    Raises
    ------
    DegenerateCase
        ``switch_fn`` is not ``x - c(y)`` at sampled points.
    """
    dc = dc or (lambda y, h=1e-6: (c(y + h) - c(y - h)) / (2 * h))
    p0 = sys.default_params or (0.0,) * len(sys.param_names)
    for y in np.linspace(-0.5, 0.5, n_check):
        for x in (-0.3, 0.2):
            r = sys.switch_fn(x, y, p0) - (x - c(y))
            if abs(r) > 1e-10:
                raise DegenerateCase("switch_fn of the form x - c(y)", float(r))

    def make(side):
        f = sys.f_left if side == LEFT else sys.f_right

        def g(X, y, p):
            fx, fy = f(X + c(y), y, p)
            return fx - dc(y) * fy, fy

        return g

    return PiecewiseSystem(
        f_left=make(LEFT),
        f_right=make(RIGHT),
        switch_fn=lambda X, y, p: X,
        param_names=sys.param_names,
        name=f"{sys.name}-flat",
        switch_grad=lambda X, y, p: (1.0, 0.0),
        default_params=sys.default_params,
    )


def build_transform(sys: PiecewiseSystem, pt: CodimTwoPoint) -> TransformRecord:
    """Set up the reduction of ``sys`` about the codimension-two point ``pt``.

    Raises
    ------
    DegenerateCase
        The switch is not affine in the state, or one of ``b``, ``q`` and
        ``d(a + d)/d p2`` vanishes.
    """
    x0, y0 = pt.state
    p = pt.params
    g = sys.switch_gradient(x0, y0, p)
    for dx, dy in ((0.3, 0.0), (0.0, 0.3), (-0.2, 0.1)):
        g2 = sys.switch_gradient(x0 + dx, y0 + dy, p)
        if abs(g2[0] - g[0]) + abs(g2[1] - g[1]) > 1e-8:
            raise DegenerateCase("switch_fn affine in the state", abs(g2[0] - g[0]) + abs(g2[1] - g[1]))
    keep = 1 if abs(g[0]) >= abs(g[1]) else 0
    rec = TransformRecord(sys=sys, point=pt, grad=(float(g[0]), float(g[1])), keep=keep)
    c = rec.coeffs(p)
    if abs(c.b) < GENERICITY_TOL:
        raise DegenerateCase("b", c.b)
    D = rec._param_jac(np.array(p))
    if abs(D[0, 0]) < GENERICITY_TOL:
        raise DegenerateCase("q", D[0, 0])
    if abs(np.linalg.det(D)) < GENERICITY_TOL:
        raise DegenerateCase("d nu/d eta", float(np.linalg.det(D)))
    return rec


# ---------------------------------------------------------------------------
# invariants


@dataclass(frozen=True)
class InvariantSet:
    omega: float
    a0: float
    tau_R: float
    delta_R: float
    delta_L: float
    flags: dict  # name -> (value, margin above the genericity threshold)
    partials: dict = field(default_factory=dict, compare=False)

    def as_dict(self):
        return {"omega": self.omega, "a0": self.a0, "tau_R": self.tau_R, "delta_R": self.delta_R, "delta_L": self.delta_L}


_PARTIALS = {
    "f_xx": (0, 2, 0), "f_xy": (0, 1, 1), "f_yy": (0, 0, 2),
    "f_xxx": (0, 3, 0), "f_xyy": (0, 1, 2),
    "g_xx": (1, 2, 0), "g_xy": (1, 1, 1), "g_yy": (1, 0, 2),
    "g_xxy": (1, 2, 1), "g_yyy": (1, 0, 3),
}


def lyapunov_a0(d, omega):
    """Cubic coefficient from second and third partials of the left companion field."""
    w2 = omega * omega
    return (
        (d["f_xxx"] + d["g_xxy"] + w2 * d["f_xyy"] + w2 * d["g_yyy"]) / 16.0
        - d["f_xy"] * (d["f_xx"] + w2 * d["f_yy"]) / 16.0
        + d["g_xy"] * (d["g_xx"] / w2 + d["g_yy"]) / 16.0
        + (d["f_xx"] * d["g_xx"] / w2 - w2 * d["f_yy"] * d["g_yy"]) / 16.0
    )


def compute_invariants(nf: NormalFormSystem, h=FD_STEP, check=True) -> InvariantSet:
    """Measure ``omega, a0, tau_R, delta_R`` at ``(x, y; mu, eta) = 0``.

    Raises
    ------
    DegenerateCase
        ``|a0|`` or ``|tau_R|`` below the genericity threshold (only when
        ``check`` is true).
    """
    p0 = (0.0, 0.0)
    JL = nf.jacobian(LEFT, 0.0, 0.0, p0)
    JR = nf.jacobian(RIGHT, 0.0, 0.0, p0)
    delta_L = -float(JL[1, 0])
    if delta_L <= 0:
        raise DegenerateCase("delta_L > 0", delta_L)
    omega = math.sqrt(delta_L)
    tau_R = float(JR[0, 0] + JR[1, 1])
    delta_R = float(JR[0, 0] * JR[1, 1] - JR[0, 1] * JR[1, 0])
    parts = {}
    for name, (comp, i, j) in _PARTIALS.items():
        parts[name] = partial(lambda x, y, c=comp: nf.f_left(x, y, p0)[c], i, j, h)
    a0 = lyapunov_a0(parts, omega)
    dnu = _dnu_deta(nf)
    flags = {
        "a0": (a0, abs(a0) - GENERICITY_TOL),
        "tau_R": (tau_R, abs(tau_R) - GENERICITY_TOL),
        "dnu_deta": (dnu, abs(dnu) - GENERICITY_TOL),
        "dx_dmu": (-1.0 / delta_L, 1.0 / delta_L - GENERICITY_TOL),
    }
    if check:
        if abs(a0) < GENERICITY_TOL:
            raise DegenerateCase("a0", a0)
        if abs(tau_R) < GENERICITY_TOL:
            raise DegenerateCase("tau_R", tau_R)
    return InvariantSet(omega=omega, a0=float(a0), tau_R=tau_R, delta_R=delta_R, delta_L=delta_L, flags=flags, partials=parts)


def _dnu_deta(nf, h=1e-6):
    def nu(eta):
        J = nf.jacobian(LEFT, 0.0, 0.0, (0.0, eta))
        return 0.5 * (J[0, 0] + J[1, 1])

    return (nu(h) - nu(-h)) / (2 * h)


def criticality(inv: InvariantSet) -> dict:
    """Scenario selected by the signs of the invariants."""
    if inv.delta_R < 0:
        right = "saddle"
    elif inv.tau_R > 0:
        right = "repelling"
    else:
        right = "attracting"
    return {
        "hopf": "subcritical" if inv.a0 > 0 else "supercritical",
        "saddle_node_branch_exists": inv.a0 * inv.tau_R < 0,
        "right_equilibrium": right,
    }


def predicted_coefficients(inv: InvariantSet) -> dict:
    """Leading coefficients of the three loci from the invariants."""
    d = inv.partials
    w = inv.omega
    return {
        "h1_slope": (d["f_xx"] + d["g_xy"]) / w**2,
        "h2_minus_h1": -2.0 * inv.a0 / w**4,
        "h3_minus_h2": -8.0 * math.pi**2 * inv.a0**3 / (3.0 * w**12 * inv.tau_R**2),
    }


__all__ = [
    "CodimTwoPoint",
    "TransformRecord",
    "InvariantSet",
    "partial",
    "locate_codim2",
    "build_transform",
    "flatten_manifold",
    "compute_invariants",
    "lyapunov_a0",
    "criticality",
    "predicted_coefficients",
]

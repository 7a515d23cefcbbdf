"""Asymptotic return and discontinuity maps near the grazing orbit, and their checks.

All maps act on scaled coordinates ``x / mu`` (``eps_hat`` on the section,
``y_hat`` on the manifold).  Coefficient tables hold sympy expressions in the
named constants ``omega, a0, tau_R, a3`` and in the local values ``tau`` (the
right trace at the current parameters) and ``eta``; they are evaluated only
when a number is needed, so a wrong formula and a wrong measurement can be
told apart.

Kinds
-----
P1    section point -> manifold point, backwards along the left flow
P2    manifold -> manifold along the right flow
P3    manifold -> section, backwards along the left flow
Pdm   P3 o P2 o P1, the correction for an excursion to the right
Plhf  left flow once around the equilibrium, section to section
Pfull Plhf o Pdm
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .errors import DegenerateCase, ZeroGamma
from .flow import DEFAULT_OPTIONS, IntegratorOptions, StopCondition, integrate, poincare_return
from .system import LEFT, RIGHT

MU_MIN = 1e-4
KINDS = ("P1", "P2", "P3", "Pdm", "Plhf", "Pfull")

# symbols of the coefficient tables
omega, a0, tau_R, a3, tau, eta, mu, eta2, s = sp.symbols("omega a0 tau_R a3 tau eta mu eta2 s", real=True)
q1 = 4 * sp.pi * a0 / omega**5
CONSTANTS = (omega, a0, tau_R, a3)


def _table(kind):
    """Leading-order coefficients ``{(state power, mu power, eta2 power): expr}`` and the remainder order."""
    r = sp.Rational
    if kind == "P3":
        return {(2, 0, 0): r(1, 2), (3, 0, 0): eta / 3, (3, 1, 0): a3 / 3}, r(4)
    if kind == "P1":
        return {(r(1, 2), 0, 0): sp.sqrt(2), (1, 0, 0): -r(2, 3) * eta, (1, 1, 0): -r(2, 3) * a3}, r(3, 2)
    if kind == "P2":
        return {(1, 0, 0): -1, (2, 0, 0): -r(2, 3) * tau, (2, 1, 0): -r(2, 3) * a3}, r(3)
    if kind == "Pdm":
        return {(1, 0, 0): 1, (r(3, 2), 0, 0): 4 * sp.sqrt(2) / 3 * (tau - eta)}, r(2)
    if kind == "Plhf":
        return {(0, 0, 1): sp.pi / omega**3, (1, 0, 0): 1, (1, 0, 1): sp.pi / omega, (1, 2, 0): q1}, r(2)
    if kind == "Pfull":
        return {
            (0, 0, 1): sp.pi / omega**3,
            (1, 0, 0): 1,
            (1, 0, 1): sp.pi / omega,
            (1, 2, 0): q1,
            (r(3, 2), 0, 0): 4 * sp.sqrt(2) / 3 * tau_R,
        }, r(2)
    raise ValueError(f"kind must be one of {KINDS}")


@dataclass
class AsymptoticMap:
    """Truncated expansion ``sum c * s**p * mu**i * eta2**j`` of one map.

    ``values`` holds the measured constants; ``local`` maps ``(mu, eta)`` to
    the parameter-dependent entries ``{tau, eta}``.
    """

    kind: str
    terms: dict
    order: sp.Rational
    values: dict = field(default_factory=dict)
    local: object = None

    def __post_init__(self):
        self.terms = {k: sp.sympify(v) for k, v in self.terms.items()}
        half = any(sp.Rational(p).q != 1 for p, _, _ in self.terms)
        if half and self.kind not in ("P1", "Pdm", "Pfull", "composed"):
            raise ValueError(f"{self.kind} cannot carry half-integer powers")

    def expr(self):
        return sp.Add(*[c * s**p * mu**i * eta2**j for (p, i, j), c in self.terms.items()])

    def coefficient(self, key):
        return self.terms.get(tuple(key), sp.Integer(0))

    def _subs(self, mu_v, eta_v):
        sub = dict(self.values)
        if self.local is not None:
            sub.update(self.local(mu_v, eta_v))
        sub.setdefault(eta, eta_v)
        return sub

    def numeric(self, mu_v, eta_v, eta2_v=0.0):
        """Coefficients as floats: ``{state power: value}`` summed over the parameter powers."""
        sub = self._subs(mu_v, eta_v)
        out = {}
        for (p, i, j), c in self.terms.items():
            val = float(c.subs(sub)) * mu_v**i * eta2_v**j
            out[p] = out.get(p, 0.0) + val
        return out

    def __call__(self, x, mu_v, eta_v, eta2_v=0.0):
        coeffs = self.numeric(mu_v, eta_v, eta2_v)
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for p, c in coeffs.items():
            pf = float(p)
            total = total + c * (np.sign(x) * np.abs(x) ** pf if pf != int(pf) else x ** int(pf))
        return total if total.ndim else float(total)

    def check_finite(self):
        for key, c in self.terms.items():
            v = complex(c.subs(self.values).subs({tau: self.values.get(tau_R, 0.0), eta: 0.0}))
            if not math.isfinite(abs(v)):
                raise DegenerateCase(f"coefficient {key} of {self.kind}", float("nan"))


def _local_of(nf):
    def local(mu_v, eta_v):
        J = nf.jacobian(RIGHT, 0.0, 0.0, (mu_v, eta_v))
        return {tau: float(J[0, 0] + J[1, 1]), eta: float(eta_v)}

    return local


def build_asymptotic(nf, inv, kind) -> AsymptoticMap:
    """Coefficient table of ``kind`` with constants taken from ``inv``.

    Raises
    ------
    DegenerateCase
        A coefficient evaluates to a non-finite number, or ``omega <= 0``.
    """
    if inv.omega <= 0:
        raise DegenerateCase("omega > 0", inv.omega)
    terms, order = _table(kind)
    values = {omega: inv.omega, a0: inv.a0, tau_R: inv.tau_R, a3: 0.5 * inv.partials.get("f_yy", 0.0)}
    amap = AsymptoticMap(kind, dict(terms), order, values, _local_of(nf))
    amap.check_finite()
    return amap


# ---------------------------------------------------------------------------
# symbolic composition


def compose(outer: AsymptoticMap, inner: AsymptoticMap, order=None) -> AsymptoticMap:
    """``outer o inner`` expanded in powers of the state, exact in the constants.

    Both maps must share their constants.  Powers of the state are kept below
    ``order`` (default: the smaller remainder order of the two).
    """
    order = sp.Rational(order if order is not None else min(outer.order, inner.order))
    chi = sp.Symbol("chi", positive=True)
    inner_e = inner.expr().subs(s, chi**2)
    # outer is a polynomial in s with possibly half-integer powers
    total = 0
    for (p, i, j), c in outer.terms.items():
        if p == 0:
            total += c * mu**i * eta2**j
            continue
        total += c * mu**i * eta2**j * _power_series(inner_e, sp.Rational(p), chi, 2 * order)
    total = sp.expand(total)
    terms = {}
    for term in sp.Add.make_args(total):
        powers = term.as_powers_dict()
        pc = sp.Rational(powers.get(chi, 0), 2)
        if pc >= order:
            continue
        pm = int(powers.get(mu, 0))
        pe = int(powers.get(eta2, 0))
        coef = sp.simplify(term / (chi ** (2 * pc) * mu**pm * eta2**pe))
        key = (pc if pc.q != 1 else int(pc), pm, pe)
        terms[key] = sp.simplify(terms.get(key, 0) + coef)
    terms = {k: v for k, v in terms.items() if v != 0}
    return AsymptoticMap("composed", terms, order, {**inner.values, **outer.values}, outer.local or inner.local)


def _power_series(expr, p, chi, n):
    """Series of ``expr**p`` in ``chi`` below ``chi**n``."""
    return sp.expand(sp.series(expr**p, chi, 0, int(n)).removeO())


def leading_part(amap: AsymptoticMap, keys):
    """Coefficients of ``keys`` at leading parameter order: ``tau -> tau_R``, ``eta -> 0``."""
    return {k: sp.simplify(amap.coefficient(k).subs({tau: tau_R, eta: 0})) for k in keys}


# ---------------------------------------------------------------------------
# direct numerics


def _pi_line(nf, p):
    from .orbits import make_pi_section

    return make_pi_section(nf, p)


def exact_map(kind, nf, params, x_hat, opts: IntegratorOptions = DEFAULT_OPTIONS):
    """Map ``kind`` evaluated by integrating the flow, in scaled coordinates.

    ``x_hat`` is ``eps_hat`` for P1, Pdm, Plhf and Pfull, and ``y_hat`` for
    P2 and P3 (P3 takes ``y_hat < 0``, P2 takes ``y_hat > 0``).
    """
    p = tuple(params)
    m = p[0]
    if m < MU_MIN:
        raise ValueError(f"scaled maps need mu >= {MU_MIN:g}")
    sec = _pi_line(nf, p)
    T = opts.max_time
    x_stop = StopCondition(fn=lambda x, y: x, armed=False, grad=lambda x, y: (1.0, 0.0))

    def to_manifold_back(start):
        r = integrate(nf, start, -T, p, opts, side=LEFT, stop=x_stop)
        if not r.stopped:
            raise RuntimeError("no manifold crossing")
        return r.endpoint

    def right_arc(y0):
        r = integrate(nf, (0.0, y0), T, p, opts, side=RIGHT, stop=StopCondition(
            fn=lambda x, y: x, direction=-1, armed=False, grad=lambda x, y: (1.0, 0.0)))
        return r.endpoint

    def to_section_back(start):
        stop = StopCondition(fn=sec.value, armed=False, grad=sec.stop_condition().grad,
                             accept=lambda x, y: sec.along(x, y) >= 0.0)
        r = integrate(nf, start, -T, p, opts, side=LEFT, stop=stop)
        return sec.coord(*r.endpoint)

    def P1(e):
        return to_manifold_back(sec.point(m * e))[1] / m

    def P2(y):
        return right_arc(m * y)[1] / m

    def P3(y):
        return to_section_back((0.0, m * y)) / m

    if kind == "P1":
        return P1(x_hat)
    if kind == "P2":
        return P2(x_hat)
    if kind == "P3":
        return P3(x_hat)
    if kind == "Pdm":
        if x_hat == 0:
            return 0.0
        return P3(P2(P1(x_hat)))
    if kind == "Plhf":
        return poincare_return(nf, sec, m * x_hat, p, opts, variational=False, side=LEFT).coord / m
    if kind == "Pfull":
        return poincare_return(nf, sec, m * x_hat, p, opts, variational=False).coord / m
    raise ValueError(f"kind must be one of {KINDS}")


@dataclass
class ValidationTable:
    kind: str
    x: np.ndarray
    asymptotic: np.ndarray
    exact: np.ndarray
    error: np.ndarray
    exponent: float
    fit: object = None


def validate_against_flow(amap: AsymptoticMap, nf, params, eps_grid, eta2_v=0.0,
                          opts: IntegratorOptions = DEFAULT_OPTIONS) -> ValidationTable:
    """Compare the expansion with the flow on ``eps_grid`` and fit the error decay.

    ``eps_grid`` holds ``eps_hat`` (or ``y_hat`` for P2 and P3).  The fitted
    exponent is the slope of ``log |error|`` against ``log |x|``.
    """
    from .scaling import fit_power_law

    m, e = params
    xs = np.asarray(eps_grid, dtype=float)
    exact = np.array([exact_map(amap.kind, nf, params, x, opts) for x in xs])
    approx = np.array([amap(x, m, e, eta2_v) for x in xs])
    err = np.abs(approx - exact)
    fit = None
    exponent = float("nan")
    good = (err > 0) & (xs != 0)
    if good.sum() >= 5:
        fit = fit_power_law(list(zip(np.abs(xs[good]), err[good])), expected_sign=1, min_span=1.0)
        exponent = fit.exponent
    return ValidationTable(amap.kind, xs, approx, exact, err, exponent, fit)


# ---------------------------------------------------------------------------
# the one-dimensional model map


@dataclass(frozen=True)
class SimpleMapModel:
    """``eps' = eta2 + Xi eps + gamma eps**1.5`` for ``eps >= 0``."""

    Xi: float
    gamma: float
    eta2: float = 0.0

    def __call__(self, e):
        e = np.asarray(e, dtype=float)
        if np.any(e < 0):
            raise ValueError("the model map is defined for eps >= 0")
        out = self.eta2 + self.Xi * e + self.gamma * e**1.5
        return out if out.ndim else float(out)

    def fixed_point_eta2(self, e):
        """``eta2`` that makes ``e`` a fixed point."""
        return (1.0 - self.Xi) * e - self.gamma * e**1.5


def simplemap_fold(model: SimpleMapModel) -> float:
    """``eta2`` at which two fixed points of the model map merge.

    Raises
    ------
    ZeroGamma
    """
    if model.gamma == 0:
        raise ZeroGamma("the fold needs a nonzero 3/2-power coefficient")
    return 4.0 * (1.0 - model.Xi) ** 3 / (27.0 * model.gamma**2)


def predicted_fold_gap(inv, mu_v) -> float:
    """Leading-order ``h3 - h2`` from the composed map (Xi = Omega_1, gamma = Omega_2).

    The constant term ``(pi / omega**3) eta2`` of the scaled map plays the
    role of the model's ``eta2``.
    """
    w = inv.omega
    Xi = 1.0 + 4.0 * math.pi * inv.a0 / w**5 * mu_v**2
    gamma = 4.0 * math.sqrt(2.0) / 3.0 * inv.tau_R
    return w**3 / math.pi * simplemap_fold(SimpleMapModel(Xi, gamma))


__all__ = [
    "AsymptoticMap",
    "SimpleMapModel",
    "ValidationTable",
    "build_asymptotic",
    "compose",
    "leading_part",
    "exact_map",
    "validate_against_flow",
    "simplemap_fold",
    "predicted_fold_gap",
    "KINDS",
]

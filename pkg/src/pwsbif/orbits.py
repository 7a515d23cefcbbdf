"""Periodic orbits by section shooting and the grazing and saddle-node loci.

Orbits are fixed points of the return map to the section that runs from the
left equilibrium through the origin; a point on it is labelled by its
x-coordinate ``eps``.  At fixed ``mu`` the family of fixed points is
parameterized by ``eps`` itself: for each ``eps`` the value of ``eta`` that
makes ``eps`` a fixed point is found by a secant iteration.  The family never
turns back in ``eps``, so folds of orbits are extrema of ``eta(eps)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .curves import BifurcationCurve, CurveSample
from .equilibria import find_equilibrium, trace_h1
from .errors import (
    Blowup,
    LeftDomain,
    MuTooSmall,
    NoBracket,
    NoConvergence,
    NoFold,
    NoReturn,
    OutOfChartRange,
    StepSizeUnderflow,
)
from .flow import DEFAULT_OPTIONS, IntegratorOptions, Section, poincare_return
from .parallel import grid_map
from .system import LEFT

SHOOT_TOL = 1e-12
SHOOT_TOL_LOOSE = 1e-10  # accepted when the secant stalls at integration noise
NEUTRAL_TOL = 1e-6
MU_MIN_H3 = 3e-3
EPS_MAX = 0.45

_FLOW_ERRORS = (NoReturn, LeftDomain, Blowup, StepSizeUnderflow, NoConvergence)


@dataclass(frozen=True)
class OrbitRecord:
    section_coord: float
    period: float
    multiplier: float
    graze_measure: float
    stability: str
    residual: float
    params: tuple
    point: tuple


def stability_tag(m, tol=NEUTRAL_TOL):
    if abs(m - 1.0) < tol:
        return "neutral"
    return "stable" if abs(m) < 1.0 else "unstable"


def make_pi_section(sys, params, guess=None) -> Section:
    """Ray from the left equilibrium through the origin, labelled by x.

    Raises
    ------
    ValueError
        The left equilibrium is not admissible (``mu <= 0``).
    """
    p = tuple(params)
    if guess is None:
        J = sys.jacobian(LEFT, 0.0, 0.0, p)
        f0 = np.array(sys.f_left(0.0, 0.0, p))
        guess = tuple(-np.linalg.solve(J, f0))
    eq = find_equilibrium(sys, LEFT, guess, p)
    xs, ys = eq.location
    if sys.switch_fn(xs, ys, p) >= 0.0:
        raise ValueError(f"no admissible left equilibrium at {p}")
    return Section((xs, ys), (-xs, -ys), orientation=-1, coordinate="x")


def _record(sys, section, eps, p, opts, residual=None, method="variational"):
    r = poincare_return(sys, section, eps, p, opts, variational=True, track_max=True)
    m = r.multiplier
    if method == "fd":
        m = _fd_multiplier(sys, section, eps, p, opts, r.switch_max)
    return OrbitRecord(
        section_coord=float(eps),
        period=float(r.period),
        multiplier=float(m),
        graze_measure=float(r.switch_max),
        stability=stability_tag(m),
        residual=float(abs(r.coord - eps) if residual is None else residual),
        params=tuple(p),
        point=section.point(eps),
    )


def _fd_multiplier(sys, section, eps, p, opts, graze, h=1e-6):
    # one-sided, from the side away from the grazing orbit
    step = -h if graze < 0 else h
    a = poincare_return(sys, section, eps, p, opts, variational=False).coord
    b = poincare_return(sys, section, eps + step, p, opts, variational=False).coord
    return (b - a) / step


def find_orbit(sys, section: Optional[Section], guess_eps, params, opts: IntegratorOptions = DEFAULT_OPTIONS,
               shoot_tol=SHOOT_TOL, multiplier="variational", max_iter=40) -> OrbitRecord:
    """Fixed point of the return map by a secant iteration on ``P(eps) - eps``.

    ``multiplier`` selects the derivative of the return map: ``"variational"``
    (from the monodromy matrix) or ``"fd"`` (one-sided difference taken away
    from the grazing orbit).

    Raises
    ------
    NoConvergence, NoReturn
    """
    p = tuple(params)
    sec = section if section is not None else make_pi_section(sys, p)

    def r(e):
        return poincare_return(sys, sec, e, p, opts, variational=False).coord - e

    e0 = float(guess_eps)
    e1 = e0 + 1e-4 * max(abs(e0 - sec.base[0]), 1e-3)
    f0, f1 = r(e0), r(e1)
    for _ in range(max_iter):
        if abs(f1) < shoot_tol:
            break
        if f1 == f0:
            break
        e0, e1 = e1, e1 - f1 * (e1 - e0) / (f1 - f0)
        f0, f1 = f1, r(e1)
    if not abs(f1) < SHOOT_TOL_LOOSE:
        raise NoConvergence(f"orbit residual {abs(f1):.3e} at eps={e1:.6g}")
    return _record(sys, sec, e1, p, opts, abs(f1), multiplier)


# ---------------------------------------------------------------------------
# the orbit family at fixed mu


class OrbitFamily:
    """Fixed points of the return map at fixed ``mu``, labelled by ``eps``.

    ``eta(eps)`` is solved in the shifted variable ``eta - ref`` so that
    values close to the reference (``h2`` once it is known) keep full
    precision.  Every solved point is cached and seeds later solves.
    """

    def __init__(self, sys, mu, opts: IntegratorOptions = DEFAULT_OPTIONS, shoot_tol=SHOOT_TOL):
        if mu <= 0:
            raise ValueError("orbit families need mu > 0")
        self.sys = sys
        self.mu = float(mu)
        self.opts = opts
        self.shoot_tol = shoot_tol
        hopf = trace_h1(sys, [self.mu]).samples[0]
        self.h1 = hopf.eta
        self.x_eq = hopf.extra["x_eq"]
        self.eq_guess = (hopf.extra["x_eq"], hopf.extra["y_eq"])
        self.scale = abs(self.x_eq)
        self.ref = self.h1
        self.known = {}
        seed = self.x_eq + 0.1 * self.scale
        self.known[seed] = self._solve(seed, self.h1)

    def section(self, eta):
        return make_pi_section(self.sys, (self.mu, eta), self.eq_guess)

    def _residual(self, eps, eta, **kw):
        sec = self.section(eta)
        return poincare_return(self.sys, sec, eps, (self.mu, eta), self.opts, variational=False, **kw)

    def _solve(self, eps, guess, max_iter=40):
        ref = self.ref
        z0 = guess - ref
        d = 1e-6 * max(self.scale, 1e-3)
        f0 = self._residual(eps, ref + z0).coord - eps
        z1 = z0 + d
        f1 = self._residual(eps, ref + z1).coord - eps
        for _ in range(max_iter):
            if abs(f1) < self.shoot_tol or f1 == f0:
                break
            step = -f1 * (z1 - z0) / (f1 - f0)
            for _ in range(20):
                # a wild secant step can leave the domain; halve it until the return exists
                try:
                    f_new = self._residual(eps, ref + z1 + step).coord - eps
                    break
                except _FLOW_ERRORS:
                    step *= 0.5
            else:
                raise NoConvergence(f"eta solve at eps={eps:.6g}, mu={self.mu:g}: no return near the secant step")
            z0, z1 = z1, z1 + step
            f0, f1 = f1, f_new
            if abs(z1 - z0) < 1e-17:
                break
        if not abs(f1) < SHOOT_TOL_LOOSE:
            raise NoConvergence(f"eta solve at eps={eps:.6g}, mu={self.mu:g}: residual {abs(f1):.3e}")
        return ref + z1

    def _predict(self, eps):
        pts = sorted(self.known, key=lambda e: abs(e - eps))[:2]
        if len(pts) == 1:
            return self.known[pts[0]]
        (ea, eb) = pts
        ya, yb = self.known[ea], self.known[eb]
        return ya + (yb - ya) * (eps - ea) / (eb - ea)

    def eta(self, eps, max_step=None):
        """``eta`` for which the section point ``eps`` lies on a periodic orbit."""
        eps = float(eps)
        hit = self.known.get(eps)
        if hit is not None:
            return hit
        max_step = max_step or 0.1 * self.scale
        near = min(self.known, key=lambda e: abs(e - eps))
        n = int(math.ceil(abs(eps - near) / max_step))
        for k in range(1, n + 1):
            e = eps if k == n else near + (eps - near) * k / n
            if e not in self.known:
                self.known[e] = self._solve(e, self._predict(e))
        return self.known[eps]

    def graze(self, eps):
        eta = self.eta(eps)
        return self._residual(eps, eta, track_max=True).switch_max

    def orbit(self, eps, method="variational") -> OrbitRecord:
        eta = self.eta(eps)
        return _record(self.sys, self.section(eta), eps, (self.mu, eta), self.opts, method=method)

    def grazing(self):
        """``(eps_g, eta_g)`` of the orbit whose maximum touches the manifold.

        Raises
        ------
        NoBracket
            The family does not reach the manifold below ``EPS_MAX``.
        """
        step = 0.25 * self.scale
        lo = min(self.known)
        glo = self.graze(lo)
        if glo >= 0:
            raise NoBracket(f"smallest orbit already touches the manifold at mu={self.mu:g}")
        hi = lo
        while True:
            hi = hi + step
            if hi > EPS_MAX:
                raise NoBracket(f"no grazing orbit for eps < {EPS_MAX} at mu={self.mu:g}")
            try:
                ghi = self.graze(hi)
            except _FLOW_ERRORS as exc:
                raise NoBracket(f"family lost before grazing at mu={self.mu:g}: {exc}") from exc
            if ghi >= 0:
                break
            lo = hi
        eg = brentq(self.graze, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=100)
        return eg, self.eta(eg)


# ---------------------------------------------------------------------------
# loci


def _h2_sample(sys, mu, opts):
    fam = OrbitFamily(sys, mu, opts)
    eg, eta = fam.grazing()
    orb = fam.orbit(eg)
    return fam, eg, CurveSample(
        mu=float(mu),
        eta=float(eta),
        residual=abs(orb.graze_measure),
        multiplier=orb.multiplier,
        eta2=0.0,
        extra={"eps": eg, "period": orb.period, "h1": fam.h1, "closure": orb.residual},
    )


def trace_h2(nf, mu_grid, opts: IntegratorOptions = DEFAULT_OPTIONS, workers=None) -> BifurcationCurve:
    """Grazing locus: the orbit of the Hopf family whose maximum of ``x`` is zero.

    Raises
    ------
    NoBracket
        The cycle never reaches the manifold.
    """
    mus = sorted(float(m) for m in mu_grid)
    samples = grid_map(lambda m: _h2_sample(nf, m, opts)[2], mus, workers)
    return BifurcationCurve("grazing", samples)


def _h3_sample(sys, mu, opts, eps_max=EPS_MAX):
    if mu < MU_MIN_H3:
        raise MuTooSmall(f"mu={mu:g} is below {MU_MIN_H3:g}; the fold gap is under integration noise")
    fam, eg, s2 = _h2_sample(sys, mu, opts)
    h2 = s2.eta
    fam.ref = h2
    d = 1e-4 * fam.scale
    vals = [(eg, 0.0)]
    k = 0
    while True:
        e = eg + d * 2.0**k
        if e > eps_max:
            raise NoFold(f"eta(eps) has no minimum past grazing for eps < {eps_max} at mu={mu:g}")
        try:
            z = fam.eta(e) - h2
        except _FLOW_ERRORS as exc:
            raise NoFold(f"orbit family lost at eps={e:.4g}, mu={mu:g} before a fold: {exc}") from exc
        vals.append((e, z))
        if z > vals[-2][1]:
            break
        k += 1
    if len(vals) < 3:
        raise NoFold(f"eta increases past grazing at mu={mu:g}; no saddle-node of orbits")
    lo, hi = vals[-3][0], vals[-1][0]
    res = minimize_scalar(lambda e: fam.eta(e) - h2, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-7 * (hi - lo)})
    ef = float(res.x)
    eta2 = fam.eta(ef) - h2
    orb = fam.orbit(ef)
    return CurveSample(
        mu=float(mu),
        eta=float(h2 + eta2),
        residual=orb.residual,
        multiplier=orb.multiplier,
        eta2=float(eta2),
        extra={"eps": ef, "eps_graze": eg, "h2": h2, "h1": fam.h1, "graze": orb.graze_measure, "period": orb.period},
    )


def trace_h3(nf, mu_grid, opts: IntegratorOptions = DEFAULT_OPTIONS, workers=None, skip_missing=False) -> BifurcationCurve:
    """Saddle-node locus of orbits just beyond grazing.

    For each ``mu`` the fold is the minimum of ``eta(eps)`` past the grazing
    orbit, located in the shifted variable ``eta - h2``.  With
    ``skip_missing`` the values of ``mu`` without a fold are left out and
    listed in ``curve.missing`` instead of raising.

    Raises
    ------
    MuTooSmall, NoFold
    """
    mus = sorted(float(m) for m in mu_grid)

    def one(m):
        try:
            return _h3_sample(nf, m, opts)
        except NoFold as exc:
            if skip_missing:
                return exc
            raise

    out = grid_map(one, mus, workers)
    curve = BifurcationCurve("saddle-node", [s for s in out if isinstance(s, CurveSample)])
    curve.missing = [(m, str(s)) for m, s in zip(mus, out) if not isinstance(s, CurveSample)]
    return curve


# ---------------------------------------------------------------------------
# global fold structure and the cusp


def fold_extrema(nf, mu, eps_hi=0.3, n=31, opts: IntegratorOptions = DEFAULT_OPTIONS):
    """All local extrema of ``eta(eps)`` between grazing and ``eps_hi``.

    Returns a list of ``(kind, eps, eta)`` with kind ``"min"`` (the fold that
    the local theory predicts) or ``"max"`` (the outer fold).
    """
    fam, eg, s2 = _h2_sample(nf, mu, opts)
    fam.ref = s2.eta
    grid = np.linspace(eg, eps_hi, n)
    vals = [fam.eta(e) for e in grid]
    out = []
    for i in range(1, n - 1):
        a, b, c = vals[i - 1], vals[i], vals[i + 1]
        if (b < a and b <= c) or (b > a and b >= c):
            kind = "min" if b < a else "max"
            sgn = 1.0 if kind == "min" else -1.0
            res = minimize_scalar(lambda e: sgn * fam.eta(e), bounds=(grid[i - 1], grid[i + 1]),
                                  method="bounded", options={"xatol": 1e-9})
            out.append((kind, float(res.x), float(fam.eta(res.x))))
    # a minimum inside the first cell is missed by the grid test
    if not out or out[0][0] != "min":
        try:
            s3 = _h3_sample(nf, mu, opts)
            out.insert(0, ("min", s3.extra["eps"], s3.eta))
        except NoFold:
            pass
    return out


def trace_outer_fold(nf, mu_grid, eps_hi=0.3, opts: IntegratorOptions = DEFAULT_OPTIONS, workers=None) -> BifurcationCurve:
    """Second saddle-node branch (local maximum of ``eta(eps)``), where it exists."""

    def one(m):
        for kind, e, eta in fold_extrema(nf, m, eps_hi, opts=opts):
            if kind == "max":
                return CurveSample(mu=m, eta=eta, residual=0.0, extra={"eps": e, "branch": "outer"})
        return None

    out = grid_map(one, sorted(float(m) for m in mu_grid), workers)
    return BifurcationCurve("saddle-node", [s for s in out if s is not None])


@dataclass(frozen=True)
class CuspPoint:
    mu: float
    eta: float
    eps: float
    slope: float  # d eta / d eps at the inflection; zero at the cusp
    raw: Optional[tuple] = None


def _max_slope(nf, mu, window, n, opts, delta=1e-3):
    fam, eg, s2 = _h2_sample(nf, mu, opts)
    fam.ref = s2.eta
    lo = max(window[0], eg + 2 * delta)
    hi = window[1]

    def slope(e):
        return (fam.eta(e + delta) - fam.eta(e - delta)) / (2 * delta)

    grid = np.linspace(lo, hi, n)
    vals = [slope(e) for e in grid]
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    res = minimize_scalar(lambda e: -slope(e), bounds=(a, b), method="bounded", options={"xatol": 1e-6})
    return float(-res.fun), float(res.x), float(fam.eta(res.x))


def locate_cusp(nf, mu_bracket=(0.085, 0.11), window=(0.0, 0.2), n=21, opts: IntegratorOptions = DEFAULT_OPTIONS,
                xtol=1e-6) -> CuspPoint:
    """Parameter point where the two fold branches merge.

    Between the folds ``eta(eps)`` rises, so the largest slope ``d eta/d eps``
    over the window is positive; beyond the cusp it is negative.  The cusp is
    the root in ``mu`` of that largest slope.

    Raises
    ------
    NoBracket
        The largest slope has one sign on the whole ``mu`` bracket.
    """

    def M(mu):
        return _max_slope(nf, mu, window, n, opts)[0]

    a, b = mu_bracket
    fa, fb = M(a), M(b)
    if fa * fb > 0:
        raise NoBracket(f"fold branches do not merge for mu in [{a:g}, {b:g}]")
    mu_c = brentq(M, a, b, xtol=xtol)
    s, e, eta = _max_slope(nf, mu_c, window, n, opts)
    return CuspPoint(mu=float(mu_c), eta=eta, eps=e, slope=s)


# ---------------------------------------------------------------------------
# raw frame


def bifurcation_set_raw(sys_raw, transform, curves):
    """Map normal-form curves to the raw parameter frame.

    ``sys_raw`` must be the system the transform was built from.  The ``mu``
    and ``eta`` fields of the returned samples hold the two raw parameters;
    the normal-form values are kept in ``extra``.

    Raises
    ------
    OutOfChartRange
    """
    if transform.sys.name != sys_raw.name:
        raise ValueError("transform was built for a different system")
    single = isinstance(curves, BifurcationCurve)
    out = []
    for curve in [curves] if single else curves:
        guess = None
        samples = []
        for s in curve.samples:
            p = transform.params_inverse((s.mu, s.eta), guess=guess)
            guess = p
            samples.append(CurveSample(mu=p[0], eta=p[1], residual=s.residual, multiplier=s.multiplier,
                                       eta2=s.eta2, extra={**s.extra, "mu": s.mu, "eta": s.eta}))
        out.append(BifurcationCurve(curve.kind, samples, frame="raw"))
    return out[0] if single else out


def cusp_to_raw(transform, cusp: CuspPoint) -> CuspPoint:
    p = transform.params_inverse((cusp.mu, cusp.eta))
    return CuspPoint(cusp.mu, cusp.eta, cusp.eps, cusp.slope, raw=p)


__all__ = [
    "OrbitRecord",
    "OrbitFamily",
    "CuspPoint",
    "make_pi_section",
    "find_orbit",
    "stability_tag",
    "trace_h2",
    "trace_h3",
    "fold_extrema",
    "trace_outer_fold",
    "locate_cusp",
    "bifurcation_set_raw",
    "cusp_to_raw",
    "OutOfChartRange",
]

"""Equilibria of the half-systems, their spectra, and the Hopf locus."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .curves import BifurcationCurve, CurveSample
from .errors import NoBracket, NoConvergence, SingularJacobian
from .system import LEFT, RIGHT

NEWTON_TOL = 1e-12
MAX_ITER = 50
ADMISSIBLE_TOL = 1e-10


@dataclass(frozen=True)
class EquilibriumReport:
    location: tuple
    half: str
    admissible: bool
    nu: float
    xi: float
    classification: str
    det: float
    trace: float
    residual: float
    params: tuple


def spectrum(J):
    """``(nu, xi, det, trace)`` of a 2x2 matrix from the closed form.

    ``xi`` is zero when the eigenvalues are real; ``nu`` is then the mean of
    the two eigenvalues (half the trace) as in the complex case.
    """
    tr = J[0][0] + J[1][1]
    det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
    disc = 0.25 * tr * tr - det
    xi = math.sqrt(-disc) if disc < 0 else 0.0
    return 0.5 * tr, xi, det, tr


def classify(nu, xi, det, center_tol=1e-9):
    if det < 0:
        return "saddle"
    if xi > 0:
        if abs(nu) <= center_tol:
            return "center"
        return "focus-stable" if nu < 0 else "focus-unstable"
    return "node"


def find_equilibrium(sys, half, guess, params, newton_tol=NEWTON_TOL, max_iter=MAX_ITER) -> EquilibriumReport:
    """Newton iteration for a zero of one half-field.

    Steps are halved while they increase the residual.

    Raises
    ------
    NoConvergence, SingularJacobian
    """
    p = tuple(params)
    f = sys.f_left if half == LEFT else sys.f_right
    x, y = float(guess[0]), float(guess[1])
    fx, fy = f(x, y, p)
    res = math.hypot(fx, fy)
    for _ in range(max_iter):
        if res < newton_tol:
            break
        J = sys.jacobian(half, x, y, p)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if det == 0.0 or not math.isfinite(det):
            raise SingularJacobian(f"singular Jacobian at ({x:.3g}, {y:.3g})")
        dx = -(J[1, 1] * fx - J[0, 1] * fy) / det
        dy = -(-J[1, 0] * fx + J[0, 0] * fy) / det
        lam = 1.0
        for _ in range(30):
            xn, yn = x + lam * dx, y + lam * dy
            gx, gy = f(xn, yn, p)
            rn = math.hypot(gx, gy)
            if rn < res or rn < newton_tol:
                break
            lam *= 0.5
        x, y, fx, fy, res = xn, yn, gx, gy, rn
    else:
        if res >= newton_tol:
            raise NoConvergence(f"Newton residual {res:.3e} after {max_iter} iterations")
    if res >= newton_tol:
        raise NoConvergence(f"Newton residual {res:.3e} after {max_iter} iterations")
    J = sys.jacobian(half, x, y, p)
    nu, xi, det, tr = spectrum(J)
    s = sys.switch_fn(x, y, p)
    admissible = s <= ADMISSIBLE_TOL if half == LEFT else s >= -ADMISSIBLE_TOL
    return EquilibriumReport(
        location=(float(x), float(y)),
        half=half,
        admissible=bool(admissible),
        nu=float(nu),
        xi=float(xi),
        classification=classify(nu, xi, det),
        det=float(det),
        trace=float(tr),
        residual=float(res),
        params=p,
    )


def admissibility_scan(sys, half, param_path, guess=(0.0, 0.0)):
    """Continue an equilibrium along a path of parameter tuples.

    Each solve starts from the previous solution, linearly extrapolated once
    two points are known.
    """
    out = []
    for i, p in enumerate(param_path):
        if i >= 2:
            (x1, y1), (x2, y2) = out[-2].location, out[-1].location
            g = (2 * x2 - x1, 2 * y2 - y1)
        elif out:
            g = out[-1].location
        else:
            g = guess
        out.append(find_equilibrium(sys, half, g, p))
    return out


def boundary_crossings(reports):
    """Parameter pairs bracketing a change of admissibility along a scan."""
    hits = []
    for a, b in zip(reports, reports[1:]):
        if a.admissible != b.admissible:
            hits.append((a.params, b.params))
    return hits


def left_nu(sys, mu, eta, guess=(0.0, 0.0)):
    """Real part of the left equilibrium's eigenvalues at ``(mu, eta)``."""
    return find_equilibrium(sys, LEFT, guess, (mu, eta)).nu


def trace_h1(sys, mu_grid, eta_guess_slope=None, window=None) -> BifurcationCurve:
    """Solve ``nu(mu, eta) = 0`` for ``eta`` at each ``mu`` of the grid.

    The search bracket is ``eta0 +- w`` where ``eta0`` is a one-step Newton
    estimate from a coarse slope and ``w = max(|eta0| / 4, mu / 100)`` (widened until the
    sign of ``nu`` changes).

    Raises
    ------
    NoBracket
        ``nu`` keeps one sign over the whole (widened) window.
    """
    samples = []
    guess = (0.0, 0.0)
    for mu in sorted(float(m) for m in mu_grid):
        if mu <= 0:
            raise ValueError("trace_h1 needs mu > 0")
        eq0 = find_equilibrium(sys, LEFT, guess, (mu, 0.0))
        guess = eq0.location
        d = 1e-6
        slope = (left_nu(sys, mu, d, guess) - left_nu(sys, mu, -d, guess)) / (2 * d)
        if slope == 0.0:
            raise NoBracket(f"d nu / d eta vanishes at mu={mu:g}")
        eta0 = -eq0.nu / slope
        w = window if window is not None else max(0.25 * abs(eta0), 0.01 * mu * abs(eta_guess_slope or 1.0), 1e-8)

        def g(eta):
            return left_nu(sys, mu, eta, guess)

        lo, hi = eta0 - w, eta0 + w
        glo, ghi = g(lo), g(hi)
        tries = 0
        while glo * ghi > 0:
            tries += 1
            if tries > 6:
                raise NoBracket(f"nu has no sign change for mu={mu:g} in [{lo:.3g}, {hi:.3g}]")
            w *= 2
            lo, hi = eta0 - w, eta0 + w
            glo, ghi = g(lo), g(hi)
        eta = brentq(g, lo, hi, xtol=1e-16, rtol=1e-15, maxiter=200)
        eq = find_equilibrium(sys, LEFT, guess, (mu, eta))
        samples.append(
            CurveSample(
                mu=mu,
                eta=eta,
                residual=abs(eq.nu),
                multiplier=math.exp(2 * math.pi * eq.nu / eq.xi) if eq.xi > 0 else math.nan,
                extra={"xi": eq.xi, "x_eq": eq.location[0], "y_eq": eq.location[1], "dnu_deta": slope},
            )
        )
    return BifurcationCurve("hopf", samples)


def hopf_eta(sys, mu, guess=(0.0, 0.0)):
    """``h1(mu)`` for a single ``mu``."""
    return trace_h1(sys, [mu]).samples[0].eta


def dnu_deta(sys, mu, eta, d=1e-6):
    return (left_nu(sys, mu, eta + d) - left_nu(sys, mu, eta - d)) / (2 * d)


__all__ = [
    "EquilibriumReport",
    "spectrum",
    "classify",
    "find_equilibrium",
    "admissibility_scan",
    "boundary_crossings",
    "left_nu",
    "trace_h1",
    "hopf_eta",
    "dnu_deta",
    "LEFT",
    "RIGHT",
]

"""Power-law fits of traced loci and their comparison with the predicted laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InsufficientSpan, MissingCurve, SignMixture

MIN_POINTS = 5
NOISE_FACTOR = 100.0


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    coefficient: float
    r_squared: float
    window: tuple
    n_points: int
    exponent_stderr: float = math.nan

    def __post_init__(self):
        if not 0.0 <= self.r_squared <= 1.0 + 1e-12:
            raise ValueError("r_squared outside [0, 1]")


def fit_power_law(samples, expected_sign=None, min_span=1.0, noise=None) -> ScalingFit:
    """Ordinary least squares of ``log|y|`` on ``log x``.

    Parameters
    ----------
    samples : iterable of (x, y)
        Abscissas must be positive and ordinates nonzero.
    expected_sign : {+1, -1}, optional
        Every ordinate must carry this sign; defaults to the sign of the
        first ordinate.
    min_span : float
        Required span of the abscissas in decades.
    noise : array_like, optional
        Per-sample residual diagnostic; samples with ``|y|`` below
        ``100 * noise`` are dropped before fitting.

    Raises
    ------
    SignMixture
        Ordinates of both signs (or zero) are present.
    InsufficientSpan
        Fewer than five usable points or a span under ``min_span`` decades.
    """
    pts = [(float(x), float(y)) for x, y in samples]
    if noise is not None:
        nz = [float(n) for n in noise]
        if len(nz) != len(pts):
            raise ValueError("noise must match samples")
        pts = [p for p, n in zip(pts, nz) if abs(p[1]) > NOISE_FACTOR * n]
    if len(pts) < MIN_POINTS:
        raise InsufficientSpan(f"need at least {MIN_POINTS} points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(x <= 0):
        raise ValueError("abscissas must be positive")
    sign = expected_sign if expected_sign is not None else (1 if y[0] > 0 else -1)
    if np.any(y == 0) or np.any(np.sign(y) != sign):
        raise SignMixture("ordinates do not all carry the expected sign")
    span = math.log10(x.max() / x.min())
    if span < min_span - 1e-12:
        raise InsufficientSpan(f"abscissas span {span:.2f} decades, need {min_span:g}")
    lx, ly = np.log(x), np.log(np.abs(y))
    A = np.vstack([lx, np.ones_like(lx)]).T
    (k, c), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (k * lx + c)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    n = len(x)
    sxx = float(((lx - lx.mean()) ** 2).sum())
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 and sxx > 0 else math.nan
    return ScalingFit(
        exponent=float(k),
        coefficient=float(sign * math.exp(c)),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        window=(float(x.min()), float(x.max())),
        n_points=n,
        exponent_stderr=stderr,
    )


def fit_slope_at_zero(samples, degree=2):
    """Coefficient of ``x`` in a least-squares polynomial ``sum_k c_k x**k``, ``k = 1..degree``.

    The curve is assumed to pass through the origin, so there is no constant.
    """
    samples = list(samples)
    x = np.array([float(p[0]) for p in samples])
    y = np.array([float(p[1]) for p in samples])
    if len(x) < degree + 2:
        raise InsufficientSpan(f"need at least {degree + 2} points for a degree-{degree} fit")
    A = np.vstack([x**k for k in range(1, degree + 1)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def fit_fixed_exponent(samples, exponent):
    """Least-squares coefficient of ``y = c x**exponent`` in log space."""
    samples = list(samples)
    x = np.array([float(p[0]) for p in samples])
    y = np.array([float(p[1]) for p in samples])
    sign = 1.0 if y[0] > 0 else -1.0
    return float(sign * math.exp(np.mean(np.log(np.abs(y)) - exponent * np.log(x))))


@dataclass
class LawRow:
    name: str
    predicted_exponent: int
    predicted_coefficient: float
    fit: ScalingFit
    exponent_tol: float
    coefficient_rtol: float
    notes: str = ""
    complete: bool = True  # False when the locus is missing on part of the window

    @property
    def exponent_ok(self):
        return abs(self.fit.exponent - self.predicted_exponent) <= self.exponent_tol

    @property
    def coefficient_ok(self):
        return abs(self.fit.coefficient - self.predicted_coefficient) <= self.coefficient_rtol * abs(self.predicted_coefficient)

    @property
    def passed(self):
        return self.complete and self.exponent_ok and self.coefficient_ok


@dataclass
class TheoremReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def text(self):
        head = f"{'law':<10}{'exponent':>12}{'expected':>10}{'coefficient':>16}{'predicted':>14}  result"
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.name:<10}{r.fit.exponent:>12.4f}{r.predicted_exponent:>10d}"
                f"{r.fit.coefficient:>16.6g}{r.predicted_coefficient:>14.6g}  {'pass' if r.passed else 'FAIL'}"
                + (f"  ({r.notes})" if r.notes else "")
            )
        return "\n".join(lines) + "\n"


# default tolerances: exponent, relative coefficient, minimum span in decades
TOLERANCES = {"h1": (0.05, 0.02, 1.0), "h2": (0.05, 0.05, 1.0), "h3": (0.3, 0.25, 0.5)}


def theorem_report(inv, curves, tolerances=None) -> TheoremReport:
    """Fit each law and compare with the prediction from the invariants.

    ``curves`` maps ``"h1"``, ``"h2"`` and optionally ``"h3"`` to
    :class:`BifurcationCurve` objects, or is a list of curves (identified by
    kind).  ``h2`` is fitted as ``h2 - h1`` and ``h3`` as ``h3 - h2`` on the
    values of ``mu`` the curves share.

    Raises
    ------
    MissingCurve
        ``h1`` or ``h2`` is absent, or ``h3`` is absent in the case where the
        invariants predict it.
    """
    from .normalform import predicted_coefficients

    tol = {**TOLERANCES, **(tolerances or {})}
    if not isinstance(curves, dict):
        by_kind = {"hopf": "h1", "grazing": "h2", "saddle-node": "h3"}
        curves = {by_kind[c.kind]: c for c in curves}
    for name in ("h1", "h2"):
        if name not in curves:
            raise MissingCurve(f"{name} curve is required")
    if "h3" not in curves and inv.a0 * inv.tau_R < 0:
        raise MissingCurve("h3 curve is required when a0 * tau_R < 0")
    pred = predicted_coefficients(inv)
    rows = []

    h1 = {s.mu: s for s in curves["h1"].samples}
    et, ct, span = tol["h1"]
    pts = [(m, s.eta) for m, s in sorted(h1.items())]
    fit = fit_power_law(pts, min_span=span)
    # the slope at zero comes from a quadratic fit; the power law only checks the exponent
    fit = replace(fit, coefficient=fit_slope_at_zero(pts))
    rows.append(LawRow("h1", 1, pred["h1_slope"], fit, et, ct, "slope from a quadratic fit"))

    h2 = {s.mu: s for s in curves["h2"].samples}
    common = sorted(set(h1) & set(h2))
    et, ct, span = tol["h2"]
    fit = fit_power_law([(m, h2[m].eta - h1[m].eta) for m in common], min_span=span,
                        noise=[h2[m].residual + h1[m].residual for m in common])
    rows.append(LawRow("h2-h1", 2, pred["h2_minus_h1"], fit, et, ct))

    if "h3" in curves:
        h3 = {s.mu: s for s in curves["h3"].samples}
        common = sorted(set(h3) & set(h2))
        et, ct, span = tol["h3"]
        missing = getattr(curves["h3"], "missing", [])
        fit = fit_power_law([(m, h3[m].eta - h2[m].eta) for m in common], min_span=span,
                            noise=[h3[m].residual for m in common])
        note = f"no fold at {len(missing)} grid values" if missing else ""
        rows.append(LawRow("h3-h2", 6, pred["h3_minus_h2"], fit, et, ct, note, complete=not missing))
    return TheoremReport(rows)


__all__ = ["ScalingFit", "fit_power_law", "fit_fixed_exponent", "fit_slope_at_zero", "LawRow", "TheoremReport", "theorem_report", "TOLERANCES"]

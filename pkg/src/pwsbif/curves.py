"""Bifurcation-curve containers and their CSV form."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("kind", "mu", "eta", "eta2", "residual", "multiplier")
KINDS = ("hopf", "grazing", "saddle-node")


@dataclass
class CurveSample:
    mu: float
    eta: float
    residual: float
    multiplier: float = math.nan
    eta2: float = math.nan  # eta - h2(mu), when h2 is known at this mu
    extra: dict = field(default_factory=dict)


@dataclass
class BifurcationCurve:
    """Ordered ``(mu, eta)`` samples of one bifurcation locus.

    ``frame`` is ``"normal-form"`` for ``(mu, eta)`` or ``"raw"`` when the
    samples have been mapped back to the original parameters (the ``mu`` and
    ``eta`` fields then hold the first and second raw parameter).
    """

    kind: str
    samples: list = field(default_factory=list)
    frame: str = "normal-form"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    def __len__(self):
        return len(self.samples)

    @property
    def mu(self):
        return np.array([s.mu for s in self.samples])

    @property
    def eta(self):
        return np.array([s.eta for s in self.samples])

    @property
    def residuals(self):
        return np.array([s.residual for s in self.samples])

    @property
    def multipliers(self):
        return np.array([s.multiplier for s in self.samples])

    def sorted(self):
        return BifurcationCurve(self.kind, sorted(self.samples, key=lambda s: s.mu), self.frame)

    def eta_at(self, mu):
        """Sample value at ``mu`` (exact match required)."""
        for s in self.samples:
            if s.mu == mu:
                return s.eta
        raise KeyError(mu)


def _fmt(v):
    return repr(float(v)) if math.isfinite(v) else "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def _fmt17(v):
    v = float(v)
    if not math.isfinite(v):
        return _fmt(v)
    return f"{v:.17g}"


def emit_csv(curve, path, append=False):
    """Write curve samples as ``kind,mu,eta,eta2,residual,multiplier``.

    ``curve`` may be one curve or a list of curves.  Values carry 17
    significant digits so a parse returns the identical doubles.
    """
    curves = [curve] if isinstance(curve, BifurcationCurve) else list(curve)
    if not any(len(c) for c in curves):
        raise ValueError("refusing to write an empty curve")
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not append:
            w.writerow(CSV_COLUMNS)
        for c in curves:
            for s in c.samples:
                w.writerow([c.kind] + [_fmt17(v) for v in (s.mu, s.eta, s.eta2, s.residual, s.multiplier)])


def read_csv(path):
    """Parse a file written by :func:`emit_csv` back into curves by kind."""
    out = {}
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected header {header}")
        for row in rows:
            kind = row[0]
            mu, eta, eta2, res, mult = (float(v) for v in row[1:])
            out.setdefault(kind, BifurcationCurve(kind)).samples.append(
                CurveSample(mu, eta, res, multiplier=mult, eta2=eta2)
            )
    return out

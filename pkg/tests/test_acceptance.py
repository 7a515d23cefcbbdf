"""Acceptance gate: one PASS/FAIL line per criterion in the terminal summary.

Three checks cannot pass and are marked as strict expected failures.  The
saddle-node locus of orbits ends at a cusp near mu = 0.0973, where it merges
with a second fold branch; for larger mu no fold exists, so the sixth-power
law and the ordering h3 < h2 cannot be checked out to mu = 0.2.
"""

import math
import time

import numpy as np
import pytest

from pwsbif import dmaps as D
from pwsbif.equilibria import trace_h1
from pwsbif.flow import integrate
from pwsbif.normalform import build_transform, compute_invariants, locate_codim2, predicted_coefficients
from pwsbif.orbits import OrbitFamily, cusp_to_raw, locate_cusp, trace_h2, trace_h3
from pwsbif.scaling import fit_fixed_exponent, fit_power_law, fit_slope_at_zero
from pwsbif.system import check_continuity, get_system

pytestmark = pytest.mark.acceptance

NAMES = {
    1: "invariants",
    2: "codimension-two point",
    3: "Hopf slope",
    4: "grazing law",
    5: "saddle-node law",
    6: "raw-frame cusp",
    7: "property suite",
    8: "asymptotic maps",
}
ACCEPTANCE_RESULTS = {}  # criterion -> list of (ok, detail)

FAR = list(np.geomspace(0.05, 0.2, 8))  # the window of the sixth-power law
MU_CUSP = 0.0973


def record(n, ok, detail):
    ACCEPTANCE_RESULTS.setdefault(n, []).append((bool(ok), detail))
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def summary_lines():
    lines = []
    for n in sorted(ACCEPTANCE_RESULTS):
        parts = ACCEPTANCE_RESULTS[n]
        ok = all(p for p, _ in parts)
        lines.append(f"criterion {n} ({NAMES[n]}): {'PASS' if ok else 'FAIL'}; " + "; ".join(d for _, d in parts))
    return lines


@pytest.fixture(scope="module")
def far_curves(nf):
    t0 = time.perf_counter()
    h2 = trace_h2(nf, FAR)
    h3 = trace_h3(nf, FAR, skip_missing=True)
    return h2, h3, time.perf_counter() - t0


def test_invariants(raw):
    t0 = time.perf_counter()
    tr = build_transform(raw, locate_codim2(raw))
    inv = compute_invariants(tr.apply())
    dt = time.perf_counter() - t0
    want = {"a0": 25 / 88, "omega": 1 / math.sqrt(2), "tau_R": -1 / 5, "delta_R": 1 / 4}
    got = inv.as_dict()
    err = max(abs(got[k] - v) / abs(v) for k, v in want.items())
    ok = record(1, err < 1e-5 and dt < 5, f"max relative error {err:.2e}, {dt:.2f} s")
    assert ok


def test_codim2_point(raw):
    t0 = time.perf_counter()
    pt = locate_codim2(raw)
    dt = time.perf_counter() - t0
    loc = max(abs(v) for v in (*pt.state, *pt.params))
    s, r = 1 / math.sqrt(2), math.sqrt(6) / 5
    left = sorted(pt.left_eigs, key=lambda z: z.imag)
    right = sorted(pt.right_eigs, key=lambda z: z.imag)
    eig = max(abs(left[0] + 1j * s), abs(left[1] - 1j * s),
              abs(right[0] - complex(-0.1, -r)), abs(right[1] - complex(-0.1, r)))
    ok = record(2, loc < 1e-8 and eig < 1e-8 and dt < 5, f"location {loc:.1e}, eigenvalues {eig:.1e}, {dt:.2f} s")
    assert ok


def test_hopf_slope(nf):
    t0 = time.perf_counter()
    curve = trace_h1(nf, np.geomspace(1e-4, 1e-2, 30))
    dt = time.perf_counter() - t0
    slope = fit_slope_at_zero(zip(curve.mu, curve.eta))
    rel = abs(slope / (20 / 33) - 1)
    ok = record(3, rel < 0.02 and dt < 30, f"slope {slope:.6f} vs 20/33, {rel:.2%} off, {dt:.2f} s")
    assert ok


def test_grazing_law(nf):
    t0 = time.perf_counter()
    grid = np.geomspace(3e-3, 3e-2, 12)
    h1 = trace_h1(nf, grid)
    h2 = trace_h2(nf, grid)
    dt = time.perf_counter() - t0
    fit = fit_power_law(zip(grid, h2.eta - h1.eta), expected_sign=-1, noise=h2.residuals + h1.residuals)
    rel = abs(fit.coefficient / (-25 / 11) - 1)
    ok = record(4, abs(fit.exponent - 2) <= 0.05 and rel <= 0.05 and dt < 180,
                f"exponent {fit.exponent:.4f}, coefficient {fit.coefficient:.4f} vs -25/11 ({rel:.2%}), {dt:.1f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="no saddle-node of orbits for mu above the cusp near 0.0973")
def test_fold_law(inv, far_curves):
    h2, h3, dt = far_curves
    pred = predicted_coefficients(inv)["h3_minus_h2"]
    pts = [(s.mu, s.eta2) for s in h3.samples]
    detail = f"fold found at {len(pts)} of {len(FAR)} grid values, {dt:.0f} s"
    ok = False
    if pts:
        detail += f", coefficient at exponent 6: {fit_fixed_exponent(pts, 6):.1f} vs {pred:.1f}"
    if len(pts) >= 5:
        fit = fit_power_law(pts, expected_sign=-1, min_span=0.5)
        rel = abs(fit.coefficient / pred - 1)
        detail += f", exponent {fit.exponent:.3f}, coefficient {fit.coefficient:.1f} ({rel:.0%})"
        ok = abs(fit.exponent - 6) <= 0.3 and rel <= 0.25
    ok = record(5, ok and not h3.missing and dt < 600, detail)
    assert ok


def test_raw_cusp(raw, transform):
    t0 = time.perf_counter()
    cusp = cusp_to_raw(transform, locate_cusp(transform.apply()))
    dt = time.perf_counter() - t0
    a, b = cusp.raw
    ok = record(6, abs(a - 0.019) <= 0.005 and abs(b + 0.29) <= 0.005 and dt < 600,
                f"cusp at ({a:.6f}, {b:.6f}), {dt:.0f} s")
    assert ok


def test_flow_properties(nf, raw):
    rng = np.random.default_rng(1)
    p = (0.01, 0.0)
    semi = rev = var = 0.0
    for _ in range(8):
        x, y = rng.uniform(-0.04, -0.002), rng.uniform(-0.04, 0.04)
        t1, t2 = rng.uniform(0.5, 4.0, 2)
        a = integrate(nf, (x, y), t1, p).endpoint
        semi = max(semi, np.max(np.abs(np.subtract(integrate(nf, a, t2, p).endpoint,
                                                   integrate(nf, (x, y), t1 + t2, p).endpoint))))
        rev = max(rev, np.max(np.abs(np.subtract(integrate(nf, a, -t1, p).endpoint, (x, y)))))
        r = integrate(nf, (x, y), t1 + t2, p, variational=True)
        h = 1e-6
        fd = np.column_stack([
            (np.array(integrate(nf, (x + e0, y + e1), t1 + t2, p).endpoint)
             - np.array(integrate(nf, (x - e0, y - e1), t1 + t2, p).endpoint)) / (2 * h)
            for e0, e1 in ((h, 0.0), (0.0, h))
        ])
        var = max(var, np.max(np.abs(r.variational - fd)) / max(1.0, np.max(np.abs(fd))))
    cont = max(check_continuity(nf), check_continuity(raw, params=(0.01, 0.05)))
    ok = record(7, semi < 1e-7 and rev < 1e-7 and var < 1e-4 and cont < 1e-10,
                f"semigroup {semi:.1e}, reversibility {rev:.1e}, variational {var:.1e}, continuity {cont:.1e}")
    assert ok


def test_orbit_properties(nf, far_curves):
    h2_far, h3, _ = far_curves
    hopf = 0.0
    closure = graze = 0.0
    for mu in (0.01, 0.02, 0.05):
        fam = OrbitFamily(nf, mu)
        orb = fam.orbit(fam.x_eq + 0.01 * fam.scale)
        hopf = max(hopf, abs(orb.multiplier - 1))
        closure = max(closure, orb.residual)
        eg, _ = fam.grazing()
        g = fam.orbit(eg)
        graze = max(graze, abs(g.graze_measure))
        closure = max(closure, g.residual)
    graze = max(graze, max(h2_far.residuals))
    closure = max(closure, max(h3.residuals))
    sn = max(abs(h3.multipliers - 1))
    ok = record(7, closure < 1e-7 and hopf < 2e-3 and sn < 5e-3 and graze < 1e-8,
                f"closure {closure:.1e}, Hopf multiplier {hopf:.1e}, saddle-node multiplier {sn:.1e}, graze {graze:.1e}")
    assert ok


def _ordering(nf, h2_far, h3):
    near = list(np.geomspace(3e-3, 0.04, 5))
    h1 = trace_h1(nf, near + FAR)
    h2 = {**dict(zip(near, trace_h2(nf, near).eta)), **dict(zip(h2_far.mu, h2_far.eta))}
    bad = [m for m, e1 in zip(h1.mu, h1.eta) if not h2[m] < e1]
    bad += [s.mu for s in h3.samples if not s.eta < h2[s.mu]]
    return bad


def test_ordering_below_cusp(nf, far_curves):
    h2_far, h3, _ = far_curves
    below = [s for s in h3.samples if s.mu < MU_CUSP]
    bad = _ordering(nf, h2_far, h3)
    ok = record(7, not bad and len(below) == len([m for m in FAR if m < MU_CUSP]),
                f"h2 < h1 on (0, 0.2] and h3 < h2 at {len(below)} values below the cusp")
    assert ok


@pytest.mark.xfail(strict=True, reason="h3 ends at the cusp near mu = 0.0973")
def test_ordering_to_end_of_window(far_curves):
    _, h3, _ = far_curves
    missing = [m for m, _ in h3.missing]
    ok = record(7, not missing, "h3 missing at mu = " + ", ".join(f"{m:.3f}" for m in missing) if missing
                else "h3 < h2 < h1 on (0, 0.2]")
    assert ok


def test_discontinuity_map_decay(nf, inv):
    mu = 0.02
    eta = OrbitFamily(nf, mu).grazing()[1]
    tab = D.validate_against_flow(D.build_asymptotic(nf, inv, "Pdm"), nf, (mu, eta), np.geomspace(1e-3, 1e-1, 9))
    ok = record(8, tab.exponent >= 1.9, f"discontinuity map error exponent {tab.exponent:.3f}")
    assert ok


def test_model_fold_oracle():
    model = D.SimpleMapModel(0.9, 1.0)
    grid = np.linspace(0.0, 0.05, 1_000_001)
    lo, hi = 1e-12, 1e-2
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        g = D.SimpleMapModel(model.Xi, model.gamma, mid)(grid) - grid
        if np.count_nonzero(np.diff(np.sign(g))) >= 2:
            lo = mid
        else:
            hi = mid
    err = abs(D.simplemap_fold(model) - 0.5 * (lo + hi))
    ok = record(8, err < 1e-6, f"model fold vs brute force {err:.1e}")
    assert ok


def _fold_ratios(inv, h3, mus):
    return {s.mu: s.eta2 / D.predicted_fold_gap(inv, s.mu) for s in h3.samples if s.mu in mus}


def test_fold_prediction_away_from_cusp(inv, far_curves):
    _, h3, _ = far_curves
    mus = [m for m in FAR if m <= 0.08]
    r = _fold_ratios(inv, h3, mus)
    worst = max(abs(v - 1) for v in r.values())
    ok = record(8, len(r) == len(mus) and worst <= 0.3,
                f"traced/predicted fold gap on [0.05, 0.08] within {worst:.0%}")
    assert ok


@pytest.mark.xfail(strict=True, reason="the fold ratio grows toward the cusp and the fold is absent beyond it")
def test_fold_prediction_whole_window(inv, far_curves):
    _, h3, _ = far_curves
    r = _fold_ratios(inv, h3, FAR)
    worst = max(abs(v - 1) for v in r.values())
    ok = record(8, len(r) == len(FAR) and worst <= 0.3,
                f"fold gap on [0.05, 0.2]: found at {len(r)} of {len(FAR)} values, worst ratio error {worst:.0%}")
    assert ok

"""Command-line front end: ``pwsbif <command> [options]``.

Exit status is 0 when every check the command performs passes, 1 when a
check fails, 2 on a usage error and 3 when a computation raises.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .curves import BifurcationCurve, CurveSample, emit_csv
from .errors import PwsbifError
from .flow import DEFAULT_OPTIONS, IntegratorOptions, integrate
from .system import NormalFormSystem, get_system

COMMANDS = ("invariants", "h1", "curves", "dmap-validate", "verify", "bifset", "integrate")
SYSTEMS = ("example-raw", "example-nf")

# residual thresholds that decide the exit status
H1_TOL = 1e-10
GRAZE_TOL = 1e-8
HOPF_MULT_TOL = 2e-3
SN_MULT_TOL = 5e-3


def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return n


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _which(text):
    names = tuple(w.strip() for w in str(text).split(",") if w.strip())
    bad = [w for w in names if w not in ("h1", "h2", "h3")]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"--which takes a subset of h1,h2,h3, got {text!r}")
    return names


def _window(text):
    w = _floats(text)
    if len(w) != 2 or not 0 < w[0] < w[1]:
        raise argparse.ArgumentTypeError(f"window must be 'lo,hi' with 0 < lo < hi, got {text!r}")
    return w


# option name -> (type, default); defaults apply after the config file
OPTIONS = {
    "system": (str, "example-nf"),
    "rtol": (_positive_float, DEFAULT_OPTIONS.rtol),
    "atol": (_positive_float, DEFAULT_OPTIONS.atol),
    "event_tol": (_positive_float, DEFAULT_OPTIONS.event_tol),
    "max_time": (_positive_float, DEFAULT_OPTIONS.max_time),
    "threads": (_positive_int, None),
    "mu_min": (_positive_float, 3e-3),
    "mu_max": (_positive_float, 3e-2),
    "points": (_positive_int, 30),
    "spacing": (str, "log"),
    "which": (_which, ("h1", "h2")),
    "mu": (_positive_float, 0.02),
    "eta": (float, None),
    "eps_min": (_positive_float, 1e-3),
    "eps_max": (_positive_float, 1e-1),
    "kinds": (str, "Pdm"),
    "h1_window": (_window, (1e-4, 1e-2)),
    "h2_window": (_window, (3e-3, 3e-2)),
    "h3_window": (_window, (0.05, 0.2)),
    "h3_points": (_positive_int, 8),
    "h2_max": (_positive_float, 0.12),
    "cusp": (str, "yes"),
    "start": (_floats, (-0.05, 0.0)),
    "time": (float, 10.0),
    "params": (_floats, None),
    "out": (str, None),
    "csv": (str, None),
}


@dataclass
class RunConfig:
    command: str
    system: str = "example-nf"
    options: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        get_system(self.system)

    def get(self, key):
        return self.options.get(key, OPTIONS[key][1])

    @property
    def integrator(self) -> IntegratorOptions:
        return replace(DEFAULT_OPTIONS, rtol=self.get("rtol"), atol=self.get("atol"),
                       event_tol=self.get("event_tol"), max_time=self.get("max_time"))


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p):
    p.add_argument("--system", choices=SYSTEMS + ("linear-center", "linear-focus"))
    p.add_argument("--config", help="INI file with key = value options")
    g = p.add_argument_group("integrator")
    g.add_argument("--rtol", type=_positive_float)
    g.add_argument("--atol", type=_positive_float)
    g.add_argument("--event-tol", type=_positive_float)
    g.add_argument("--max-time", type=_positive_float)
    p.add_argument("--threads", type=_positive_int, help="worker threads (capped by PWSBIF_THREADS)")


def _add_grid(p):
    p.add_argument("--mu-min", type=_positive_float)
    p.add_argument("--mu-max", type=_positive_float)
    p.add_argument("--points", type=_positive_int)
    p.add_argument("--spacing", choices=("log", "linear"))


def build_parser():
    parser = argparse.ArgumentParser(prog="pwsbif", description="Loci near a discontinuous Hopf bifurcation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invariants", help="codimension-two invariants of a system")
    _add_common(p)

    p = sub.add_parser("h1", help="trace the Hopf locus")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--out")

    p = sub.add_parser("curves", help="trace selected loci to CSV")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--which", type=_which)
    p.add_argument("--out")

    p = sub.add_parser("dmap-validate", help="compare asymptotic maps with the flow")
    _add_common(p)
    p.add_argument("--mu", type=_positive_float)
    p.add_argument("--eta", type=float, help="defaults to the grazing value h2(mu)")
    p.add_argument("--eps-min", type=_positive_float)
    p.add_argument("--eps-max", type=_positive_float)
    p.add_argument("--points", type=_positive_int)
    p.add_argument("--kinds", help="comma-separated subset of P1,P2,P3,Pdm,Plhf,Pfull")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="fit the three scaling laws")
    _add_common(p)
    p.add_argument("--h1-window", type=_window)
    p.add_argument("--h2-window", type=_window)
    p.add_argument("--h3-window", type=_window)
    p.add_argument("--points", type=_positive_int)
    p.add_argument("--h3-points", type=_positive_int)
    p.add_argument("--out")
    p.add_argument("--csv")

    p = sub.add_parser("bifset", help="plot the loci in the raw parameter frame")
    _add_common(p)
    p.add_argument("--points", type=_positive_int)
    p.add_argument("--h2-max", type=_positive_float, help="largest mu on the Hopf and grazing loci")
    p.add_argument("--cusp", choices=("yes", "no"))
    p.add_argument("--out")
    p.add_argument("--csv")

    p = sub.add_parser("integrate", help="integrate one trajectory")
    _add_common(p)
    p.add_argument("--start", type=_floats)
    p.add_argument("--time", type=float)
    p.add_argument("--params", type=_floats)
    p.add_argument("--out")
    return parser


def _read_config(path, command):
    """Options from ``path``: ``[pwsbif]`` first, then the ``[<command>]`` section."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"config file {path} not found")
    out = {}
    for section in ("pwsbif", "integrator", command):
        if cp.has_section(section):
            for key, val in cp.items(section):
                key = key.replace("-", "_")
                if key not in OPTIONS:
                    raise ValueError(f"unknown option {key!r} in [{section}] of {path}")
                try:
                    out[key] = OPTIONS[key][0](val)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise ValueError(f"bad value for {key} in {path}: {exc}") from exc
    return out


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    opts = _read_config(args.config, args.command) if args.config else {}
    for key, val in vars(args).items():
        if key in OPTIONS and val is not None:
            opts[key] = val
    system = opts.pop("system", OPTIONS["system"][1])
    outputs = {k: opts.pop(k) for k in ("out", "csv") if k in opts}
    return RunConfig(args.command, system, opts, outputs)


# ---------------------------------------------------------------------------
# commands


def _nf_of(cfg: RunConfig):
    """Normal form of the configured system, with the transform when one was needed."""
    sys_ = get_system(cfg.system)
    if isinstance(sys_, NormalFormSystem):
        return sys_, None, None
    from .normalform import build_transform, locate_codim2

    pt = locate_codim2(sys_)
    tr = build_transform(sys_, pt)
    return tr.apply(), tr, pt


def _grid(lo, hi, n, spacing):
    if not 0 < lo <= hi:
        raise ValueError(f"need 0 < mu-min <= mu-max, got {lo:g}, {hi:g}")
    if n == 1:
        return [lo]
    return list(np.geomspace(lo, hi, n) if spacing == "log" else np.linspace(lo, hi, n))


def _emit(curves, path):
    if path:
        emit_csv([c for c in curves if len(c)], path)
        print(f"wrote {path}")


def cmd_invariants(cfg, out):
    from .normalform import compute_invariants, criticality, predicted_coefficients

    nf, tr, pt = _nf_of(cfg)
    if pt is not None:
        out.write("codimension-two point\n")
        out.write(f"  state  = {pt.state[0]:.12g}, {pt.state[1]:.12g}\n")
        out.write(f"  params = {pt.params[0]:.12g}, {pt.params[1]:.12g}\n")
        out.write(f"  left eigenvalues  = {pt.left_eigs[0]:.12g}, {pt.left_eigs[1]:.12g}\n")
        out.write(f"  right eigenvalues = {pt.right_eigs[0]:.12g}, {pt.right_eigs[1]:.12g}\n")
    inv = compute_invariants(nf, check=False)
    out.write(f"{'name':<10}{'value':>22}{'margin':>16}\n")
    for name, (val, margin) in inv.flags.items():
        out.write(f"{name:<10}{val:>22.15g}{margin:>16.3e}\n")
    for key, val in inv.as_dict().items():
        out.write(f"{key} = {val:.17g}\n")
    for key, val in predicted_coefficients(inv).items():
        out.write(f"{key} = {val:.17g}\n")
    for key, val in criticality(inv).items():
        out.write(f"{key} = {val}\n")
    return 0 if all(m > 0 for _, m in inv.flags.values()) else 1


def _h1_ok(curve):
    return all(s.residual < H1_TOL for s in curve.samples)


def cmd_h1(cfg, out):
    from .equilibria import trace_h1

    nf, _, _ = _nf_of(cfg)
    grid = _grid(cfg.get("mu_min"), cfg.get("mu_max"), cfg.get("points"), cfg.get("spacing"))
    curve = trace_h1(nf, grid)
    _emit([curve], cfg.outputs.get("out"))
    ok = _h1_ok(curve)
    out.write(f"h1: {len(curve)} points, max residual {max(curve.residuals):.3e} ({'pass' if ok else 'FAIL'})\n")
    return 0 if ok else 1


def _trace(nf, which, grid, cfg, out):
    from .equilibria import trace_h1
    from .orbits import trace_h2, trace_h3

    workers = cfg.get("threads")
    opts = cfg.integrator
    curves, ok = [], True
    if "h1" in which:
        c = trace_h1(nf, grid)
        good = _h1_ok(c)
        ok &= good
        out.write(f"h1: {len(c)} points, max residual {max(c.residuals):.3e} ({'pass' if good else 'FAIL'})\n")
        curves.append(c)
    if "h2" in which:
        c = trace_h2(nf, grid, opts, workers)
        good = all(s.residual < GRAZE_TOL for s in c.samples)
        ok &= good
        out.write(f"h2: {len(c)} points, max |graze| {max(c.residuals):.3e} ({'pass' if good else 'FAIL'})\n")
        curves.append(c)
    if "h3" in which:
        c = trace_h3(nf, grid, opts, workers, skip_missing=True)
        good = not c.missing and all(abs(s.multiplier - 1) < SN_MULT_TOL for s in c.samples)
        ok &= good
        worst = max((abs(s.multiplier - 1) for s in c.samples), default=math.nan)
        out.write(f"h3: {len(c)} points, max |multiplier - 1| {worst:.3e} ({'pass' if good else 'FAIL'})\n")
        for m, msg in c.missing:
            out.write(f"h3: no fold at mu={m:.6g}: {msg}\n")
        curves.append(c)
    return curves, ok


def cmd_curves(cfg, out):
    nf, _, _ = _nf_of(cfg)
    grid = _grid(cfg.get("mu_min"), cfg.get("mu_max"), cfg.get("points"), cfg.get("spacing"))
    curves, ok = _trace(nf, cfg.get("which"), grid, cfg, out)
    _emit(curves, cfg.outputs.get("out"))
    return 0 if ok else 1


DMAP_COLUMNS = ("kind", "x_hat", "asymptotic", "exact", "error")
# error decay expected from the remainder orders, less a margin
DMAP_MIN_EXPONENT = {"P1": 1.4, "P2": 2.8, "P3": 3.8, "Pdm": 1.9, "Plhf": 1.5, "Pfull": 1.9}


def cmd_dmap_validate(cfg, out):
    from .dmaps import KINDS, build_asymptotic, validate_against_flow
    from .normalform import compute_invariants
    from .orbits import OrbitFamily

    nf, _, _ = _nf_of(cfg)
    inv = compute_invariants(nf)
    mu = cfg.get("mu")
    eta = cfg.get("eta")
    if eta is None:
        eta = OrbitFamily(nf, mu, cfg.integrator).grazing()[1]
    kinds = [k.strip() for k in cfg.get("kinds").split(",") if k.strip()]
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise ValueError(f"unknown map kinds {bad}; known: {', '.join(KINDS)}")
    grid = np.geomspace(cfg.get("eps_min"), cfg.get("eps_max"), cfg.get("points") if "points" in cfg.options else 9)
    ok = True
    rows = []
    out.write(f"mu = {mu:.17g}\neta = {eta:.17g}\n")
    for kind in kinds:
        xs = -grid if kind == "P3" else grid
        table = validate_against_flow(build_asymptotic(nf, inv, kind), nf, (mu, eta), xs, opts=cfg.integrator)
        good = table.exponent >= DMAP_MIN_EXPONENT[kind]
        ok &= good
        out.write(f"{kind}: error exponent {table.exponent:.4f} (need >= {DMAP_MIN_EXPONENT[kind]}) "
                  f"{'pass' if good else 'FAIL'}\n")
        rows += [(kind, x, a, e, r) for x, a, e, r in zip(table.x, table.asymptotic, table.exact, table.error)]
    path = cfg.outputs.get("out")
    if path:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DMAP_COLUMNS)
            for kind, *vals in rows:
                w.writerow([kind] + [f"{float(v):.17g}" for v in vals])
        out.write(f"wrote {path}\n")
    return 0 if ok else 1


def cmd_verify(cfg, out):
    from .equilibria import trace_h1
    from .normalform import compute_invariants, predicted_coefficients
    from .orbits import trace_h2, trace_h3
    from .scaling import theorem_report

    nf, _, _ = _nf_of(cfg)
    inv = compute_invariants(nf)
    opts, workers = cfg.integrator, cfg.get("threads")
    n = cfg.get("points")
    w1, w2, w3 = cfg.get("h1_window"), cfg.get("h2_window"), cfg.get("h3_window")
    g1 = _grid(*w1, n, "log")
    g2 = _grid(*w2, n, "log")
    g3 = _grid(*w3, cfg.get("h3_points"), "log")
    t0 = time.perf_counter()
    h1 = trace_h1(nf, sorted(set(g1) | set(g2) | set(g3)))
    h2 = trace_h2(nf, sorted(set(g2) | set(g3)), opts, workers)
    h3 = trace_h3(nf, g3, opts, workers, skip_missing=True)
    elapsed = time.perf_counter() - t0

    def within(c, w):
        return BifurcationCurve(c.kind, [s for s in c.samples if w[0] <= s.mu <= w[1]])

    c1, c2 = within(h1, w1), within(h2, w2)
    # the h3 law pairs h3 with h2 on the h3 window
    c2_for_h3 = within(h2, w3)
    report = theorem_report(inv, {"h1": c1, "h2": _merge(c2, c2_for_h3), "h3": h3})
    pred = predicted_coefficients(inv)
    text = [report.text()]
    text.append(f"predicted h1 slope = {pred['h1_slope']:.10g}\n")
    text.append(f"predicted h2 - h1 coefficient = {pred['h2_minus_h1']:.10g}\n")
    text.append(f"predicted h3 - h2 coefficient = {pred['h3_minus_h2']:.10g}\n")
    for m, msg in getattr(h3, "missing", []):
        text.append(f"h3 missing at mu = {m:.6g}: {msg}\n")
    text.append(f"tracing time = {elapsed:.1f} s\n")
    text.append(f"result = {'pass' if report.passed else 'FAIL'}\n")
    body = "".join(text)
    out.write(body)
    if cfg.outputs.get("out"):
        with open(cfg.outputs["out"], "w", newline="\n") as fh:
            fh.write(body)
    _emit([h1, h2, h3], cfg.outputs.get("csv"))
    return 0 if report.passed else 1


def _merge(a, b):
    seen = {s.mu: s for s in a.samples}
    for s in b.samples:
        seen.setdefault(s.mu, s)
    return BifurcationCurve(a.kind, [seen[m] for m in sorted(seen)])


def cmd_bifset(cfg, out):
    from .equilibria import trace_h1
    from .orbits import bifurcation_set_raw, cusp_to_raw, locate_cusp, trace_h2, trace_h3, trace_outer_fold
    from .plotting import Series, bifset_spec, render_svg

    if cfg.system != "example-raw":
        raise ValueError("bifset plots in the raw frame and needs --system example-raw")
    nf, tr, _ = _nf_of(cfg)
    opts, workers = cfg.integrator, cfg.get("threads")
    n = cfg.options.get("points", 16)
    mu_hi = cfg.get("h2_max")
    g = list(np.geomspace(min(1e-3, mu_hi / n), mu_hi, n))
    h1 = trace_h1(nf, g)
    h2 = trace_h2(nf, g, opts, workers)
    curves = [("Hopf", h1), ("grazing", h2)]
    cusp_xy = None
    if cfg.get("cusp") == "yes":
        cusp = cusp_to_raw(tr, locate_cusp(nf, opts=opts))
        cusp_xy = cusp.raw
        out.write(f"cusp: mu = {cusp.mu:.10g}, eta = {cusp.eta:.10g}, alpha = {cusp.raw[0]:.10g}, beta = {cusp.raw[1]:.10g}\n")
        gs = list(np.linspace(0.03, cusp.mu, max(n // 2, 3)))[:-1]
        h3 = trace_h3(nf, gs, opts, workers, skip_missing=True)
        outer = trace_outer_fold(nf, gs, opts=opts, workers=workers)
        # both fold branches end at the cusp
        tip = CurveSample(mu=cusp.mu, eta=cusp.eta, residual=0.0)
        h3.samples.append(tip)
        outer.samples.append(tip)
        curves += [("saddle-node", h3), ("saddle-node (outer)", outer)]
    raw = bifurcation_set_raw(get_system(cfg.system), tr, [c for _, c in curves])
    labelled = list(zip([lbl for lbl, _ in curves], raw))
    spec = bifset_spec(labelled, cfg.outputs.get("out") or "bifset.svg", cusp=cusp_xy)
    # boundary-equilibrium locus mu = 0, the discontinuous bifurcation
    betas = np.linspace(min(min(c.eta) for c in raw), max(max(c.eta) for c in raw), 20)
    line = [tr.params_inverse((0.0, b / 10.0)) for b in betas]
    spec.series.insert(0, Series("boundary equilibrium", [p[0] for p in line], [p[1] for p in line], "double", "tab:purple"))
    render_svg(spec)
    out.write(f"wrote {spec.path}\n")
    _emit(raw, cfg.outputs.get("csv"))
    return 0


def cmd_integrate(cfg, out):
    sys_ = get_system(cfg.system)
    params = cfg.get("params")
    if params is None:
        params = sys_.default_params or tuple(0.0 for _ in sys_.param_names)
    start = cfg.get("start")
    if len(start) != 2:
        raise ValueError("--start takes 'x,y'")
    res = integrate(sys_, start, cfg.get("time"), params, cfg.integrator, record_path=bool(cfg.outputs.get("out")))
    out.write(f"endpoint = {res.endpoint[0]:.17g}, {res.endpoint[1]:.17g}\n")
    out.write(f"elapsed = {res.elapsed:.17g}\n")
    out.write(f"crossings = {len(res.events)}\n")
    for ev in res.events:
        out.write(f"  t = {ev.time:.12g} at ({ev.point[0]:.12g}, {ev.point[1]:.12g}) direction {ev.direction:+d}\n")
    path = cfg.outputs.get("out")
    if path:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("x", "y"))
            for x, y in res.path:
                w.writerow((f"{x:.17g}", f"{y:.17g}"))
        out.write(f"wrote {path}\n")
    return 0


HANDLERS = {
    "invariants": cmd_invariants,
    "h1": cmd_h1,
    "curves": cmd_curves,
    "dmap-validate": cmd_dmap_validate,
    "verify": cmd_verify,
    "bifset": cmd_bifset,
    "integrate": cmd_integrate,
}


def run(cfg: RunConfig, out=None) -> int:
    """Execute ``cfg``; returns the exit status."""
    out = out or sys.stdout
    from .parallel import worker_count

    cfg.options["threads"] = worker_count(cfg.options.get("threads"))
    try:
        return HANDLERS[cfg.command](cfg, out)
    except (PwsbifError, ValueError, KeyError, OSError) as exc:
        print(f"pwsbif {cfg.command}: error: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"pwsbif: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Event-aware integration of piecewise-smooth planar flows.

The integrator is a Dormand-Prince 5(4) pair with its quartic dense output.
Every accepted step is scanned for manifold crossings (including double
crossings hidden inside one step), tangential contacts and user stop
conditions.  A step that contains a crossing is re-taken so that it ends on the
manifold, which keeps each step inside a single smooth field; this matters for
the variational equation and for the accuracy of the return maps built on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import Blowup, LeftDomain, NoReturn, StepSizeUnderflow
from .system import LEFT, RIGHT, PiecewiseSystem

# Dormand-Prince 5(4) tableau.
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)
_N_SUB = 4  # dense-output samples per step used by the event scan


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    event_tol: float = 1e-12
    max_time: float = 200.0
    max_steps: int = 500_000
    blowup: float = 1e3
    h_min: float = 1e-14


DEFAULT_OPTIONS = IntegratorOptions()


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    point: tuple
    direction: int  # sign of d(switch_fn)/dt; 0 for tangential contacts
    tangential: bool = False


@dataclass
class FlowResult:
    endpoint: tuple
    elapsed: float
    events: list = field(default_factory=list)
    variational: Optional[np.ndarray] = None
    stopped: bool = False
    switch_max: Optional[float] = None
    switch_max_point: Optional[tuple] = None
    path: Optional[np.ndarray] = None
    final_side: str = LEFT


@dataclass(frozen=True)
class StopCondition:
    """Terminate integration when ``fn`` crosses zero.

    ``direction`` is the required sign of ``d fn/dt`` in physical time (0 for
    either).  ``accept`` filters crossings by location.  When ``armed`` is
    false the condition only becomes live after ``fn`` has been seen on the
    pre-crossing side by more than ``arm_tol``; this is what lets a trajectory
    that starts on a section leave it without stopping immediately.
    """

    fn: Callable[[float, float], float]
    direction: int = 0
    accept: Optional[Callable[[float, float], bool]] = None
    armed: bool = True
    arm_tol: float = 1e-9
    grad: Optional[Callable[[float, float], tuple]] = None


@dataclass(frozen=True)
class Section:
    """Ray ``base + s * direction`` (``s >= 0``) used as a Poincare section.

    ``orientation`` is the sign of ``d value/dt`` that counts as a return,
    where ``value`` is the signed distance to the line.  With
    ``coordinate == "x"`` points on the section are labelled by their
    x-coordinate rather than by arclength from ``base``.
    """

    base: tuple
    direction: tuple
    orientation: int = -1
    coordinate: str = "arclength"

    def __post_init__(self):
        dx, dy = self.direction
        n = math.hypot(dx, dy)
        if n == 0.0:
            raise ValueError("section direction must be nonzero")
        object.__setattr__(self, "direction", (dx / n, dy / n))
        if self.coordinate not in ("arclength", "x"):
            raise ValueError("coordinate must be 'arclength' or 'x'")
        if self.coordinate == "x" and abs(self.direction[0]) < 1e-12:
            raise ValueError("x coordinate needs a section that is not vertical")

    def value(self, x, y):
        dx, dy = self.direction
        return dx * (y - self.base[1]) - dy * (x - self.base[0])

    def along(self, x, y):
        dx, dy = self.direction
        return dx * (x - self.base[0]) + dy * (y - self.base[1])

    def point(self, c):
        s = c if self.coordinate == "arclength" else (c - self.base[0]) / self.direction[0]
        return self.base[0] + s * self.direction[0], self.base[1] + s * self.direction[1]

    def coord(self, x, y):
        s = self.along(x, y)
        return s if self.coordinate == "arclength" else self.base[0] + s * self.direction[0]

    def stop_condition(self, arm_tol=1e-9):
        dx, dy = self.direction
        return StopCondition(
            fn=self.value,
            direction=self.orientation,
            accept=lambda x, y: self.along(x, y) >= 0.0,
            armed=False,
            arm_tol=arm_tol,
            grad=lambda x, y: (-dy, dx),
        )


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / v.size)


class _Run:
    """One integration call.  Holds the per-call state; never shared."""

    def __init__(self, sys, p, opts, sgn, variational, forced_side):
        self.sys = sys
        self.p = p
        self.opts = opts
        self.sgn = sgn
        self.variational = variational
        self.forced_side = forced_side
        self.side = forced_side or LEFT
        sg = sys.switch_grad
        if sg is None:
            self.sgrad = lambda x, y: sys.switch_gradient(x, y, p)
        else:
            self.sgrad = lambda x, y: sg(x, y, p)

    # vector field in integration time
    def fun(self, z):
        x, y = z[0], z[1]
        fx, fy = self.sys.field(self.side, x, y, self.p)
        s = self.sgn
        if not self.variational:
            return np.array((s * fx, s * fy))
        J = self.sys.jacobian(self.side, x, y, self.p)
        # z[2:] holds the columns of the 2x2 fundamental matrix
        a, b, c, d = z[2], z[3], z[4], z[5]
        return np.array(
            (
                s * fx,
                s * fy,
                s * (J[0, 0] * a + J[0, 1] * b),
                s * (J[1, 0] * a + J[1, 1] * b),
                s * (J[0, 0] * c + J[0, 1] * d),
                s * (J[1, 0] * c + J[1, 1] * d),
            )
        )

    def step(self, z, f0, h):
        k = np.empty((7, z.size))
        k[0] = f0
        for i in range(1, 6):
            a = _A[i]
            dz = a[0] * k[0]
            for j in range(1, i):
                dz = dz + a[j] * k[j]
            k[i] = self.fun(z + h * dz)
        z_new = z + h * (_B @ k[:6])
        k[6] = self.fun(z_new)
        return z_new, k

    def switch(self, z):
        return self.sys.switch_fn(z[0], z[1], self.p)

    def dswitch(self, z, zdot):
        gx, gy = self.sgrad(z[0], z[1])
        return gx * zdot[0] + gy * zdot[1]


def _dense(z, h, Q, theta):
    return z + h * (Q @ np.array((theta, theta * theta, theta**3, theta**4)))


def _dense_dot(Q, theta):
    return Q @ np.array((1.0, 2.0 * theta, 3.0 * theta * theta, 4.0 * theta**3))


def _initial_step(run, z, f0, opts, limit):
    scale = opts.atol + opts.rtol * np.abs(z)
    d0 = _rms(z / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, limit)
    f1 = run.fun(z + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, limit)


def integrate(
    sys: PiecewiseSystem,
    start,
    t_span: float,
    params=None,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    *,
    variational: bool = False,
    side: Optional[str] = None,
    stop: Optional[StopCondition] = None,
    track_max: bool = False,
    record_path: bool = False,
    initial_side: Optional[str] = None,
) -> FlowResult:
    """Integrate ``sys`` from ``start`` for time ``t_span`` (may be negative).

    Parameters
    ----------
    side : {"left", "right"}, optional
        Follow one smooth half-field everywhere and never switch.  Crossings
        of the manifold are still logged.
    stop : StopCondition, optional
        Terminate at the first accepted zero of ``stop.fn``.  ``t_span`` is
        then only an upper bound and ``FlowResult.stopped`` reports whether
        the condition fired.
    track_max : bool
        Record the largest value of ``switch_fn`` met along the path.
    initial_side : {"left", "right"}, optional
        Field to start with when ``start`` lies on the manifold.

    Returns
    -------
    FlowResult
        ``events`` are in chronological order; ``variational`` is the 2x2
        derivative of the endpoint with respect to ``start`` when requested.
    """
    p = tuple(params) if params is not None else tuple(sys.default_params or ())
    sgn = 1.0 if t_span >= 0 else -1.0
    total = abs(float(t_span))
    run = _Run(sys, p, opts, sgn, variational, side)
    x0, y0 = float(start[0]), float(start[1])
    if not (math.isfinite(x0) and math.isfinite(y0)):
        raise ValueError("start must be finite")
    z = np.array([x0, y0, 1.0, 0.0, 0.0, 1.0]) if variational else np.array([x0, y0])

    piecewise = side is None
    s0 = run.switch(z)
    if piecewise:
        if initial_side is not None:
            run.side = initial_side
        elif abs(s0) <= opts.event_tol:
            fx, fy = sys.f_left(x0, y0, p)
            run.side = RIGHT if sgn * run.dswitch(z, (fx, fy)) > 0 else LEFT
        else:
            run.side = LEFT if s0 <= 0 else RIGHT

    events = []
    if piecewise and abs(s0) <= opts.event_tol and initial_side is None:
        d = 1 if run.side == RIGHT else -1
        events.append(CrossingEvent(0.0, (x0, y0), int(sgn * d), False))
    best = [s0, (x0, y0)] if track_max else None
    path = [(x0, y0)] if record_path else None
    armed = stop.armed if stop is not None else True
    stop_dir = sgn * stop.direction if stop is not None else 0

    t = 0.0
    f0 = run.fun(z)
    h = _initial_step(run, z, f0, opts, total if total > 0 else 1.0)
    n_steps = 0
    flipped_at = None

    while t < total:
        n_steps += 1
        if n_steps > opts.max_steps:
            raise StepSizeUnderflow(f"exceeded {opts.max_steps} steps at t={sgn * t:.6g}")
        h = min(h, total - t)
        z_new, k = run.step(z, f0, h)
        scale = opts.atol + opts.rtol * np.maximum(np.abs(z), np.abs(z_new))
        err = _rms(h * (_E @ k) / scale)
        if not math.isfinite(err) or err > 1.0:
            fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err**-0.2)
            h *= fac
            if h < opts.h_min * max(1.0, t):
                raise StepSizeUnderflow(f"step size underflow at t={sgn * t:.6g}")
            continue

        Q = k.T @ _P

        def zc(theta, z=z, h=h, Q=Q, z_new=z_new):
            return z_new if theta == 1.0 else _dense(z, h, Q, theta)

        def s_at(theta):
            return run.switch(zc(theta))

        def ds_at(theta, Q=Q):
            return run.dswitch(zc(theta), _dense_dot(Q, theta))

        thetas = [j / _N_SUB for j in range(_N_SUB + 1)]
        zs = [z] + [zc(th) for th in thetas[1:]]
        ss = [run.switch(v) for v in zs]
        dss = [run.dswitch(z, f0)] + [ds_at(th) for th in thetas[1:-1]] + [run.dswitch(z_new, k[6])]

        # extrema of switch_fn between samples: (theta, value, is_max)
        extrema = []
        for j in range(1, _N_SUB + 1):
            a, b = dss[j - 1], dss[j]
            if (a > 0 >= b) or (a < 0 <= b):
                try:
                    th = brentq(ds_at, thetas[j - 1], thetas[j], xtol=1e-14)
                except ValueError:
                    continue
                extrema.append((th, s_at(th), a > 0))

        crossing = None  # (theta_inside, theta_outside)
        tangent = []
        if piecewise:
            if run.side == LEFT:
                outside, toward_out = (lambda s: s > 0.0), True
            else:
                outside, toward_out = (lambda s: s < 0.0), False
            pts = sorted(
                [(th, sv, None) for th, sv in zip(thetas[1:], ss[1:])]
                + [(th, sv, m) for th, sv, m in extrema]
            )
            last_in = 0.0 if not outside(ss[0]) else None
            for th, sv, is_max in pts:
                if outside(sv):
                    if last_in is not None:
                        crossing = (last_in, th)
                        break
                else:
                    last_in = th
                    if is_max is toward_out and abs(sv) <= opts.event_tol:
                        tangent.append(th)
            if crossing is None and last_in is None and flipped_at != t:
                # started marginally on the wrong side and kept going: flip
                run.side = RIGHT if run.side == LEFT else LEFT
                f0 = run.fun(z)
                flipped_at = t
                continue

        stop_theta = None
        if stop is not None:
            cs = [stop.fn(v[0], v[1]) for v in zs]
            for j in range(1, _N_SUB + 1):
                if crossing is not None and thetas[j - 1] >= crossing[1]:
                    break
                if not armed:
                    if (stop_dir != 0 and -stop_dir * cs[j] > stop.arm_tol) or (
                        stop_dir == 0 and abs(cs[j]) > stop.arm_tol
                    ):
                        armed = True
                    continue
                a, b = cs[j - 1], cs[j]
                hit = (stop_dir < 0 and a > 0 >= b) or (stop_dir > 0 and a < 0 <= b) or (
                    stop_dir == 0 and a * b < 0
                )
                if hit:
                    th = brentq(lambda th: stop.fn(*zc(th)[:2]), thetas[j - 1], thetas[j], xtol=1e-15)
                    zz = zc(th)
                    if stop.accept is None or stop.accept(zz[0], zz[1]):
                        stop_theta = (thetas[j - 1], th, thetas[j])
                        break

        if crossing is not None and (stop_theta is None or crossing[1] <= stop_theta[1]):
            lo, hi = crossing
            th = _root_theta(s_at, lo, hi)
            z_ev, hc, _ = _exact_step(run, z, f0, th * h, lo * h, hi * h, run.switch, opts.event_tol)
            _record_partial(best, path, zc, extrema, tangent, events, hc / h, z_ev, run, sgn, t, h)
            t += hc
            f_old = sys.field(run.side, z_ev[0], z_ev[1], p)
            new_side = RIGHT if run.side == LEFT else LEFT
            phys_dir = 1 if new_side == RIGHT else -1
            events.append(CrossingEvent(sgn * t, (z_ev[0], z_ev[1]), int(sgn * phys_dir), False))
            if piecewise:
                run.side = new_side
                if variational:
                    z_ev = _saltate(run, z_ev, f_old)
            z = z_ev
            f0 = run.fun(z)
            continue

        if stop_theta is not None:
            lo, th, hi = stop_theta
            z_st, hs, _ = _exact_step(run, z, f0, th * h, lo * h, hi * h,
                                      lambda v: stop.fn(v[0], v[1]), opts.event_tol)
            _record_partial(best, path, zc, extrema, tangent, events, hs / h, z_st, run, sgn, t, h)
            t += hs
            return _finish(z_st, sgn * t, events, variational, True, best, path, run.side, sgn)

        _record_partial(best, path, zc, extrema, tangent, events, 1.0, z_new, run, sgn, t, h,
                        samples=zs[1:-1])
        t += h
        z = z_new
        f0 = k[6]
        if abs(z[0]) > opts.blowup or abs(z[1]) > opts.blowup:
            raise Blowup(f"state norm exceeded {opts.blowup:g} at t={sgn * t:.6g}")
        h *= 10.0 if err == 0.0 else min(10.0, 0.9 * err**-0.2)

    return _finish(z, sgn * t, events, variational, False, best, path, run.side, sgn)


def _record_partial(best, path, zc, extrema, tangent, events, limit, z_end, run, sgn, t, h, samples=()):
    """Book-keeping for the part ``[0, limit]`` (in step fractions) just taken."""
    for th in tangent:
        if th < limit:
            zt = zc(th)
            events.append(CrossingEvent(sgn * (t + th * h), (zt[0], zt[1]), 0, True))
    if best is not None:
        for th, sv, is_max in extrema:
            if is_max and th <= limit and sv > best[0]:
                zz = zc(th)
                best[0], best[1] = sv, (zz[0], zz[1])
        s_end = run.switch(z_end)
        if s_end > best[0]:
            best[0], best[1] = s_end, (z_end[0], z_end[1])
    if path is not None:
        path.extend((v[0], v[1]) for v in samples)
        path.append((z_end[0], z_end[1]))


def _root_theta(g, lo, hi):
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if glo * ghi > 0:
        return hi
    return brentq(g, lo, hi, xtol=1e-15)


def _exact_step(run, z, f0, h_guess, h_lo, h_hi, g, tol):
    """Re-take the step so that it ends on ``g = 0``; Illinois iteration on h."""
    z_try, k = run.step(z, f0, h_guess)
    val = g(z_try)
    if abs(val) <= tol:
        return z_try, h_guess, k
    a, fa = h_lo, g(z) if h_lo == 0.0 else g(run.step(z, f0, h_lo)[0])
    b, fb = h_hi, g(run.step(z, f0, h_hi)[0])
    if fa * fb > 0:
        return z_try, h_guess, k
    c, fc = h_guess, val
    side = 0
    best = (abs(val), z_try, h_guess, k)
    for _ in range(60):
        if fc * fa < 0:
            b, fb = c, fc
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a, fa = c, fc
            if side == 1:
                fb *= 0.5
            side = 1
        c = (a * fb - b * fa) / (fb - fa)
        if not (min(a, b) <= c <= max(a, b)):
            c = 0.5 * (a + b)
        z_try, k = run.step(z, f0, c)
        fc = g(z_try)
        if abs(fc) < best[0]:
            best = (abs(fc), z_try, c, k)
        if abs(fc) <= tol or abs(b - a) < 1e-15 * max(1.0, abs(c)):
            break
    return best[1], best[2], best[3]


def _saltate(run, z, f_old):
    """Apply the saltation matrix ``I + (f_new - f_old) n^T / (n . f_old)``."""
    f_new = run.sys.field(run.side, z[0], z[1], run.p)
    gx, gy = run.sgrad(z[0], z[1])
    den = gx * f_old[0] + gy * f_old[1]
    if den == 0.0:
        return z
    S = np.eye(2) + np.outer(np.subtract(f_new, f_old), (gx, gy)) / den
    Phi = np.array([[z[2], z[4]], [z[3], z[5]]])
    Phi = S @ Phi
    out = z.copy()
    out[2], out[3], out[4], out[5] = Phi[0, 0], Phi[1, 0], Phi[0, 1], Phi[1, 1]
    return out


def _finish(z, t, events, variational, stopped, best, path, side, sgn):
    Phi = None
    if variational:
        Phi = np.array([[z[2], z[4]], [z[3], z[5]]])
    if sgn < 0:
        events = events[::-1]
    return FlowResult(
        endpoint=(float(z[0]), float(z[1])),
        elapsed=t,
        events=events,
        variational=Phi,
        stopped=stopped,
        switch_max=None if best is None else float(best[0]),
        switch_max_point=None if best is None else best[1],
        path=None if path is None else np.array(path),
        final_side=side,
    )


# ---------------------------------------------------------------------------
# Poincare returns


@dataclass
class SectionReturn:
    """One return of a trajectory to a :class:`Section`.

    ``multiplier`` is the derivative of the return map in the section
    coordinate, obtained from the variational matrix projected along the
    flow at the landing point.
    """

    coord: float
    period: float
    variational: Optional[np.ndarray]
    point: tuple
    multiplier: Optional[float] = None
    switch_max: Optional[float] = None
    events: list = field(default_factory=list)


def return_multiplier(sys, section: Section, point, Phi, params, side=None):
    """Derivative of the return map along the section from the monodromy."""
    p = tuple(params)
    if side is None:
        f1 = np.asarray(sys.rhs(point[0], point[1], p), dtype=float)
    else:
        f1 = np.asarray(sys.field(side, point[0], point[1], p), dtype=float)
    dx, dy = section.direction
    t = np.array((dx, dy))
    n = np.array((-dy, dx))
    M = Phi - np.outer(f1, n @ Phi) / (n @ f1)
    return float(t @ M @ t)


def poincare_return(
    sys: PiecewiseSystem,
    section: Section,
    start_on_section: float,
    params=None,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    *,
    variational: bool = True,
    track_max: bool = False,
    side: Optional[str] = None,
    box=None,
) -> SectionReturn:
    """Follow the flow from a section point until it next crosses the section.

    Raises
    ------
    NoReturn
        The time cap ``opts.max_time`` passed without a return.
    LeftDomain
        The trajectory left ``box`` (``(xmin, xmax, ymin, ymax)``).
    """
    p = tuple(params) if params is not None else tuple(sys.default_params or ())
    x0, y0 = section.point(start_on_section)
    local = opts
    if box is not None:
        local = IntegratorOptions(**{**opts.__dict__, "blowup": max(abs(v) for v in box)})
    try:
        res = integrate(
            sys, (x0, y0), local.max_time, p, local,
            variational=variational, side=side, stop=section.stop_condition(),
            track_max=track_max,
        )
    except Blowup as exc:
        raise LeftDomain(str(exc)) from exc
    if not res.stopped:
        raise NoReturn(f"no return to section within t={opts.max_time:g}")
    if box is not None:
        xmin, xmax, ymin, ymax = box
        ex, ey = res.endpoint
        if not (xmin <= ex <= xmax and ymin <= ey <= ymax):
            raise LeftDomain("return point outside the analysis box")
    mult = None
    if variational:
        mult = return_multiplier(sys, section, res.endpoint, res.variational, p, side=side or res.final_side)
    return SectionReturn(
        coord=section.coord(*res.endpoint),
        period=res.elapsed,
        variational=res.variational,
        point=res.endpoint,
        multiplier=mult,
        switch_max=res.switch_max,
        events=res.events,
    )


def min_signed_distance(sys, orbit_start, period, params=None, opts: IntegratorOptions = DEFAULT_OPTIONS) -> float:
    """Largest value of ``switch_fn`` along one period of an orbit.

    Zero means the orbit grazes the manifold; negative means it stays in the
    left region.  The maximum is found from dense samples and refined at the
    zeros of ``d switch_fn/dt``.
    """
    res = integrate(sys, orbit_start, period, params, opts, track_max=True)
    return res.switch_max

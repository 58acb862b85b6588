"""Verification harness tying the PDE runs to the profile and geometry predictions.

Every check returns a :class:`VerificationReport`; the measured series is
ordered with its parameter (``t`` or ``s``) strictly decreasing.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry as geo
from . import pde
from . import selfsimilar as ss
from ._validation import check_positive
from .nonlinearity import PhiTransform

__all__ = [
    "VerificationReport",
    "verify_varadhan",
    "varadhan_error_series",
    "verify_curvature_asymptotics",
    "heat_content",
    "ball_weights",
    "richardson_sqrt",
    "verify_asympvol",
    "barrier_sandwich_check",
    "scan_sandwich_tau",
    "similarity_field",
    "stationarity_score",
    "verify_ordering",
]

TARGETS = ("varadhan", "curvature_asymptotics", "asympvol", "barrier_sandwich", "stationarity",
           "ordering")


@dataclass
class VerificationReport:
    target: str
    predicted: float
    measured_series: list
    extrapolated: float
    relative_error: float
    passed: bool
    tolerance: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}")
        params = [p for p, _ in self.measured_series]
        if any(b >= a for a, b in zip(params, params[1:])):
            raise ValueError("measured series parameter must be strictly decreasing")

    def to_dict(self):
        d = asdict(self)
        d["predicted"] = "inf" if math.isinf(self.predicted) else self.predicted
        d["measured_series"] = [[float(p), float(v)] for p, v in self.measured_series]
        return _jsonable(d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)

    def series_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "value"])
        for p, v in self.measured_series:
            w.writerow([f"{p:.17g}", f"{v:.17g}"])
        return buf.getvalue()

    def line(self):
        state = "PASS" if self.passed else "FAIL"
        return (f"{state} {self.target}: extrapolated={self.extrapolated:.6g} "
                f"predicted={self.predicted:.6g} rel_err={self.relative_error:.3e} tol={self.tolerance:g}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _descending(pairs):
    return sorted(pairs, key=lambda pv: -pv[0])


# ---------------------------------------------------------------------------
# Varadhan-type limit

def varadhan_error_series(field_, transform, band):
    """``sup |-4 t Phi(u) - d^2| / d^2`` over probe nodes, per recorded time.

    Nodes where ``u`` underflows to zero are excluded and counted.
    """
    if not hasattr(transform, "cumulative_"):
        transform.fit()
    d = field_.grid.distance
    probe = (d >= band[0]) & (d <= band[1]) & (field_.grid.mask == pde.INTERIOR)
    if not np.any(probe):
        raise ValueError("no grid nodes in the probe band")
    rows = []
    for t, u in zip(field_.times, field_.values):
        vals = u[probe]
        ok = vals > 0
        dd = d[probe][ok]
        err = np.abs(-4.0 * t * transform.transform(vals[ok]) - dd * dd) / (dd * dd)
        rows.append((float(t), float(err.max()) if err.size else math.nan, int(np.sum(~ok))))
    return rows


def verify_varadhan(field_, transform, dom, probe_band, *, tolerance=0.10):
    """Relative error of ``-4 t Phi(u)`` against ``d^2`` on a distance band.

    Passes when the error decreases along ``t -> 0`` and the value at the
    smallest ``t`` is within ``tolerance``.
    """
    if not isinstance(transform, PhiTransform):
        raise TypeError("transform must be a PhiTransform")
    lo, hi = probe_band
    if lo <= 3.0 * max(field_.grid.h):
        raise ValueError("probe band must start beyond 3h from the boundary")
    if field_.grid.domain is not dom:
        raise ValueError("field was computed on a different domain")
    rows = _descending(varadhan_error_series(field_, transform, probe_band))
    series = [(t, e) for t, e, _ in rows]
    errs = [e for _, e in series]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    final = errs[-1]
    return VerificationReport(
        target="varadhan", predicted=0.0, measured_series=series, extrapolated=final,
        relative_error=final, passed=bool(decreasing and final <= tolerance), tolerance=tolerance,
        details={"decreasing": decreasing, "underflow_nodes": [n for _, _, n in rows],
                 "band": [lo, hi]},
    )


# ---------------------------------------------------------------------------
# heat content over a touching ball

def ball_weights(grid, ball, sub=16):
    """Quadrature weights of ``B_R(x0)`` on the node cells.

    Cells fully inside get ``h^N``; cells cut by the sphere get the fraction
    of an ``sub^N`` sub-sampling inside.  Raises if the ball leaves the window.
    """
    lo = np.asarray(grid.origin)
    hi = lo + np.asarray(grid.extent)
    if np.any(ball.center - ball.radius < lo) or np.any(ball.center + ball.radius > hi):
        raise geo.GeometryError("quadrature ball exits the grid window")
    h = np.asarray(grid.h)
    pts = grid.points()
    r = np.linalg.norm(pts - ball.center, axis=-1)
    half_diag = 0.5 * float(np.linalg.norm(h))
    w = np.where(r <= ball.radius - half_diag, 1.0, 0.0)
    cut = np.abs(r - ball.radius) < half_diag
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    grids = np.stack(np.meshgrid(*([offs] * grid.dimension), indexing="ij"), axis=-1).reshape(-1, grid.dimension)
    cp = pts[cut]
    sample = cp[:, None, :] + grids[None] * h
    frac = np.mean(np.linalg.norm(sample - ball.center, axis=-1) < ball.radius, axis=1)
    w[cut] = frac
    return w * float(np.prod(h))


def heat_content(field_, ball):
    """``t^{-(N+1)/4} * integral_{B_R} u`` for every recorded time."""
    w = ball_weights(field_.grid, ball)
    N = field_.grid.dimension
    return np.array([t ** (-(N + 1) / 4.0) * float(np.sum(w * u)) for t, u in zip(field_.times, field_.values)])


def richardson_sqrt(ts, qs):
    """Two-point extrapolation to ``t = 0`` assuming ``Q = Q0 + a sqrt(t)``."""
    (t1, q1), (t2, q2) = (ts[-2], qs[-2]), (ts[-1], qs[-1])
    r1, r2 = math.sqrt(t1), math.sqrt(t2)
    return (q2 * r1 - q1 * r2) / (r1 - r2)


def verify_curvature_asymptotics(nl, dom, ball, problem, t_series, *, grid, closure="ghost",
                                 ratio=1.05, dt0=None, tolerance=0.10, divergence_factor=10.0,
                                 constant=None, field_=None):
    """Heat content ``Q(t)`` against ``c(phi, N) prod (1/R - kappa_j)^(-1/2)``.

    Non-degenerate balls: Richardson extrapolation in ``sqrt(t)`` must be within
    ``tolerance``.  If some ``kappa_j = 1/R`` the prediction is infinite and the
    check passes when ``Q`` increases along ``t -> 0`` and its last value
    exceeds ``divergence_factor`` times the prediction with ``kappa`` replaced
    by ``kappa - 1/(10 R)``.
    """
    ts = np.sort(np.asarray(t_series, dtype=float))[::-1]
    N = dom.dimension
    kind = ss.HALF_LINE if problem == pde.IBVP else ss.WHOLE_LINE
    if constant is None:
        constant = ss.asymptotic_constant(nl, N, kind)
    if field_ is None:
        field_ = pde.solve(nl, dom, grid, problem, ts[::-1], closure=closure, ratio=ratio, dt0=dt0)
    q = heat_content(field_, ball)
    order = np.argsort(-field_.times)
    t_desc, q_desc = field_.times[order], q[order]
    series = list(zip(t_desc.tolist(), q_desc.tolist()))
    details = {"constant": constant, "curvatures": ball.curvatures.tolist(), "radius": ball.radius,
               "problem": problem}
    if ball.degenerate:
        shifted = constant * ball.curvature_factor(ball.curvatures - 1.0 / (10.0 * ball.radius))
        threshold = divergence_factor * shifted
        growing = bool(np.all(np.diff(q_desc) > 0))
        last = float(q_desc[-1])
        details.update({"threshold": threshold, "growing": growing})
        return VerificationReport(
            target="curvature_asymptotics", predicted=math.inf, measured_series=series,
            extrapolated=last, relative_error=last / threshold, passed=bool(growing and last > threshold),
            tolerance=divergence_factor, details=details,
        )
    predicted = constant * ball.curvature_factor()
    extrap = richardson_sqrt(t_desc, q_desc)
    rel = abs(extrap - predicted) / predicted
    if problem == pde.CAUCHY:
        details["interpretation"] = "whole-line profile moment taken over xi > 0"
    return VerificationReport(
        target="curvature_asymptotics", predicted=predicted, measured_series=series,
        extrapolated=extrap, relative_error=rel, passed=bool(rel <= tolerance), tolerance=tolerance,
        details=details,
    )


# ---------------------------------------------------------------------------
# level-set measure

def verify_asympvol(dom, ball, s_factors=(1e-2, 1e-3, 1e-4), *, tolerance=0.01, seed=0, **kw):
    """Scaled level-set measure ``s^{-(N-1)/2} H^{N-1}(Gamma_s cap B_R)`` along ``s -> 0``.

    Deterministic methods pass within ``tolerance``; the Monte-Carlo method
    passes within ``max(tolerance, 3 standard errors)``.
    """
    m = dom.dimension - 1
    predicted = geo.scaled_measure_limit(ball)
    series, ses, method = [], [], None
    for fac in sorted(s_factors, reverse=True):
        s = fac * ball.radius
        est = geo.level_set_measure(dom, s, ball, seed=seed, **kw)
        scale = s ** (-m / 2)
        series.append((s, est.value * scale))
        ses.append(est.std_error * scale)
        method = est.method
    final = series[-1][1]
    rel = abs(final - predicted) / predicted
    tol = tolerance
    if method == "monte_carlo":
        tol = max(tolerance, 3.0 * ses[-1] / predicted)
    errs = [abs(v - predicted) for _, v in series]
    return VerificationReport(
        target="asympvol", predicted=predicted, measured_series=series, extrapolated=final,
        relative_error=rel, passed=bool(rel <= tol), tolerance=tol,
        details={"method": method, "std_errors": ses, "errors": errs, "seed": seed},
    )


# ---------------------------------------------------------------------------
# barrier sandwich

def similarity_field(profile, dom, grid, times, problem=pde.IBVP):
    """Field tabulating ``f(d(x)/sqrt(t))`` (the one-dimensional similarity solution)."""
    if grid.domain is not dom:
        grid = grid.with_domain(dom)
    d = grid.distance
    vals = []
    for t in times:
        xi = d / math.sqrt(t)
        if problem == pde.IBVP:
            v = np.where(d > 0, profile(np.maximum(xi, 0.0)), 1.0)
        else:
            v = profile(xi)
        vals.append(v)
    init = np.where(d > 0, 0.0, 1.0)
    return pde.Field(grid, np.asarray(times, dtype=float), np.asarray(vals), problem, init,
                     {"source": "similarity"})


def _sandwich_margins(field_, pair, region, times):
    d = field_.grid.distance
    probe = (d >= region[0]) & (d <= region[1])
    if pair.kind == ss.HALF_LINE:
        probe &= field_.grid.mask == pde.INTERIOR
    rows = []
    for t in times:
        k = int(np.argmin(np.abs(field_.times - t)))
        u = field_.values[k][probe]
        xi = d[probe] / math.sqrt(field_.times[k])
        lm, lp = pair.f_minus.log_value(xi), pair.f_plus.log_value(xi)
        with np.errstate(divide="ignore"):
            lu = np.log(u)
        # strict ordering in log space; -inf when u underflows
        low = lu - lm
        up = lp - lu
        margin = float(np.min(np.minimum(low, up))) if u.size else math.inf
        viol = int(np.sum(~((low > 0) & (up > 0))))
        rows.append((float(field_.times[k]), margin, viol))
    return rows


def barrier_sandwich_check(field_, pair, dom, region, t_interval):
    """``f_-(d/sqrt t) < u < f_+(d/sqrt t)`` on the probe region and time window.

    The margin is measured in log space so the far tail counts; the report
    passes when no probe node violates the strict ordering.
    """
    t_lo, t_hi = t_interval
    times = [t for t in field_.times if t_lo <= t <= t_hi]
    if not times:
        raise ValueError("no recorded times in the window")
    if pair.kind == ss.HALF_LINE and region[0] < pair.eta * math.sqrt(max(times)) * (1 - 1e-12):
        raise ValueError("region must start at eta * sqrt(t_max) or beyond")
    if field_.grid.domain is not dom:
        raise ValueError("field was computed on a different domain")
    rows = _descending(_sandwich_margins(field_, pair, region, times))
    worst = min(m for _, m, _ in rows)
    violations = sum(v for _, _, v in rows)
    return VerificationReport(
        target="barrier_sandwich", predicted=0.0, measured_series=[(t, m) for t, m, _ in rows],
        extrapolated=worst, relative_error=max(-worst, 0.0), passed=violations == 0, tolerance=0.0,
        details={"violations": violations, "epsilon": pair.epsilon, "eta": pair.eta,
                 "region": list(region)},
    )


def scan_sandwich_tau(field_, pair, dom, region):
    """Largest recorded ``tau`` with the sandwich holding at every recorded ``t <= tau``.

    Returns ``(tau, rows)``; ``tau = 0`` if it fails at the smallest time.
    """
    rows = sorted(_sandwich_margins(field_, pair, region, list(field_.times)))
    tau = 0.0
    for t, _, viol in rows:
        if viol:
            break
        tau = t
    return tau, rows


# ---------------------------------------------------------------------------
# stationary level surfaces

def stationarity_score(field_, dom, R, *, x_range=None, samples=201, tolerance=1e-3):
    """Spread ``max - min`` of ``u`` along ``Gamma = {d = R}``, worst over recorded times.

    ``Gamma`` is the graph of the sup-convolution of the boundary graph with
    radius ``R``; ``u`` is interpolated bilinearly.  The report passes when the
    score is within ``tolerance`` (the level surface looks stationary).
    """
    if dom.kind != geo.GRAPH_DOMAIN or dom.dimension != 2:
        raise ValueError("stationarity score needs a two-dimensional graph domain")
    R = check_positive(R, "R")
    g = field_.grid
    if x_range is None:
        x_range = (g.origin[0], g.origin[0] + g.extent[0])
    x = np.linspace(x_range[0], x_range[1], samples)
    y = geo.sup_convolution(dom.graph, R, x)
    if y.min() < g.origin[1] or y.max() > g.origin[1] + g.extent[1] or \
            x_range[0] < g.origin[0] or x_range[1] > g.origin[0] + g.extent[0]:
        raise geo.GeometryError("Gamma exits the grid window")
    pts = np.column_stack([x, y])
    spread = []
    for k, t in enumerate(field_.times):
        u = field_.interpolate(k, pts)
        spread.append((float(t), float(u.max() - u.min())))
    series = _descending(spread)
    score = max(v for _, v in series)
    return VerificationReport(
        target="stationarity", predicted=0.0, measured_series=series, extrapolated=score,
        relative_error=score, passed=bool(score <= tolerance), tolerance=tolerance,
        details={"R": R, "samples": samples, "x_range": list(x_range)},
    )


def verify_ordering(lower, upper, slack=1e-8):
    """Wrap :func:`pde.ordering_check` as a report (``lower <= upper + slack``)."""
    rep = pde.ordering_check(lower, upper, slack)
    series = _descending(list(zip(lower.times.tolist(), rep.per_time)))
    return VerificationReport(
        target="ordering", predicted=0.0, measured_series=series, extrapolated=rep.max_violation,
        relative_error=rep.max_violation, passed=rep.passed, tolerance=slack,
    )

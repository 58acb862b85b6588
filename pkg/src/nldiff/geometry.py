"""Domains, signed distance, curvatures and level-set measures.

Domains are open sets ``Omega`` in ``R^N``.  Graph domains have the form
``{x_N > f(x')}`` with ``x' = (x_1, ..., x_{N-1})``; the graph function carries
its own gradient and Hessian.  Distances are positive inside ``Omega``.
Curvatures are taken with respect to the inward normal, so a ball of radius
``R`` touching the boundary from inside satisfies ``kappa_j <= 1/R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.special import betainc
from skimage import measure

from ._validation import check_points, check_positive

__all__ = [
    "GraphFunction",
    "QuadraticGraph",
    "AffineGraph",
    "SinusoidGraph",
    "CallableGraph",
    "DomainGeometry",
    "TouchingBall",
    "LevelSetEstimate",
    "MonteCarloError",
    "GeometryError",
    "signed_distance",
    "principal_curvatures",
    "level_set_measure",
    "scaled_measure_limit",
    "sup_convolution",
    "inf_convolution",
    "unit_ball_volume",
    "sphere_area",
    "contour_polylines",
]

HALF_SPACE = "half_space"
BALL_INTERIOR = "ball_interior"
BALL_EXTERIOR = "ball_exterior"
GRAPH_DOMAIN = "graph_domain"


class GeometryError(ValueError):
    """Invalid geometric configuration (point off the boundary, window too small, ...)."""


class MonteCarloError(RuntimeError):
    """Sample cap reached before the target standard error; carries the estimate."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


def unit_ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def sphere_area(n):
    """Area of the unit sphere in ``R^n``."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


# ---------------------------------------------------------------------------
# graph functions

class GraphFunction:
    """Twice differentiable ``f: R^{m} -> R`` evaluated on arrays of shape (..., m)."""

    dim = 1

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True)
class QuadraticGraph(GraphFunction):
    """``f(x') = sum_j x_j^2 / (2 rho_j)``; ``rho_j = inf`` gives a flat direction."""

    rho: tuple
    dim: int = field(init=False)

    def __post_init__(self):
        rho = tuple(float(r) for r in np.atleast_1d(self.rho))
        if any(r <= 0 for r in rho):
            raise ValueError("rho must be positive (use inf for flat directions)")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "dim", len(rho))

    @classmethod
    def isotropic(cls, rho, dim=1):
        return cls((rho,) * dim)

    @property
    def _k(self):
        return np.array([0.0 if math.isinf(r) else 1.0 / r for r in self.rho])

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(self._k * x * x, axis=-1)

    def grad(self, x):
        return self._k * np.asarray(x, dtype=float)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.diag(self._k), x.shape + (self.dim,)).copy()


@dataclass(frozen=True)
class AffineGraph(GraphFunction):
    """``f(x') = a . x' + b``."""

    a: tuple
    b: float = 0.0
    dim: int = field(init=False)

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "dim", len(a))

    def value(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.a) + self.b

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.a), x.shape).copy()

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dim,))


@dataclass(frozen=True)
class SinusoidGraph(GraphFunction):
    """``f(x') = amplitude * sin(frequency * x_axis)``."""

    amplitude: float
    frequency: float = 1.0
    dim: int = 1
    axis: int = 0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.sin(self.frequency * x[..., self.axis])

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[..., self.axis] = self.amplitude * self.frequency * np.cos(self.frequency * x[..., self.axis])
        return g

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        h = np.zeros(x.shape + (self.dim,))
        k = self.frequency
        h[..., self.axis, self.axis] = -self.amplitude * k * k * np.sin(k * x[..., self.axis])
        return h


class CallableGraph(GraphFunction):
    """Wrap user callables; each must accept arrays of shape (..., dim)."""

    def __init__(self, value, grad, hess, dim=1):
        self._value, self._grad, self._hess, self.dim = value, grad, hess, dim

    def value(self, x):
        return self._value(np.asarray(x, dtype=float))

    def grad(self, x):
        return self._grad(np.asarray(x, dtype=float))

    def hess(self, x):
        return self._hess(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# domains

@dataclass(frozen=True)
class DomainGeometry:
    """Domain description.

    ``half_space``: ``{x . normal > offset}`` with unit inward ``normal``.
    ``ball_interior``/``ball_exterior``: inside/outside ``B_radius(center)``.
    ``graph_domain``: ``{x_N > graph(x')}``.
    """

    kind: str
    params: dict
    dimension: int

    def __post_init__(self):
        if self.kind not in (HALF_SPACE, BALL_INTERIOR, BALL_EXTERIOR, GRAPH_DOMAIN):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dimension < 1 or (self.kind == GRAPH_DOMAIN and self.dimension < 2):
            raise ValueError("dimension too small for this domain kind")

    @classmethod
    def half_space(cls, normal, offset=0.0):
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls(HALF_SPACE, {"normal": n, "offset": float(offset)}, n.size)

    @classmethod
    def ball_interior(cls, center, radius):
        c = np.asarray(center, dtype=float)
        return cls(BALL_INTERIOR, {"center": c, "radius": check_positive(radius, "radius")}, c.size)

    @classmethod
    def ball_exterior(cls, center, radius):
        c = np.asarray(center, dtype=float)
        return cls(BALL_EXTERIOR, {"center": c, "radius": check_positive(radius, "radius")}, c.size)

    @classmethod
    def graph_domain(cls, graph, dimension=None):
        dimension = graph.dim + 1 if dimension is None else dimension
        if graph.dim != dimension - 1:
            raise ValueError("graph dimension must be N - 1")
        return cls(GRAPH_DOMAIN, {"graph": graph}, dimension)

    @property
    def graph(self):
        return self.params.get("graph")

    def signed_distance(self, x):
        return signed_distance(self, x)

    def contains(self, x):
        return signed_distance(self, x) > 0

    def boundary_point(self, xprime):
        """Point ``(x', f(x'))`` of a graph boundary."""
        xprime = np.atleast_1d(np.asarray(xprime, dtype=float))
        return np.append(xprime, self.graph.value(xprime))

    def inward_normal(self, y):
        y = check_points(y, self.dimension, "y")
        if self.kind == HALF_SPACE:
            return np.broadcast_to(self.params["normal"], y.shape).copy()
        if self.kind in (BALL_INTERIOR, BALL_EXTERIOR):
            r = y - self.params["center"]
            r = r / np.linalg.norm(r, axis=-1, keepdims=True)
            return -r if self.kind == BALL_INTERIOR else r
        g = self.graph.grad(y[..., :-1])
        n = np.concatenate([-g, np.ones(g.shape[:-1] + (1,))], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# signed distance

def _graph_foot(graph, xp, xn, iters=60):
    """Foot-point parameters ``y'`` minimizing ``|x' - y'|^2 + (x_N - f(y'))^2``.

    The vertical distance ``|x_N - f(x')|`` bounds the true distance, so the
    foot point lies in the ball of that radius around ``x'``; a coarse scan of
    that ball seeds a Newton iteration on the stationarity condition.
    """
    m = graph.dim
    z = np.abs(xn - graph.value(xp))
    if m == 1:
        return _graph_foot_1d(graph, xp, xn, z, iters)
    ax = np.linspace(-1.0, 1.0, 17)
    gx = np.stack(np.meshgrid(*([ax] * m), indexing="ij"), axis=-1).reshape(-1, m)
    offs = gx[np.sum(gx * gx, axis=1) <= 1.0]
    cand = xp[:, None, :] + z[:, None, None] * offs[None, :, :]
    dist2 = np.sum((cand - xp[:, None, :]) ** 2, axis=-1) + (xn[:, None] - graph.value(cand)) ** 2
    best = np.argmin(dist2, axis=1)
    y = cand[np.arange(xp.shape[0]), best]
    step_scale = np.maximum(z, 1e-300) * 2.0 / (len(offs) ** (1.0 / m))
    eye = np.eye(m)
    for _ in range(iters):
        fv, g, H = graph.value(y), graph.grad(y), graph.hess(y)
        r = fv - xn
        G = (y - xp) + r[:, None] * g
        J = eye + g[:, :, None] * g[:, None, :] + r[:, None, None] * H
        try:
            dy = np.linalg.solve(J, G[..., None])[..., 0]
        except np.linalg.LinAlgError:
            dy = G
        # keep Newton local to the coarse cell; fall back to a gradient step if J is indefinite
        bad = ~np.all(np.isfinite(dy), axis=1) | (np.sum(dy * G, axis=1) < 0)
        dy[bad] = G[bad]
        norm = np.linalg.norm(dy, axis=1)
        cap = np.minimum(1.0, step_scale / np.maximum(norm, 1e-300))
        dy *= cap[:, None]
        y = y - dy
        if np.all(norm <= 1e-14 * (1.0 + np.abs(y).max(axis=1))):
            break
    return y


def _graph_foot_1d(graph, xp, xn, z, iters):
    x = xp[:, 0]
    offs = np.linspace(-1.0, 1.0, 33)
    cand = x[:, None] + z[:, None] * offs
    dist2 = (cand - x[:, None]) ** 2 + (xn[:, None] - graph.value(cand[..., None])) ** 2
    y = cand[np.arange(x.size), np.argmin(dist2, axis=1)]
    cap = np.maximum(z, 1e-300) * (offs[1] - offs[0]) * 2.0
    for _ in range(iters):
        yy = y[:, None]
        fv, g, H = graph.value(yy), graph.grad(yy)[:, 0], graph.hess(yy)[:, 0, 0]
        r = fv - xn
        G = (y - x) + r * g
        J = 1.0 + g * g + r * H
        dy = np.where(J > 0, G / np.where(J > 0, J, 1.0), G)
        dy = np.clip(dy, -cap, cap)
        y = y - dy
        if np.all(np.abs(dy) <= 1e-14 * (1.0 + np.abs(y))):
            break
    return y[:, None]


def signed_distance(dom, x, *, chunk=None):
    """Signed distance to the boundary, positive inside ``Omega``."""
    x = check_points(x, dom.dimension)
    shape = x.shape[:-1]
    p = dom.params
    if dom.kind == HALF_SPACE:
        return x @ p["normal"] - p["offset"]
    if dom.kind in (BALL_INTERIOR, BALL_EXTERIOR):
        r = np.linalg.norm(x - p["center"], axis=-1)
        return p["radius"] - r if dom.kind == BALL_INTERIOR else r - p["radius"]
    graph = p["graph"]
    chunk = chunk or (262144 if graph.dim == 1 else 16384)
    flat = x.reshape(-1, dom.dimension)
    out = np.empty(flat.shape[0])
    for i in range(0, flat.shape[0], chunk):
        xp, xn = flat[i:i + chunk, :-1], flat[i:i + chunk, -1]
        y = _graph_foot(graph, xp, xn)
        dp = xp - y
        # hypot keeps tiny distances from underflowing to zero
        planar = np.abs(dp[:, 0]) if graph.dim == 1 else np.linalg.norm(dp, axis=1)
        dist = np.hypot(planar, xn - graph.value(y))
        # never worse than the vertical distance
        dist = np.minimum(dist, np.abs(xn - graph.value(xp)))
        out[i:i + chunk] = np.where(xn > graph.value(xp), dist, -dist)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# curvatures and touching balls

def _check_on_boundary(dom, y, tol=1e-9):
    if abs(float(signed_distance(dom, y))) > tol:
        raise GeometryError("point is not on the boundary")


def principal_curvatures(dom, y):
    """Principal curvatures at boundary point ``y`` w.r.t. the inward normal."""
    y = check_points(y, dom.dimension, "y")
    _check_on_boundary(dom, y)
    m = dom.dimension - 1
    if dom.kind == HALF_SPACE:
        return np.zeros(m)
    if dom.kind == BALL_INTERIOR:
        return np.full(m, 1.0 / dom.params["radius"])
    if dom.kind == BALL_EXTERIOR:
        return np.full(m, -1.0 / dom.params["radius"])
    graph = dom.graph
    yp = y[:-1]
    g = graph.grad(yp)
    H = graph.hess(yp)
    w = math.sqrt(1.0 + float(g @ g))
    # shape operator of a graph: Hess f / W relative to the metric I + grad f grad f^T
    return np.sort(eigh(H / w, np.eye(m) + np.outer(g, g), eigvals_only=True))


@dataclass(frozen=True)
class TouchingBall:
    """Open ball inside ``Omega`` whose closure meets the boundary at ``contact_point``."""

    center: np.ndarray
    radius: float
    contact_point: np.ndarray
    curvatures: np.ndarray

    @classmethod
    def at(cls, dom, contact_point, radius, tol=1e-9):
        """Ball of radius ``R`` touching at ``contact_point`` from inside.

        Raises if the ball is not inside ``Omega`` or the curvature
        convention check ``prod(1/R - kappa_j) >= 0`` fails.
        """
        y0 = check_points(contact_point, dom.dimension, "contact_point")
        radius = check_positive(radius, "radius")
        kappa = principal_curvatures(dom, y0)
        center = y0 + radius * dom.inward_normal(y0)
        ball = cls(center=center, radius=radius, contact_point=y0, curvatures=kappa)
        d = float(signed_distance(dom, center))
        if abs(d - radius) > tol:
            raise GeometryError(f"ball is not interior: distance of center {d!r} != radius {radius!r}")
        if abs(float(np.linalg.norm(center - y0)) - radius) > tol:
            raise GeometryError("contact point is not on the ball boundary")
        if np.any(kappa > 1.0 / radius + tol):
            raise GeometryError("curvature exceeds 1/R at the contact point")
        if np.prod(1.0 / radius - kappa) < -tol:
            raise GeometryError("curvature sign convention violated")
        return ball

    @property
    def degenerate(self):
        return bool(np.any(self.curvatures >= 1.0 / self.radius - 1e-9))

    def curvature_factor(self, kappa=None):
        """``prod_j (1/R - kappa_j)^(-1/2)``; ``inf`` in the degenerate case."""
        kappa = self.curvatures if kappa is None else np.asarray(kappa, dtype=float)
        gap = 1.0 / self.radius - kappa
        if np.any(gap <= 0):
            return math.inf
        return float(np.prod(gap ** -0.5))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) < self.radius


def scaled_measure_limit(ball):
    """Predicted ``lim s^{-(N-1)/2} H^{N-1}(Gamma_s cap B_R)``."""
    m = ball.curvatures.size
    return 2.0 ** (m / 2) * unit_ball_volume(m) * ball.curvature_factor()


# ---------------------------------------------------------------------------
# level-set measure

@dataclass(frozen=True)
class LevelSetEstimate:
    value: float
    std_error: float
    method: str
    samples: int = 0

    def __float__(self):
        return self.value


def _cap_area(a, center_dist, R, n):
    """Area of ``{|p| = a} cap B_R(x0)`` in ``R^n`` with ``|x0| = center_dist``."""
    full = sphere_area(n) * a ** (n - 1)
    if center_dist == 0.0:
        return full if a < R else 0.0
    cos0 = (a * a + center_dist ** 2 - R * R) / (2.0 * a * center_dist)
    if cos0 >= 1.0:
        return 0.0
    if cos0 <= -1.0:
        return full
    s2 = 1.0 - cos0 * cos0
    half = 0.5 * betainc(0.5 * (n - 1), 0.5, s2)
    frac = half if cos0 >= 0 else 1.0 - half
    return full * frac


def contour_polylines(values, level, origin, spacing):
    """Marching-squares polylines of ``values == level`` in physical coordinates."""
    out = []
    for c in measure.find_contours(values, level):
        out.append(np.asarray(origin) + c * np.asarray(spacing))
    return out


def _clipped_length(polys, center, R):
    """Length of polylines inside the open disk ``B_R(center)`` (exact per segment)."""
    total = 0.0
    for p in polys:
        a, b = p[:-1] - center, p[1:] - center
        d = b - a
        A = np.sum(d * d, axis=1)
        B = 2.0 * np.sum(a * d, axis=1)
        C = np.sum(a * a, axis=1) - R * R
        disc = B * B - 4.0 * A * C
        ok = (disc > 0) & (A > 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        A_safe = np.where(A > 0, A, 1.0)
        t0 = np.clip((-B - sq) / (2.0 * A_safe), 0.0, 1.0)
        t1 = np.clip((-B + sq) / (2.0 * A_safe), 0.0, 1.0)
        frac = np.where(ok, t1 - t0, 0.0)
        total += float(np.sum(frac * np.sqrt(A)))
    return total


def _contour_measure(dom, s, ball, resolution):
    R, x0 = ball.radius, ball.center
    # coarse pass over the bounding box of the ball locates the relevant pieces
    n0 = 257
    xs = np.linspace(x0[0] - R, x0[0] + R, n0)
    ys = np.linspace(x0[1] - R, x0[1] + R, n0)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    d = signed_distance(dom, np.stack([X, Y], axis=-1))
    h0 = xs[1] - xs[0]
    pts = [p for p in contour_polylines(d, s, (xs[0], ys[0]), (h0, h0))]
    pts = [p[np.linalg.norm(p - x0, axis=1) < R + 2 * h0] for p in pts]
    pts = [p for p in pts if len(p)]
    if not pts:
        return 0.0
    allp = np.concatenate(pts)
    lo = np.maximum(allp.min(axis=0) - 2 * h0, x0 - R)
    hi = np.minimum(allp.max(axis=0) + 2 * h0, x0 + R)
    xs = np.linspace(lo[0], hi[0], resolution)
    ys = np.linspace(lo[1], hi[1], resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    d = signed_distance(dom, np.stack([X, Y], axis=-1))
    polys = contour_polylines(d, s, (xs[0], ys[0]), (xs[1] - xs[0], ys[1] - ys[0]))
    return _clipped_length(polys, x0, R)


def _philox(seed, task):
    return np.random.Generator(np.random.Philox(key=np.array([seed, task], dtype=np.uint64)))


def _mc_measure(dom, s, ball, rse, max_samples, seed, batch):
    """Shell estimate ``vol{x in B_R : |d(x) - s| < delta} / (2 delta)``, ``delta = s/100``.

    Samples live in a sheared cylinder ``x = (x', f(x') + z)`` (unit Jacobian)
    over a disk of radius ``r`` around the ball's axis; ``r`` is doubled if hits
    reach its rim.
    """
    if dom.kind != GRAPH_DOMAIN:
        raise GeometryError("Monte-Carlo shell method needs a graph domain")
    graph, R, x0 = dom.graph, ball.radius, ball.center
    m = dom.dimension - 1
    delta = s / 100.0
    kmax = float(np.max(ball.curvatures))
    gap = 1.0 - R * kmax
    r = R if gap <= 1e-6 else min(R, 1.5 * math.sqrt(2.0 * R * (s + delta) / gap))
    c = x0[:-1]
    while True:
        probe = c + r * _unit_disk(np.random.default_rng(0), 4096, m)
        slope = float(np.max(np.linalg.norm(graph.grad(probe), axis=1)))
        zlo = s - delta
        zhi = (s + delta) * math.sqrt(1.0 + slope * slope) * 1.01 + 1e-3 * delta
        box = unit_ball_volume(m) * r ** m * (zhi - zlo)
        hits = n = 0
        rim = False
        task = 0
        while True:
            rng = _philox(seed, task)
            task += 1
            xp = c + r * _unit_disk(rng, batch, m)
            z = zlo + (zhi - zlo) * rng.random(batch)
            x = np.concatenate([xp, (graph.value(xp) + z)[:, None]], axis=1)
            inside = np.linalg.norm(x - x0, axis=1) < R
            if np.any(inside):
                d = signed_distance(dom, x[inside])
                sel = np.abs(d - s) < delta
                k = int(np.sum(sel))
                if k and np.any(np.linalg.norm(xp[inside][sel] - c, axis=1) > 0.95 * r) and r < R:
                    rim = True
                    break
                hits += k
            n += batch
            p = hits / n
            if hits > 0:
                se = math.sqrt(p * (1 - p) / n) / p
                if se <= rse:
                    est = box * p / (2 * delta)
                    return LevelSetEstimate(est, est * se, "monte_carlo", n)
            if n >= max_samples:
                est = box * p / (2 * delta)
                se = math.sqrt(p * (1 - p) / n) / p if hits else math.inf
                raise MonteCarloError(
                    f"relative standard error {se:.3e} above {rse} after {n} samples",
                    LevelSetEstimate(est, est * se, "monte_carlo", n),
                )
        if rim:
            r = min(R, 2 * r)


def _unit_disk(rng, n, m):
    """Uniform samples in the unit ball of ``R^m``."""
    if m == 1:
        return rng.uniform(-1.0, 1.0, (n, 1))
    g = rng.standard_normal((n, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random(n)[:, None] ** (1.0 / m)


def level_set_measure(dom, s, ball, *, resolution=2048, rse=0.003, max_samples=2 ** 24,
                      seed=0, batch=2 ** 16, method=None):
    """``H^{N-1}(Gamma_s cap B_R(x0))`` with ``Gamma_s = {d = s}``.

    Closed forms for half spaces and spheres; marching-squares arc length for
    two-dimensional graph domains; a Monte-Carlo shell estimate otherwise.
    Returns a :class:`LevelSetEstimate`.
    """
    s = check_positive(s, "s")
    if s >= ball.radius:
        raise ValueError("need 0 < s < R")
    N = dom.dimension
    p = dom.params
    if method is None:
        if dom.kind == GRAPH_DOMAIN:
            method = "contour" if N == 2 else "monte_carlo"
        else:
            method = "closed_form"
    if method == "closed_form":
        if dom.kind == HALF_SPACE:
            h = float(signed_distance(dom, ball.center)) - s
            r2 = ball.radius ** 2 - h * h
            val = unit_ball_volume(N - 1) * max(r2, 0.0) ** ((N - 1) / 2)
        elif dom.kind in (BALL_INTERIOR, BALL_EXTERIOR):
            a = p["radius"] - s if dom.kind == BALL_INTERIOR else p["radius"] + s
            D = float(np.linalg.norm(ball.center - p["center"]))
            val = _cap_area(a, D, ball.radius, N)
        else:
            raise GeometryError("no closed form for graph domains")
        return LevelSetEstimate(val, 0.0, "closed_form")
    if method == "contour":
        if N != 2:
            raise GeometryError("contour method is two-dimensional")
        return LevelSetEstimate(_contour_measure(dom, s, ball, resolution), 0.0, "contour")
    if method == "monte_carlo":
        return _mc_measure(dom, s, ball, rse, max_samples, seed, batch)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# sup- and inf-convolutions

def _as_graph_callable(f):
    return f.value if isinstance(f, GraphFunction) else f


def _zoom_extremum(fun, R, xp, sign, levels=8, n=129):
    """``sign * max_{|y - x'| <= R} sign * fun(x', y)`` by successive grid zooms."""
    xp = np.atleast_2d(np.asarray(xp, dtype=float))
    k, m = xp.shape
    if m == 1:
        base = np.linspace(-1.0, 1.0, n)[:, None]
    else:
        ax = np.linspace(-1.0, 1.0, 33)
        base = np.stack(np.meshgrid(*([ax] * m), indexing="ij"), axis=-1).reshape(-1, m)
    centre = np.zeros((k, m))
    width = np.full(k, float(R))
    best = np.full(k, -np.inf)
    for _ in range(levels):
        off = centre[:, None, :] + width[:, None, None] * base[None]
        rad = np.linalg.norm(off, axis=-1)
        # project points outside the disk onto the rim
        scale = np.where(rad > R, R / np.maximum(rad, 1e-300), 1.0)
        off = off * scale[..., None]
        vals = sign * fun(xp[:, None, :] + off, off)
        i = np.argmax(vals, axis=1)
        best = np.maximum(best, vals[np.arange(k), i])
        centre = off[np.arange(k), i]
        spacing = 2.0 / (base.shape[0] ** (1.0 / m) - 1)
        width = width * spacing * 2.0
    return sign * best


def _points(xp, f):
    """Reshape query points to (k, m); returns the points and the output shape."""
    m = f.dim if isinstance(f, GraphFunction) else 1
    xp = np.asarray(xp, dtype=float)
    if m == 1 and (xp.ndim == 0 or xp.shape[-1] != 1):
        return xp.reshape(-1, 1), xp.shape
    return xp.reshape(-1, xp.shape[-1]), xp.shape[:-1]


def _convolve(f, R, xp, sign):
    R = check_positive(R, "R")
    fv = _as_graph_callable(f)
    pts, shape = _points(xp, f)

    def fun(y, off):
        return fv(y) + sign * np.sqrt(np.maximum(R * R - np.sum(off * off, axis=-1), 0.0))

    out = _zoom_extremum(fun, R, pts, sign).reshape(shape)
    return float(out) if out.ndim == 0 else out


def sup_convolution(f, R, xp):
    """``g(x') = sup_{|x'-y'| <= R} f(y') + sqrt(R^2 - |x'-y'|^2)``.

    ``f`` is a :class:`GraphFunction` or a vectorized callable on (..., N-1)
    arrays.  Points may carry any leading shape; for ``N = 2`` a plain array of
    abscissae is accepted.
    """
    return _convolve(f, R, xp, +1.0)


def inf_convolution(g, R, xp):
    """``f(x') = inf_{|x'-y'| <= R} g(y') - sqrt(R^2 - |x'-y'|^2)``."""
    return _convolve(g, R, xp, -1.0)

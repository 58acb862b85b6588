"""Implicit finite-volume solver for ``u_t = Laplacian(phi(u))`` on 1D/2D grids.

The grid is vertex centred with a lumped mass; cells on the window edge are
halved, which gives a zero-flux condition there unless the edge is declared
Dirichlet.  Nodes are classified against a :class:`DomainGeometry`:

* interior: ``d > 0``;
* boundary: ``d <= 0`` with an interior neighbour (first layer outside);
* exterior: everything else.

For the boundary value problem boundary and exterior nodes hold the value 1.
With ``closure="ghost"`` an interior node next to the boundary uses the
distance fraction ``theta = d_i / (d_i - d_j)`` to place the boundary value at
the true crossing (symmetric, second order globally); ``closure="pinned"`` is
the plain first-order node pinning.

Each backward-Euler step is solved by Newton's method on ``U``.  With
``D = diag(phi'(U))`` the Newton system ``(M/dt + K D) dU = -r`` is rewritten
as ``(M D^{-1}/dt + K) y = -r``, ``dU = D^{-1} y``, which is symmetric
positive definite; it is solved directly in 1D and by AMG-preconditioned
conjugate gradients in 2D (plain Jacobi preconditioning when the
system is well conditioned, which is the common small-``dt`` case).
"""

from __future__ import annotations

import json
import math
import pathlib
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solveh_banded
import scipy.sparse.linalg as spla

from ._validation import check_increasing, check_positive
from .geometry import DomainGeometry, signed_distance

__all__ = [
    "Grid",
    "Field",
    "State",
    "DiffusionOperator",
    "OrderingReport",
    "NewtonError",
    "ResolutionError",
    "InvariantError",
    "IBVP",
    "CAUCHY",
    "INTERIOR",
    "BOUNDARY",
    "EXTERIOR",
    "initial_state",
    "step",
    "solve",
    "time_schedule",
    "ordering_check",
    "check_resolution",
]

IBVP = "ibvp"
CAUCHY = "cauchy"
INTERIOR, BOUNDARY, EXTERIOR = 1, 0, -1

NEWTON_TOL = 1e-12
# tighter than the 1e-10 requirement so linear problems finish in two Newton sweeps
LINEAR_RTOL = 1e-12
JACOBI_COND = 60.0
BOUND_SLACK = 1e-10


class ResolutionError(ValueError):
    """Grid too coarse for the earliest requested time."""


class NewtonError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


class InvariantError(AssertionError):
    """Post-step check failed: values left [0, 1]."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform node grid on ``[origin, origin + extent]``; optionally classified against a domain."""

    origin: tuple
    extent: tuple
    n: tuple
    domain: DomainGeometry | None = None
    h: tuple = field(init=False)
    mask: np.ndarray | None = field(init=False, repr=False)
    distance: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        origin = tuple(float(v) for v in np.atleast_1d(self.origin))
        extent = tuple(float(v) for v in np.atleast_1d(self.extent))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if not (len(origin) == len(extent) == len(n)) or len(n) not in (1, 2):
            raise ValueError("origin, extent and n must share dimension 1 or 2")
        if any(v < 3 for v in n) or any(e <= 0 for e in extent):
            raise ValueError("need at least 3 nodes and positive extent per axis")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", tuple(e / (k - 1) for e, k in zip(extent, n)))
        mask = dist = None
        if self.domain is not None:
            if self.domain.dimension != len(n):
                raise ValueError("domain and grid dimensions differ")
            dist = signed_distance(self.domain, self.points())
            mask = _classify(dist)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "distance", dist)

    @property
    def dimension(self):
        return len(self.n)

    @property
    def size(self):
        return int(np.prod(self.n))

    def axes(self):
        return [o + h * np.arange(k) for o, h, k in zip(self.origin, self.h, self.n)]

    def points(self):
        """Node coordinates, shape ``n + (dimension,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def with_domain(self, domain):
        return Grid(self.origin, self.extent, self.n, domain)

    def node_weights(self):
        """Lumped mass: ``prod(h)`` times 1/2 per window edge the node lies on."""
        w = np.ones(self.n)
        for ax in range(self.dimension):
            sl = [slice(None)] * self.dimension
            for end in (0, -1):
                sl[ax] = end
                w[tuple(sl)] *= 0.5
        return w * float(np.prod(self.h))

    def interpolator(self, values):
        return RegularGridInterpolator(self.axes(), values, method="linear", bounds_error=True)


def _classify(dist):
    interior = dist > 0
    near = np.zeros_like(interior)
    for ax in range(dist.ndim):
        near |= np.roll(interior, 1, axis=ax) & _not_wrapped(dist.shape, ax, 1)
        near |= np.roll(interior, -1, axis=ax) & _not_wrapped(dist.shape, ax, -1)
    mask = np.full(dist.shape, EXTERIOR, dtype=np.int8)
    mask[~interior & near] = BOUNDARY
    mask[interior] = INTERIOR
    return mask


def _not_wrapped(shape, ax, shift):
    ok = np.ones(shape, dtype=bool)
    sl = [slice(None)] * len(shape)
    sl[ax] = 0 if shift == 1 else -1
    ok[tuple(sl)] = False
    return ok


def check_resolution(nl, grid, t_min):
    """Resolution rule ``sqrt(delta1 t_min) >= 3 h``."""
    need = 3.0 * max(grid.h)
    have = math.sqrt(nl.delta1 * t_min)
    if have < need:
        raise ResolutionError(f"grid too coarse for t_min={t_min}: sqrt(delta1 t)={have:.3e} < 3h={need:.3e}")


# ---------------------------------------------------------------------------
# spatial operator

class DiffusionOperator:
    """Sparse pieces of the semi-discrete system for one grid/problem/closure.

    ``K`` is the symmetric positive semidefinite stiffness on free nodes,
    ``K_fixed`` the coupling from fixed to free nodes and ``mass`` the lumped
    mass on free nodes.
    """

    def __init__(self, grid, problem, closure="pinned", edges=None):
        if grid.mask is None:
            raise ValueError("grid has no domain classification")
        if problem not in (IBVP, CAUCHY):
            raise ValueError("problem must be 'ibvp' or 'cauchy'")
        if closure not in ("pinned", "ghost"):
            raise ValueError("closure must be 'pinned' or 'ghost'")
        if closure == "ghost" and problem != IBVP:
            raise ValueError("ghost closure applies to the boundary value problem only")
        dim = grid.dimension
        if edges is None:
            edges = "neumann" if problem == IBVP else "dirichlet"
        if isinstance(edges, str):
            edges = (edges,) * dim
        if len(edges) != dim or any(e not in ("neumann", "dirichlet") for e in edges):
            raise ValueError("edges must be 'neumann'/'dirichlet' per axis")
        self.grid, self.problem, self.closure, self.edges = grid, problem, closure, tuple(edges)

        shape = grid.n
        idx = np.arange(grid.size).reshape(shape)
        fixed = np.zeros(shape, dtype=bool)
        if problem == IBVP:
            fixed |= grid.mask != INTERIOR
        for ax, kind in enumerate(self.edges):
            if kind == "dirichlet":
                sl = [slice(None)] * dim
                for end in (0, -1):
                    sl[ax] = end
                    fixed[tuple(sl)] = True
        self.fixed = fixed
        self.free = ~fixed
        self.free_index = idx[self.free]

        # row i of edge (i, j) carries w_i, row j carries w_j; they differ only on
        # edges crossing the boundary under the ghost closure, where one end is
        # fixed and its row is discarded, so the free block stays symmetric
        rows, cols, vals = [], [], []
        for ax in range(dim):
            fw = np.ones(shape)
            for other in range(dim):
                if other == ax:
                    continue
                sl = [slice(None)] * dim
                for end in (0, -1):
                    sl[other] = end
                    fw[tuple(sl)] *= 0.5
            lo = [slice(None)] * dim
            hi = [slice(None)] * dim
            lo[ax], hi[ax] = slice(0, -1), slice(1, None)
            i, j = idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()
            w = fw[tuple(lo)].ravel() * float(np.prod(grid.h)) / grid.h[ax] ** 2
            w_i, w_j = w, w
            if closure == "ghost":
                d = grid.distance.ravel()
                w_i = w / _fraction(d[i], d[j])
                w_j = w / _fraction(d[j], d[i])
            rows += [i, i, j, j]
            cols += [i, j, j, i]
            vals += [w_i, -w_i, w_j, -w_j]
        A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(grid.size, grid.size),
        )
        fi = self.free.ravel()
        self.K = A[fi][:, fi].tocsr()
        self.K_fixed = A[fi][:, ~fi].tocsr()
        self.mass = grid.node_weights().ravel()[fi]

    def fixed_values(self, u0):
        """Values at fixed nodes: 1 for the boundary value problem, data otherwise."""
        vals = np.asarray(u0, dtype=float).ravel()[~self.free.ravel()].copy()
        if self.problem == IBVP:
            dom_fixed = (self.grid.mask != INTERIOR).ravel()[~self.free.ravel()]
            vals[dom_fixed] = 1.0
        return vals

    def linear_solver(self, dt, D, cache):
        """Solver for the Newton matrix ``K + diag(M / (D dt))``.

        1D: symmetric tridiagonal solve.  2D: conjugate gradients, Jacobi
        preconditioned while the scaled system is well conditioned and with a
        smoothed-aggregation preconditioner otherwise; the latter is rebuilt
        only when ``dt`` or ``phi'`` drift.
        """
        shift = self.mass / (D * dt)
        if self.grid.dimension == 1:
            # free nodes are ordered along the line, so the matrix is tridiagonal
            if not hasattr(self, "_bands"):
                self._bands = (self.K.diagonal(), self.K.diagonal(1))
            ab = np.zeros((2, shift.size))
            ab[0, 1:] = self._bands[1]
            ab[1] = self._bands[0] + shift
            return lambda b: solveh_banded(ab, b, check_finite=False)
        A = (self.K + sp.diags(shift)).tocsr()
        diag = A.diagonal()
        # condition estimate of the Jacobi-scaled matrix; small when dt is small
        cond = 1.0 + float(np.max((diag - shift) / shift)) * 2.0
        if cond <= JACOBI_COND:
            prec = sp.diags(1.0 / diag)
        else:
            old = cache.get("key")
            if old is None or not (0.5 < dt / old[0] < 2.0) or np.max(np.abs(D - old[1])) > 0.1 * D.min():
                ml = _amg_setup(A)
                cache["prec"] = ml.aspreconditioner(cycle="V")
                cache["key"] = (dt, D.copy())
            prec = cache["prec"]

        def solve(b):
            x, info = spla.cg(A, b, rtol=LINEAR_RTOL, atol=0.0, M=prec, maxiter=4000)
            if info != 0:
                raise NewtonError("inner conjugate-gradient solve did not converge",
                                  float(np.linalg.norm(b - A @ x)))
            return x

        return solve


def _amg_setup(A):
    """Smoothed-aggregation hierarchy, reproducible from run to run.

    pyamg seeds its spectral-radius estimates from the global numpy RNG; fix
    that seed locally and give the caller's state back afterwards.
    """
    saved = np.random.get_state()
    np.random.seed(0)
    try:
        return pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=500)
    finally:
        np.random.set_state(saved)


def _fraction(d_self, d_other):
    """Distance fraction to the boundary crossing on an edge; 1 if it does not cross."""
    cross = (d_self > 0) & (d_other <= 0)
    theta = d_self / np.where(cross, d_self - d_other, 1.0)
    return np.where(cross, np.clip(theta, 1e-3, 1.0), 1.0)


@dataclass(frozen=True, eq=False)
class State:
    """Solution snapshot ``u`` (full grid) at time ``t`` together with its operator."""

    t: float
    u: np.ndarray
    operator: DiffusionOperator
    newton_iterations: int = 0
    residual: float = 0.0

    @property
    def grid(self):
        return self.operator.grid


def initial_state(grid, problem, *, closure="pinned", edges=None):
    """Initial data: 0 inside and 1 on the boundary layer (IBVP), or the indicator of the complement (Cauchy)."""
    op = DiffusionOperator(grid, problem, closure, edges)
    if problem == IBVP:
        u = np.where(grid.mask == INTERIOR, 0.0, 1.0)
    else:
        u = np.where(grid.distance > 0, 0.0, 1.0)
    return State(0.0, u, op)


def step(nl, state, dt, *, max_iter=50, _cache=None):
    """One backward-Euler step of size ``dt`` from ``state``."""
    dt = check_positive(dt, "dt")
    op = state.operator
    free = op.free.ravel()
    uprev = state.u.ravel()[free]
    fixed_phi = nl.phi(op.fixed_values(state.u))
    g = -(op.K_fixed @ fixed_phi)
    M = op.mass
    U = uprev.copy()

    def residual(U):
        return M * (U - uprev) / dt + op.K @ nl.phi(U) - g

    r = residual(U)
    rnorm = float(np.max(np.abs(r))) if r.size else 0.0
    cache = _cache if _cache is not None else {}
    it = 0
    for it in range(1, max_iter + 1):
        D = nl.dphi(U)
        solve = op.linear_solver(dt, D, cache)
        y = solve(-r)
        dU = y / D
        lam = 1.0
        new = residual(U + dU)
        newnorm = float(np.max(np.abs(new)))
        while newnorm > rnorm and lam > 1e-3 and rnorm > 1e-14:
            lam *= 0.5
            new = residual(U + lam * dU)
            newnorm = float(np.max(np.abs(new)))
        U = U + lam * dU
        r, rnorm = new, newnorm
        if float(np.max(np.abs(lam * dU))) <= NEWTON_TOL:
            break
    else:
        raise NewtonError("Newton iteration did not converge", rnorm)

    if U.size and (U.min() < -BOUND_SLACK or U.max() > 1 + BOUND_SLACK):
        raise InvariantError(f"discrete maximum principle violated: range [{U.min()}, {U.max()}]")
    u = state.u.ravel().copy()
    u[~free] = op.fixed_values(state.u)
    u[free] = np.clip(U, 0.0, 1.0)
    return State(state.t + dt, u.reshape(state.u.shape), op, it, rnorm)


# ---------------------------------------------------------------------------
# time integration

def time_schedule(output_times, *, ratio=1.2, dt0=None, dt_max=None):
    """Step sizes ``dt = max(dt0, (ratio - 1) t)``, landing exactly on each output time."""
    out = check_increasing(output_times, "output_times")
    if out[0] <= 0:
        raise ValueError("output times must be positive")
    if ratio <= 1:
        raise ValueError("ratio must exceed 1")
    dt0 = out[0] / 200.0 if dt0 is None else check_positive(dt0, "dt0")
    t, k = 0.0, 0
    steps = []
    while k < out.size:
        dt = max(dt0, (ratio - 1.0) * t)
        if dt_max is not None:
            dt = min(dt, dt_max)
        rem = out[k] - t
        if rem < 2.0 * dt:
            # land on the output time in one or two equal steps
            parts = 1 if rem <= dt else 2
            steps += [rem / parts] * parts
            t = out[k]
            k += 1
        else:
            steps.append(dt)
            t += dt
    return np.asarray(steps)


@dataclass(frozen=True, eq=False)
class Field:
    """Recorded solution: ``values[k]`` is ``u`` on the full grid at ``times[k]``."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    problem: str
    initial: np.ndarray
    meta: dict = field(default_factory=dict)

    def at(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[k], t, rel_tol=1e-9):
            raise KeyError(f"time {t} not recorded")
        return self.values[k]

    def interpolate(self, k, points):
        """Multilinear interpolation of snapshot ``k`` at ``points`` (shape (m, dim))."""
        return self.grid.interpolator(self.values[k])(points)

    def export_csv(self, directory, prefix="field_t"):
        """One CSV per time with columns ``x[, y], u``; returns the file names."""
        directory = pathlib.Path(directory)
        pts = self.grid.points().reshape(-1, self.grid.dimension)
        cols = ["x", "y"][: self.grid.dimension] + ["u"]
        names = []
        for t, u in zip(self.times, self.values):
            name = directory / f"{prefix}{t:.6g}.csv"
            np.savetxt(name, np.column_stack([pts, u.ravel()]), delimiter=",", fmt="%.17g",
                       header=",".join(cols), comments="")
            names.append(name)
        return names

    def metadata_json(self):
        g = self.grid
        return json.dumps({
            "grid": {"origin": g.origin, "extent": g.extent, "n": g.n, "h": g.h},
            "problem": self.problem,
            "times": self.times.tolist(),
            **self.meta,
        }, indent=2)


def solve(nl, dom, grid, problem, output_times, *, closure="pinned", edges=None, ratio=1.2,
          dt0=None, dt_max=None, check=True):
    """Backward-Euler run recording ``u`` at ``output_times``.

    ``ratio`` and ``dt0`` control the geometric step schedule; accuracy near
    ``t = 0`` is governed by ``ratio - 1`` (relative step) and ``dt0 / t``.
    """
    if grid.domain is not dom:
        grid = grid.with_domain(dom)
    times = check_increasing(output_times, "output_times")
    if check:
        check_resolution(nl, grid, float(times[0]))
    state = initial_state(grid, problem, closure=closure, edges=edges)
    initial = state.u.copy()
    steps = time_schedule(times, ratio=ratio, dt0=dt0, dt_max=dt_max)
    values = []
    newton, residuals = [], []
    cache = {}
    k = 0
    for dt in steps:
        state = step(nl, state, dt, _cache=cache)
        newton.append(state.newton_iterations)
        residuals.append(state.residual)
        if k < times.size and math.isclose(state.t, times[k], rel_tol=1e-9, abs_tol=1e-15):
            values.append(state.u.copy())
            k += 1
    meta = {
        "closure": closure,
        "edges": list(state.operator.edges),
        "steps": int(steps.size),
        "dt_min": float(steps.min()),
        "dt_max": float(steps.max()),
        "ratio": ratio,
        "newton_iterations_max": int(max(newton)),
        "newton_residual_max": float(max(residuals)),
    }
    return Field(grid, times, np.asarray(values), problem, initial, meta)


# ---------------------------------------------------------------------------
# comparison

@dataclass(frozen=True)
class OrderingReport:
    max_violation: float
    slack: float
    per_time: tuple

    @property
    def passed(self):
        return self.max_violation <= self.slack


def ordering_check(u, v, slack=1e-8):
    """Check ``u <= v + slack`` at every node and recorded time."""
    if u.grid.n != v.grid.n or not np.allclose(u.grid.origin, v.grid.origin):
        raise ValueError("fields live on different grids")
    if u.times.shape != v.times.shape or not np.allclose(u.times, v.times):
        raise ValueError("fields have different recorded times")
    per = tuple(float(max(np.max(a - b), 0.0)) for a, b in zip(u.values, v.values))
    return OrderingReport(max(per) if per else 0.0, slack, per)

"""Self-similar profiles of ``u_t = (phi(u))_ss``.

A profile ``f`` satisfies ``(phi'(f) f')' + xi f' / 2 = 0``.  Setting
``w(s, t) = f(s / sqrt(t))`` gives a solution of the one-dimensional equation:

* half-line: ``f(0) = c`` and ``f(inf) = 0`` (boundary value ``c``, zero data);
* whole line: ``f(-inf) = c`` and ``f(inf) = 0`` (step initial data).

Shooting is done from the far field inward.  For large ``xi`` the profile is
tiny, ``phi'(f) = phi'(0) + O(f)``, and the exact tail is
``A * erfc(xi / (2 sqrt(phi'(0))))``.  Integrating from ``xi_max`` back to 0
is stable (the growing mode is the wanted one) and keeps relative accuracy in
the tail, which the logarithmic ratio ``-4 Phi(f) / xi**2`` needs.  The
amplitude ``log A`` is found by Newton iteration with a finite-difference
derivative; all trajectories of one iteration are integrated together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline
from scipy.special import erfc, erfcx, gamma
from sklearn.base import BaseEstimator

from ._validation import check_in_interval, check_is_fitted, check_positive
from .nonlinearity import Nonlinearity, PhiTransform, psi_nonlinearity

__all__ = [
    "Profile",
    "ScaledProfile",
    "BarrierPair",
    "SelfSimilarProfile",
    "solve_half_line",
    "solve_whole_line",
    "mass_identity_residual",
    "varadhan_ratio",
    "barrier_profiles",
    "asymptotic_constant",
    "unit_ball_volume",
    "default_xi_max",
    "tail_envelope",
    "matching_function",
    "similarity_residual",
    "ShootingError",
]

HALF_LINE = "half_line"
WHOLE_LINE = "whole_line"
_KINDS = (HALF_LINE, WHOLE_LINE)
_ALIASES = {"half": HALF_LINE, "half-line": HALF_LINE, "ibvp": HALF_LINE,
            "whole": WHOLE_LINE, "whole-line": WHOLE_LINE, "cauchy": WHOLE_LINE}

DEFAULT_RTOL = 1e-10
DEFAULT_GRID_STEP = 1e-3
FD_STEP = 1e-7


class ShootingError(RuntimeError):
    """Shooting iteration failed to converge or produced an invalid profile."""


def _kind(kind):
    kind = _ALIASES.get(kind, kind)
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    return kind


def unit_ball_volume(n):
    """Volume of the unit ball in ``R^n`` (``pi^(n/2) / Gamma(n/2 + 1)``)."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def tail_envelope(nl, c, xi):
    """Upper bound for a half-line profile of level ``c``.

    From the slope envelope, ``c delta1 / sqrt(pi delta2) <= -v'(0) <= c delta2 / sqrt(pi delta1)``,
    hence ``f(xi) <= c (delta2/delta1)^(3/2) erfc(xi / (2 sqrt(delta2)))``.
    """
    d1, d2 = nl.delta1, nl.delta2
    return c * (d2 / d1) ** 1.5 * erfc(np.asarray(xi, dtype=float) / (2.0 * math.sqrt(d2)))


def default_xi_max(nl, c, tail_tolerance):
    """``max(10, sqrt(4 delta2 |log(tol/c)|))``, enlarged until the envelope fits."""
    xi = max(10.0, math.sqrt(4.0 * nl.delta2 * abs(math.log(tail_tolerance / c))))
    while tail_envelope(nl, c, xi) > tail_tolerance:
        xi += 0.5
    return xi


@dataclass(frozen=True)
class Profile:
    """Tabulated self-similar profile.

    ``tail_amplitude`` and ``tail_diffusivity`` describe the analytic tail
    ``A erfc(xi / (2 sqrt(a)))`` used beyond the tabulated window; for
    whole-line profiles the ``left_*`` fields describe ``c - f`` as
    ``xi -> -inf``.
    """

    kind: str
    c: float
    xi_grid: np.ndarray
    f_values: np.ndarray
    fprime_values: np.ndarray
    v_prime_at_zero: float
    nonlinearity: Nonlinearity
    tail_tolerance: float
    tail_amplitude: float
    tail_diffusivity: float
    match_point: float | None = None
    left_amplitude: float | None = None
    left_diffusivity: float | None = None
    slope_mismatch: float | None = None
    _spline: CubicHermiteSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_spline", CubicHermiteSpline(self.xi_grid, self.f_values, self.fprime_values)
        )

    @property
    def xi_max(self):
        return float(self.xi_grid[-1])

    @property
    def xi_min(self):
        return float(self.xi_grid[0])

    def _right_tail(self, xi):
        z = xi / (2.0 * math.sqrt(self.tail_diffusivity))
        return self.tail_amplitude * erfc(z)

    def _left_tail(self, xi):
        z = -xi / (2.0 * math.sqrt(self.left_diffusivity))
        return self.c - self.left_amplitude * erfc(z)

    def __call__(self, xi):
        """Evaluate ``f`` (spline inside the window, analytic tails outside)."""
        xi = np.asarray(xi, dtype=float)
        out = self._spline(np.clip(xi, self.xi_min, self.xi_max))
        out = np.where(xi > self.xi_max, self._right_tail(xi), out)
        if self.kind == WHOLE_LINE:
            out = np.where(xi < self.xi_min, self._left_tail(xi), out)
        elif np.any(xi < 0):
            raise ValueError("half-line profile evaluated at negative xi")
        return out

    def log_value(self, xi):
        """``log f(xi)``; stays finite in the far tail where ``f`` underflows."""
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore"):
            inside = np.log(np.maximum(self(np.minimum(xi, self.xi_max)), 0.0))
        z = xi / (2.0 * math.sqrt(self.tail_diffusivity))
        tail = math.log(self.tail_amplitude) + np.log(erfcx(z)) - z * z
        return np.where(xi > self.xi_max, tail, inside)

    def derivative(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self._spline(np.clip(xi, self.xi_min, self.xi_max), 1)

    def to_rows(self):
        return np.column_stack([self.xi_grid, self.f_values])

    def summary(self):
        """JSON-ready verification record."""
        return {
            "kind": self.kind,
            "c": self.c,
            "v_prime_at_zero": self.v_prime_at_zero,
            "mass_residual": mass_identity_residual(self),
            "match_point": self.match_point,
        }


# ---------------------------------------------------------------------------
# shooting engine

def _tail_start(a0, amp, xi_max):
    z = xi_max / (2.0 * np.sqrt(a0))
    f = amp * erfc(z)
    p = -amp * np.sqrt(a0 / np.pi) * np.exp(-z * z)
    return f, p


def _integrate(groups, log_amp, xi_max, rtol, xi_eval=None):
    """Integrate a batch of tail-started trajectories from ``xi_max`` to 0.

    ``groups`` is a list of ``(nonlinearity, index_array)`` pairs.  Returns the
    solution object with states ``(f_1..f_m, p_1..p_m)`` where ``p = v'``.
    """
    m = log_amp.size
    a0 = np.empty(m)
    for nl, idx in groups:
        a0[idx] = float(nl.dphi(0.0))
    f0, p0 = _tail_start(a0, np.exp(log_amp), xi_max)

    if len(groups) == 1:
        dphi = groups[0][0].dphi

        def diffusivity(f):
            return dphi(f)
    else:
        def diffusivity(f):
            d = np.empty(m)
            for nl, idx in groups:
                d[idx] = nl.dphi(f[idx])
            return d

    def rhs(x, y):
        fp = y[m:] / diffusivity(y[:m])
        return np.concatenate([fp, -0.5 * x * fp])

    sol = integrate.solve_ivp(rhs, (xi_max, 0.0), np.concatenate([f0, p0]), method="DOP853",
                              rtol=rtol, atol=1e-300, t_eval=xi_eval)
    if not sol.success:
        raise ShootingError(sol.message)
    return sol


def _initial_log_amplitude(nl, levels):
    return np.log(levels) + 0.5 * math.log(nl.dphi(0.0) / np.mean(nl.dphi(levels)))


def _shoot_levels(nl, levels, xi_max, rtol, max_iter=40):
    """Tail amplitudes ``log A`` so that the half-line profiles hit ``levels``."""
    levels = np.asarray(levels, dtype=float)
    m = levels.size
    x = _initial_log_amplitude(nl, levels)
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    both = np.arange(2 * m)
    for _ in range(max_iter):
        sol = _integrate([(nl, both)], np.concatenate([x, x + FD_STEP]), xi_max, rtol)
        f0 = sol.y[: 2 * m, -1]
        if np.any(f0 <= 0):
            raise ShootingError("trajectory lost positivity")
        r = np.log(f0[:m]) - np.log(levels)
        jac = (np.log(f0[m:]) - np.log(f0[:m])) / FD_STEP
        lo = np.where(r < 0, np.maximum(lo, x), lo)
        hi = np.where(r > 0, np.minimum(hi, x), hi)
        step = r / np.where(jac > 0, jac, 1.0)
        step = np.clip(step, -2.0, 2.0)
        trial = x - step
        outside = (trial <= lo) | (trial >= hi)
        bracketed = np.isfinite(lo) & np.isfinite(hi)
        trial = np.where(outside & bracketed, 0.5 * (lo + hi), trial)
        done = np.abs(step) <= 1e-13 * max(1.0, float(np.abs(x).max()))
        x = np.where(done, x, trial)
        if np.all(done | (np.abs(r) <= 1e-15)):
            return x
    raise ShootingError(f"shooting did not converge; worst level residual {np.abs(r).max():.3e}")


def _tabulate(nl, log_amp, xi_max, rtol, grid_step):
    n = max(int(math.ceil(xi_max / grid_step)), 8)
    grid = np.linspace(0.0, xi_max, n + 1)
    sol = _integrate([(nl, np.array([0]))], np.array([log_amp]), xi_max, rtol, xi_eval=grid[::-1])
    f = sol.y[0, ::-1]
    p = sol.y[1, ::-1]
    return grid, f, p / nl.dphi(f), p[0]


def _check_inputs(nl, c, tail_tolerance, xi_max):
    if not isinstance(nl, Nonlinearity):
        raise TypeError("nl must be a Nonlinearity")
    c = check_positive(c, "c")
    tail_tolerance = 1e-12 * c if tail_tolerance is None else check_positive(tail_tolerance, "tail_tolerance")
    if xi_max is None:
        xi_max = default_xi_max(nl, c, tail_tolerance)
    else:
        xi_max = check_positive(xi_max, "xi_max")
        bound = float(tail_envelope(nl, c, xi_max))
        if bound > tail_tolerance:
            raise ValueError(
                f"xi_max={xi_max} too small: tail envelope {bound:.3e} exceeds {tail_tolerance:.3e}"
            )
    return c, tail_tolerance, xi_max


def _validate_profile(p):
    f = p.f_values
    # ties are allowed where c - g rounds to c; the slope must stay negative
    if np.any(np.diff(f) > 0) or np.any(p.fprime_values >= 0):
        raise ShootingError("profile is not strictly decreasing")
    if p.kind == HALF_LINE:
        if f[-1] > p.tail_tolerance or np.any(f <= 0) or np.any(f > p.c * (1 + 1e-12)):
            raise ShootingError("half-line profile violates 0 < f <= c or the tail condition")
    else:
        if abs(f[0] - p.c) > p.tail_tolerance or f[-1] > p.tail_tolerance:
            raise ShootingError("whole-line profile violates its limits")
        # f == c only where c - g rounds to c in the far left tail
        if np.any(f[1:-1] <= 0) or np.any(f[1:-1] > p.c) or np.any(f[p.xi_grid >= 0] >= p.c):
            raise ShootingError("whole-line profile leaves (0, c)")


def solve_half_line(nl, c, tail_tolerance=None, xi_max=None, *, rtol=DEFAULT_RTOL,
                    grid_step=DEFAULT_GRID_STEP):
    """Profile with ``f(0) = c``, ``f -> 0`` and ``f' < 0`` on ``[0, inf)``."""
    c, tail_tolerance, xi_max = _check_inputs(nl, c, tail_tolerance, xi_max)
    x = _shoot_levels(nl, [c], xi_max, rtol)[0]
    grid, f, fp, vp0 = _tabulate(nl, x, xi_max, rtol, grid_step)
    f[0] = c  # remove the O(rtol) shooting residual at the anchor
    prof = Profile(
        kind=HALF_LINE, c=c, xi_grid=grid, f_values=f, fprime_values=fp,
        v_prime_at_zero=float(vp0), nonlinearity=nl, tail_tolerance=tail_tolerance,
        tail_amplitude=float(np.exp(x)), tail_diffusivity=float(nl.dphi(0.0)),
    )
    _validate_profile(prof)
    return prof


def _slopes(nl, psi, a, c, xi_max, rtol):
    """``V_a'(0)`` (reflected problem) and ``v_{c-a}'(0)`` for arrays of ``a``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    xg = _shoot_levels(psi, a, xi_max, rtol)
    xf = _shoot_levels(nl, c - a, xi_max, rtol)
    m = a.size
    sol = _integrate([(psi, np.arange(m)), (nl, np.arange(m, 2 * m))],
                     np.concatenate([xg, xf]), xi_max, rtol)
    p0 = sol.y[2 * m:, -1]
    return p0[:m], p0[m:], xg, xf


def matching_function(nl, c, a_grid, xi_max=None, *, rtol=DEFAULT_RTOL):
    """``V_a'(0) - v_{c-a}'(0)`` on a grid of ``a`` in ``(0, c)``.

    Strictly decreasing in ``a``; its zero is the whole-line matching level.
    """
    c = check_positive(c, "c")
    if xi_max is None:
        xi_max = default_xi_max(nl, c, 1e-12 * c)
    psi = psi_nonlinearity(nl, c)
    vg, vf, _, _ = _slopes(nl, psi, a_grid, c, xi_max, rtol)
    return vg - vf


def solve_whole_line(nl, c, tail_tolerance=None, xi_max=None, *, rtol=DEFAULT_RTOL,
                     grid_step=DEFAULT_GRID_STEP, max_iter=40):
    """Profile with ``f(-inf) = c``, ``f(inf) = 0`` and ``f' < 0`` on the line.

    ``f(xi) = f_{c-a}(xi)`` for ``xi >= 0`` and ``c - g_a(-xi)`` for ``xi < 0``
    where ``g_a`` solves the half-line problem for ``s -> phi(c) - phi(c - s)``
    at level ``a``.  The matching level ``a*`` equates the fluxes
    ``V_a'(0) = v_{c-a}'(0)``; it is found by Newton iteration on the two tail
    amplitudes jointly (levels summing to ``c``, equal fluxes).
    """
    c, tail_tolerance, xi_max = _check_inputs(nl, c, tail_tolerance, xi_max)
    psi = psi_nonlinearity(nl, c)
    # start from the symmetric split
    xg = _initial_log_amplitude(psi, 0.5 * c)
    xf = _initial_log_amplitude(nl, 0.5 * c)
    groups = [(psi, np.array([0, 1, 2])), (nl, np.array([3, 4, 5]))]
    for _ in range(max_iter):
        amp = np.array([xg, xg + FD_STEP, xg, xf, xf, xf + FD_STEP])
        sol = _integrate(groups, amp, xi_max, rtol)
        lev = sol.y[:6, -1]
        flux = sol.y[6:, -1]
        if np.any(lev <= 0) or np.any(flux >= 0):
            raise ShootingError("whole-line matching left the admissible region")

        def residual(i, j):
            return np.array([lev[i] + lev[j] - c, math.log(-flux[i]) - math.log(-flux[j])])

        r0 = residual(0, 3)
        jac = np.column_stack([(residual(1, 4) - r0) / FD_STEP, (residual(2, 5) - r0) / FD_STEP])
        step = np.linalg.solve(jac, r0)
        step = np.clip(step, -1.0, 1.0)
        xg, xf = xg - step[0], xf - step[1]
        if np.max(np.abs(step)) <= 1e-13 * max(1.0, abs(xg), abs(xf)):
            break
    else:
        raise ShootingError("whole-line matching did not converge")

    ng = max(int(math.ceil(xi_max / grid_step)), 8)
    grid = np.linspace(0.0, xi_max, ng + 1)
    sol = _integrate([(psi, np.array([0])), (nl, np.array([1]))], np.array([xg, xf]), xi_max, rtol,
                     xi_eval=grid[::-1])
    g, fr = sol.y[0, ::-1], sol.y[1, ::-1]
    vg, vf = sol.y[2, ::-1], sol.y[3, ::-1]
    a_star = float(g[0])
    gp = vg / psi.dphi(g)
    fp = vf / nl.dphi(fr)
    # assemble; the duplicate node at 0 is dropped and f(0) = c - a*
    xi = np.concatenate([-grid[:0:-1], grid])
    f = np.concatenate([c - g[:0:-1], [c - a_star], fr[1:]])
    fprime = np.concatenate([gp[:0:-1], [0.5 * (gp[0] + fp[0])], fp[1:]])
    mismatch = abs(float(vg[0]) - float(vf[0]))
    prof = Profile(
        kind=WHOLE_LINE, c=c, xi_grid=xi, f_values=f, fprime_values=fprime,
        v_prime_at_zero=float(vf[0]), nonlinearity=nl, tail_tolerance=tail_tolerance,
        tail_amplitude=float(np.exp(xf)), tail_diffusivity=float(nl.dphi(0.0)),
        match_point=a_star, left_amplitude=float(np.exp(xg)),
        left_diffusivity=float(nl.dphi(c)), slope_mismatch=mismatch,
    )
    if mismatch > 1e-9:
        raise ShootingError(f"flux mismatch {mismatch:.3e} at the matching point")
    # sign change of the matching function at a*: its slope, from the last
    # finite-difference sensitivities, must be negative
    slope = (flux[1] - flux[0]) / (lev[1] - lev[0]) + (flux[5] - flux[3]) / (lev[5] - lev[3])
    if not slope < 0:
        raise ShootingError("matching function does not change sign at a*")
    _validate_profile(prof)
    return prof


# ---------------------------------------------------------------------------
# identities and derived quantities

def _right_tail_integral(p, power=0.0):
    """``integral_{xi_max}^inf f(xi) xi^power dxi`` for the analytic tail."""
    a, amp, L = p.tail_diffusivity, p.tail_amplitude, p.xi_max
    if power == 0.0:
        z = L / (2.0 * math.sqrt(a))
        return amp * 2.0 * math.sqrt(a) * (math.exp(-z * z) / math.sqrt(math.pi) - z * erfc(z))
    val, _ = integrate.quad(lambda x: p._right_tail(x) * x ** power, L, np.inf,
                            epsabs=1e-16, epsrel=1e-12)
    return val


def mass_identity_residual(p):
    """``| -v'(0) - (1/2) integral_0^inf f |``.

    The integral is the trapezoidal rule on the tabulation grid with its
    Euler-Maclaurin endpoint correction (the slopes are tabulated) plus the
    analytic tail beyond the window.
    """
    xi, f, fp = p.xi_grid, p.f_values, p.fprime_values
    mask = xi >= 0
    xi, f, fp = xi[mask], f[mask], fp[mask]
    h = np.diff(xi)
    trap = float(np.sum(0.5 * h * (f[1:] + f[:-1])))
    if np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        trap -= h[0] ** 2 / 12.0 * (fp[-1] - fp[0])
    total = trap + _right_tail_integral(p)
    return abs(-p.v_prime_at_zero - 0.5 * total)


def varadhan_ratio(p, transform, xi):
    """``-4 Phi(f(xi)) / xi^2``; tends to 1 as ``xi -> inf``.

    Returns ``(ratio, extrapolated)`` where ``extrapolated`` flags points beyond
    the tabulated window (analytic tail used).
    """
    if not isinstance(transform, PhiTransform):
        raise TypeError("transform must be a PhiTransform")
    if not hasattr(transform, "cumulative_"):
        transform.fit()
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi must be positive")
    ratio = -4.0 * transform.log_transform(p.log_value(xi)) / xi ** 2
    return ratio, xi > p.xi_max


def asymptotic_constant(nl, N, kind=HALF_LINE, profile=None):
    """``c(phi, N) = 2^((N-1)/2) w_{N-1} integral_0^inf f_1(xi) xi^((N-1)/2) dxi``.

    ``f_1`` is the level-one half-line profile for the boundary value problem
    and the whole-line profile (integrated over ``xi > 0`` only) for the
    Cauchy problem.
    """
    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    kind = _kind(kind)
    if profile is None:
        solver = solve_half_line if kind == HALF_LINE else solve_whole_line
        profile = solver(nl, 1.0)
    m = 0.5 * (N - 1)
    root = math.sqrt(profile.xi_max)
    # xi = u^2 removes the square-root cusp at the origin
    body, _ = integrate.quad(lambda u: 2.0 * float(profile(u * u)) * u ** (2 * m + 1), 0.0, root,
                             epsabs=1e-14, epsrel=1e-12, limit=400)
    moment = body + _right_tail_integral(profile, m)
    return 2.0 ** m * unit_ball_volume(N - 1) * moment


def heat_moment(power):
    """``integral_0^inf erfc(xi/2) xi^power dxi`` in closed form (heat oracle)."""
    s = power + 1.0
    return 2.0 ** s * gamma((s + 1.0) / 2.0) / (s * math.sqrt(math.pi))


def similarity_residual(p, h, s_grid=None):
    """Max residual of ``w_t - (phi(w))_ss`` for ``w = f(s/sqrt(t))`` at ``t = 1``.

    Centered differences of step ``h`` in both ``s`` and ``t``; the residual is
    ``O(h^2)``.
    """
    phi = p.nonlinearity.phi
    if s_grid is None:
        lo = 0.5 if p.kind == HALF_LINE else -6.0
        s_grid = np.linspace(lo, 6.0, 241)
    s = np.asarray(s_grid, dtype=float)

    def w(s_, t_):
        return p(s_ / math.sqrt(t_))

    wt = (w(s, 1.0 + h) - w(s, 1.0 - h)) / (2.0 * h)
    wss = (phi(w(s + h, 1.0)) - 2.0 * phi(w(s, 1.0)) + phi(w(s - h, 1.0))) / h ** 2
    return float(np.max(np.abs(wt - wss)))


# ---------------------------------------------------------------------------
# barriers

@dataclass(frozen=True)
class ScaledProfile:
    """``xi -> base(scale * xi)`` for ``xi >= start``, constant below ``start``."""

    base: Profile
    scale: float
    start: float

    extended_below: bool = True

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.base(self.scale * np.maximum(xi, self.start))

    def log_value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.base.log_value(self.scale * np.maximum(xi, self.start))

    @property
    def xi_grid(self):
        grid = self.base.xi_grid / self.scale
        return grid[grid >= self.start]

    @property
    def f_values(self):
        return self(self.xi_grid)


@dataclass(frozen=True)
class BarrierPair:
    """Scaled profiles ``f_-(xi) = f_{1-eps}(sqrt(1+2 eta) xi)`` and ``f_+(xi) = f_{1+eps}(sqrt(1-2 eta) xi)``.

    Only the region ``xi >= eta`` is meaningful; below it the tabulations are
    held constant (``extended_below``).
    """

    epsilon: float
    eta: float
    kind: str
    f_minus: ScaledProfile
    f_plus: ScaledProfile
    f_one: Profile

    def ordered(self, xi):
        """Boolean mask of ``f_- < f_1 < f_+`` (compared in log space)."""
        xi = np.asarray(xi, dtype=float)
        lm, l1, lp = self.f_minus.log_value(xi), self.f_one.log_value(xi), self.f_plus.log_value(xi)
        return (lm < l1) & (l1 < lp)


def barrier_profiles(nl, epsilon, eta=None, kind=HALF_LINE, **solver_kw):
    """Barrier profiles for ``0 < epsilon < 1/4`` and ``0 < eta <= epsilon / 10``."""
    epsilon = check_in_interval(epsilon, "epsilon", 0.0, 0.25)
    eta = epsilon / 10.0 if eta is None else check_in_interval(
        eta, "eta", 0.0, epsilon / 10.0, closed=(False, True))
    kind = _kind(kind)
    solver = solve_half_line if kind == HALF_LINE else solve_whole_line
    fm = solver(nl, 1.0 - epsilon, **solver_kw)
    fp = solver(nl, 1.0 + epsilon, **solver_kw)
    f1 = solver(nl, 1.0, **solver_kw)
    return BarrierPair(
        epsilon=epsilon,
        eta=eta,
        kind=kind,
        f_minus=ScaledProfile(fm, math.sqrt(1.0 + 2.0 * eta), eta),
        f_plus=ScaledProfile(fp, math.sqrt(1.0 - 2.0 * eta), eta),
        f_one=f1,
    )


# ---------------------------------------------------------------------------
# estimator front end

class SelfSimilarProfile(BaseEstimator):
    """Estimator-style wrapper around the profile solvers.

    ``fit`` solves the boundary value problem; ``predict`` evaluates the
    profile; ``transform`` maps ``(s, t)`` pairs to ``f(s / sqrt(t))``.

    Parameters
    ----------
    nonlinearity : Nonlinearity
    c : float, default=1.0
        Boundary value (half line) or left limit (whole line).
    kind : {"half_line", "whole_line"}, default="half_line"
    tail_tolerance : float, optional
        Defaults to ``1e-12 * c``.
    xi_max : float, optional
        Right end of the tabulation window.
    rtol : float, default=1e-10
    grid_step : float, default=1e-3

    Attributes
    ----------
    profile_ : Profile
    v_prime_at_zero_ : float
    match_point_ : float or None
    mass_residual_ : float
    """

    def __init__(self, nonlinearity=None, c=1.0, kind=HALF_LINE, tail_tolerance=None, xi_max=None,
                 rtol=DEFAULT_RTOL, grid_step=DEFAULT_GRID_STEP):
        self.nonlinearity = nonlinearity
        self.c = c
        self.kind = kind
        self.tail_tolerance = tail_tolerance
        self.xi_max = xi_max
        self.rtol = rtol
        self.grid_step = grid_step

    def fit(self, X=None, y=None):
        solver = solve_half_line if _kind(self.kind) == HALF_LINE else solve_whole_line
        self.profile_ = solver(self.nonlinearity, self.c, self.tail_tolerance, self.xi_max,
                               rtol=self.rtol, grid_step=self.grid_step)
        self.v_prime_at_zero_ = self.profile_.v_prime_at_zero
        self.match_point_ = self.profile_.match_point
        self.mass_residual_ = mass_identity_residual(self.profile_)
        return self

    def predict(self, xi):
        check_is_fitted(self, "profile_")
        return self.profile_(xi)

    def transform(self, X):
        """``X`` has columns ``(s, t)``; returns ``f(s / sqrt(t))``."""
        check_is_fitted(self, "profile_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValueError("X must have shape (n, 2) with columns (s, t)")
        if np.any(X[:, 1] <= 0):
            raise ValueError("times must be positive")
        return self.profile_(X[:, 0] / np.sqrt(X[:, 1]))

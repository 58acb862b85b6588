"""Admissible diffusion nonlinearities and the logarithmic transform.

A nonlinearity is a function ``phi`` with ``phi(0) = 0`` whose derivative is
pinched between two positive constants, ``delta1 <= phi'(s) <= delta2``.  The
equation ``u_t = Laplace(phi(u))`` is then uniformly parabolic.

The short-time profile of the solutions is governed by

    Phi(s) = integral from 1 to s of phi'(r) / r dr,      s > 0,

and by its inverse ``Psi``.  Both are exposed through :class:`PhiTransform`,
an sklearn-style transformer (``transform`` is ``Phi``, ``inverse_transform``
is ``Psi``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_is_fitted, check_positive

__all__ = [
    "Nonlinearity",
    "PhiTransform",
    "make_nonlinearity",
    "heat",
    "linear",
    "sine",
    "ramp",
    "tabulated",
    "from_name",
    "psi_nonlinearity",
    "VALIDATION_RANGE",
    "VALIDATION_SAMPLES",
]

VALIDATION_RANGE = (-10.0, 10.0)
VALIDATION_SAMPLES = 10_000
PHI0_TOLERANCE = 1e-12
BOUND_SLACK = 1e-9


def _vectorize(fn):
    """Wrap a scalar callable so it also accepts arrays."""

    def wrapped(s):
        out = fn(s)
        if np.ndim(out) == 0 and np.ndim(s) > 0:
            return np.vectorize(fn, otypes=[float])(s)
        return out

    return wrapped


@dataclass(frozen=True)
class Nonlinearity:
    """A validated nonlinearity ``phi`` with derivative bounds.

    Parameters
    ----------
    phi, dphi : callable
        The nonlinearity and its derivative.  Both should accept numpy arrays;
        scalar-only callables are wrapped with ``np.vectorize``.
    delta1, delta2 : float
        Lower and upper bounds for ``dphi`` on the real line.
    name : str
        Identifier used in reports and configuration files.
    params : dict
        Construction parameters, recorded for reproducibility.
    smoothness : str
        ``"C2"`` for the analytic families, ``"C1"`` for tabulated imports.
    slope : float or None
        Set when ``phi(s) = slope * s`` exactly; enables closed-form ``Phi``.
    """

    phi: Callable
    dphi: Callable
    delta1: float
    delta2: float
    name: str = "custom"
    params: dict = field(default_factory=dict)
    smoothness: str = "C2"
    slope: float | None = None

    def __post_init__(self):
        d1 = check_positive(self.delta1, "delta1")
        d2 = check_positive(self.delta2, "delta2")
        if d2 < d1:
            raise ValueError(f"delta2 ({d2}) must be >= delta1 ({d1})")
        phi0 = float(self.phi(0.0))
        if abs(phi0) > PHI0_TOLERANCE:
            raise ValueError(f"phi(0) must vanish, got {phi0!r}")

        s = np.linspace(*VALIDATION_RANGE, VALIDATION_SAMPLES)
        ds = np.asarray(self.dphi(s), dtype=float)
        if ds.shape != s.shape:
            ds = np.array([float(self.dphi(v)) for v in s])
        lo, hi = d1 * (1 - BOUND_SLACK), d2 * (1 + BOUND_SLACK)
        bad = (ds < lo) | (ds > hi) | ~np.isfinite(ds)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ValueError(
                f"dphi({s[k]:.6g}) = {ds[k]:.6g} lies outside [{d1}, {d2}]"
            )
        ps = np.asarray(self.phi(s), dtype=float)
        if ps.shape != s.shape:
            ps = np.array([float(self.phi(v)) for v in s])
        if np.any(np.diff(ps) <= 0):
            raise ValueError("phi is not strictly increasing on the validation range")

    def __call__(self, s):
        return self.phi(s)

    def derivative(self, s):
        return self.dphi(s)

    @property
    def ratio(self):
        """``delta2 / delta1``, the ellipticity ratio."""
        return self.delta2 / self.delta1


def make_nonlinearity(phi, dphi, delta1, delta2, name="custom", **kwargs):
    """Validate and bundle a nonlinearity.

    Raises ``ValueError`` when ``phi(0) != 0`` (to 1e-12) or when sampled values
    of ``dphi`` leave ``[delta1, delta2]`` (with a 1e-9 relative slack).
    """
    return Nonlinearity(_vectorize(phi), _vectorize(dphi), delta1, delta2, name, **kwargs)


def heat():
    """The identity ``phi(s) = s`` (heat equation)."""
    return linear(1.0, name="heat")


def linear(kappa, name=None):
    """Pure scaling ``phi(s) = kappa * s``."""
    kappa = check_positive(kappa, "kappa")
    return Nonlinearity(
        phi=lambda s: kappa * np.asarray(s, dtype=float),
        dphi=lambda s: np.full(np.shape(s), kappa) if np.ndim(s) else kappa,
        delta1=kappa,
        delta2=kappa,
        name=name or "linear",
        params={} if name == "heat" else {"kappa": kappa},
        slope=kappa,
    )


def sine(a=0.1):
    """``phi(s) = s + a sin(s)`` with ``|a| < 1``."""
    a = float(a)
    if not abs(a) < 1:
        raise ValueError(f"|a| must be < 1, got {a}")
    return Nonlinearity(
        phi=lambda s: s + a * np.sin(s),
        dphi=lambda s: 1.0 + a * np.cos(s),
        delta1=1.0 - abs(a),
        delta2=1.0 + abs(a),
        name="sine",
        params={"a": a},
    )


def ramp(low=0.5, high=2.0, center=0.5, width=0.1):
    """Smoothed two-slope ramp.

    The diffusivity moves from ``low`` to ``high`` across ``center`` along a
    logistic of the given ``width``.
    """
    low = check_positive(low, "low")
    high = check_positive(high, "high")
    width = check_positive(width, "width")
    jump = high - low
    offset = np.logaddexp(0.0, -center / width)

    def phi(s):
        s = np.asarray(s, dtype=float)
        return low * s + jump * width * (np.logaddexp(0.0, (s - center) / width) - offset)

    def dphi(s):
        s = np.asarray(s, dtype=float)
        return low + jump * 0.5 * (1.0 + np.tanh((s - center) / (2.0 * width)))

    return Nonlinearity(
        phi=phi,
        dphi=dphi,
        delta1=min(low, high),
        delta2=max(low, high),
        name="ramp",
        params={"low": low, "high": high, "center": center, "width": width},
    )


def tabulated(path=None, *, s=None, phi=None, delta1=None, delta2=None):
    """Nonlinearity interpolated from a two-column table ``(s, phi(s))``.

    Monotone cubic (PCHIP) interpolation inside the table and linear
    extension with the end slopes outside.  The result is only C1, which is
    recorded in ``smoothness`` rather than rejected.
    """
    if path is not None:
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    continue  # header line
        s, phi = np.array(rows).T
    s = np.asarray(s, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if s.ndim != 1 or s.shape != phi.shape or s.size < 3:
        raise ValueError("table needs at least three (s, phi) rows")
    if np.any(np.diff(s) <= 0):
        raise ValueError("s column must be strictly increasing")
    interp = PchipInterpolator(s, phi, extrapolate=False)
    deriv = interp.derivative()
    lo_s, hi_s = s[0], s[-1]
    lo_slope, hi_slope = float(deriv(lo_s)), float(deriv(hi_s))

    def f(x):
        x = np.asarray(x, dtype=float)
        out = interp(np.clip(x, lo_s, hi_s))
        out = np.where(x < lo_s, phi[0] + lo_slope * (x - lo_s), out)
        return np.where(x > hi_s, phi[-1] + hi_slope * (x - hi_s), out)

    def df(x):
        x = np.asarray(x, dtype=float)
        out = deriv(np.clip(x, lo_s, hi_s))
        out = np.where(x < lo_s, lo_slope, out)
        return np.where(x > hi_s, hi_slope, out)

    if delta1 is None or delta2 is None:
        samples = df(np.linspace(min(lo_s, VALIDATION_RANGE[0]), max(hi_s, VALIDATION_RANGE[1]), 20_001))
        delta1 = float(samples.min()) if delta1 is None else delta1
        delta2 = float(samples.max()) if delta2 is None else delta2
    return Nonlinearity(
        phi=f,
        dphi=df,
        delta1=delta1,
        delta2=delta2,
        name="tabulated",
        params={"path": str(path)} if path is not None else {},
        smoothness="C1",
    )


_BUILTINS = {"heat": heat, "linear": linear, "sine": sine, "ramp": ramp, "tabulated": tabulated}


def from_name(name, **params):
    """Build a built-in nonlinearity from its configuration name."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {name!r}; choose from {sorted(_BUILTINS)}") from None
    return factory(**params)


def psi_nonlinearity(nl, c):
    """The reflected nonlinearity ``s -> phi(c) - phi(c - s)``.

    It has the same derivative bounds as ``phi``; the whole-line profile is
    assembled from half-line problems for ``phi`` and for this function.
    """
    phic = float(nl.phi(c))
    return Nonlinearity(
        phi=lambda s: phic - nl.phi(c - np.asarray(s, dtype=float)),
        dphi=lambda s: nl.dphi(c - np.asarray(s, dtype=float)),
        delta1=nl.delta1,
        delta2=nl.delta2,
        name=f"{nl.name}-reflected",
        params={"c": float(c), **nl.params},
        smoothness=nl.smoothness,
        slope=nl.slope,
    )


# Gauss-Legendre rules used on the log-variable panels.
_GL_HI = np.polynomial.legendre.leggauss(16)
_GL_LO = np.polynomial.legendre.leggauss(8)


def _gl(fun, a, b, rule=_GL_HI):
    """Vectorised Gauss-Legendre integral of ``fun`` over ``[a, b]``."""
    x, w = rule
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    return np.sum(w * fun(nodes), axis=-1) * half[..., 0]


class PhiTransform(TransformerMixin, BaseEstimator):
    """``Phi`` and its inverse ``Psi`` for a given nonlinearity.

    With ``r = e^y`` the defining integral becomes
    ``Phi(s) = integral_0^{log s} phi'(e^y) dy``, a bounded smooth integrand.
    ``fit`` tabulates cumulative panel integrals on a grid in ``y`` (composite
    16-point Gauss-Legendre, panels refined until the 8-vs-16 point error
    estimate is below ``quadrature_tolerance``); evaluation adds one partial
    panel.  Points outside the table fall back to ``scipy.integrate.quad``.

    Parameters
    ----------
    nonlinearity : Nonlinearity
    quadrature_tolerance : float, default=1e-12
        Absolute error target for ``Phi``.
    log_range : tuple of float, default=(-700.0, 3.0)
        Range of ``log s`` covered by the table.
    panel_width : float, default=0.25
        Initial panel width in ``log s``.

    Examples
    --------
    >>> from nldiff.nonlinearity import heat
    >>> tr = PhiTransform(heat()).fit()
    >>> float(tr.transform(np.e))
    1.0
    """

    def __init__(self, nonlinearity=None, quadrature_tolerance=1e-12, log_range=(-700.0, 3.0),
                 panel_width=0.25):
        self.nonlinearity = nonlinearity
        self.quadrature_tolerance = quadrature_tolerance
        self.log_range = log_range
        self.panel_width = panel_width

    def fit(self, X=None, y=None):
        nl = self.nonlinearity
        if not isinstance(nl, Nonlinearity):
            raise TypeError("nonlinearity must be a Nonlinearity instance")
        tol = check_positive(self.quadrature_tolerance, "quadrature_tolerance")
        lo, hi = map(float, self.log_range)
        if not lo < 0 < hi:
            raise ValueError("log_range must straddle 0")

        def integrand(y):
            return np.asarray(nl.dphi(np.exp(y)), dtype=float)

        width = check_positive(self.panel_width, "panel_width")
        for _ in range(12):
            nodes = np.concatenate([
                -np.arange(0.0, -lo + width, width)[::-1],
                np.arange(width, hi + width, width),
            ])
            nodes = np.clip(nodes, lo, hi)
            nodes = np.unique(nodes)
            a, b = nodes[:-1], nodes[1:]
            hi_val = _gl(integrand, a, b)
            lo_val = _gl(integrand, a, b, _GL_LO)
            if np.abs(hi_val - lo_val).sum() <= tol:
                break
            width *= 0.5
        else:
            raise RuntimeError("Phi tabulation did not reach the quadrature tolerance")

        cum = np.concatenate([[0.0], np.cumsum(hi_val)])
        zero = int(np.searchsorted(nodes, 0.0))
        cum -= cum[zero]
        self.nodes_ = nodes
        self.cumulative_ = cum
        self.panel_error_ = float(np.abs(hi_val - lo_val).sum())
        self.integrand_ = integrand
        return self

    # -- Phi -----------------------------------------------------------------
    def log_transform(self, log_s):
        """``Phi`` as a function of ``log s`` (avoids under/overflow)."""
        check_is_fitted(self, "cumulative_")
        y = np.asarray(log_s, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        nl = self.nonlinearity
        if nl.slope is not None:
            out = nl.slope * y
            return float(out[0]) if scalar else out
        out = np.empty_like(y)
        nodes = self.nodes_
        inside = (y >= nodes[0]) & (y <= nodes[-1])
        if np.any(inside):
            yi = y[inside]
            k = np.clip(np.searchsorted(nodes, yi, side="right") - 1, 0, nodes.size - 2)
            # start from the nearer panel end so Phi(1 + small) keeps full relative accuracy
            k += (yi - nodes[k]) > (nodes[k + 1] - yi)
            out[inside] = self.cumulative_[k] + _gl(self.integrand_, nodes[k], yi)
        for i in np.flatnonzero(~inside):
            if y[i] < nodes[0]:
                # dphi(e^y) -> dphi(0) exponentially; integrate the constant exactly
                d0 = float(nl.dphi(0.0))
                lo = max(y[i], nodes[0] - 60.0)
                dev, _ = integrate.quad(lambda t: self.integrand_(t) - d0, nodes[0], lo,
                                        epsabs=self.quadrature_tolerance, epsrel=0.0, limit=500)
                out[i] = self.cumulative_[0] + d0 * (y[i] - nodes[0]) + dev
            else:
                # large s: integrate in s itself, where dphi is not compressed
                extra, _ = integrate.quad(lambda r: float(nl.dphi(r)) / r, np.exp(nodes[-1]),
                                          np.exp(y[i]), epsabs=self.quadrature_tolerance,
                                          epsrel=1e-13, limit=2000)
                out[i] = self.cumulative_[-1] + extra
        return float(out[0]) if scalar else out

    def transform(self, s):
        """Evaluate ``Phi(s)`` for ``s > 0``."""
        s = np.asarray(s, dtype=float)
        if np.any(~(s > 0)):
            raise ValueError("Phi is only defined for s > 0")
        with np.errstate(divide="ignore"):
            return self.log_transform(np.log(s))

    Phi = transform

    # -- Psi -----------------------------------------------------------------
    def log_inverse_transform(self, y, *, tol=1e-13, max_iter=200):
        """``log Psi(y)``; Newton on ``log s`` safeguarded by the envelope bracket.

        ``delta1 |log s| <= |Phi(s)| <= delta2 |log s|`` gives a bracket for
        ``log s`` of ``[y/delta2, y/delta1]`` (``y >= 0``) or
        ``[y/delta1, y/delta2]`` (``y < 0``).
        """
        check_is_fitted(self, "cumulative_")
        nl = self.nonlinearity
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        if nl.slope is not None:
            out = y / nl.slope
            return float(out[0]) if scalar else out
        pad = 1e-12 * (1.0 + np.abs(y))
        a = np.where(y >= 0, y / nl.delta2, y / nl.delta1) - pad
        b = np.where(y >= 0, y / nl.delta1, y / nl.delta2) + pad
        ell = 0.5 * (a + b)
        for _ in range(max_iter):
            res = self.log_transform(ell) - y
            a = np.where(res < 0, ell, a)
            b = np.where(res > 0, ell, b)
            slope = np.asarray(nl.dphi(np.exp(ell)), dtype=float)
            step = res / slope
            trial = ell - step
            bad = (trial <= a) | (trial >= b)
            trial = np.where(bad, 0.5 * (a + b), trial)
            done = (np.abs(res) <= tol) | (b - a <= 4e-16 * (1 + np.abs(ell)))
            ell = np.where(done, ell, trial)
            if np.all(done):
                break
        else:
            worst = float(np.max(np.abs(self.log_transform(ell) - y)))
            raise RuntimeError(f"Psi did not converge; residual {worst:.3e}")
        return float(ell[0]) if scalar else ell

    def inverse_transform(self, y):
        """Evaluate ``Psi(y)``, the inverse of ``Phi`` (``Psi: R -> (0, inf)``)."""
        return np.exp(self.log_inverse_transform(y))

    Psi = inverse_transform

    def residual(self, y):
        """``|Phi(Psi(y)) - y|``, computed in log space."""
        return np.abs(self.log_transform(self.log_inverse_transform(y)) - np.asarray(y, dtype=float))


def Phi(transform, s):
    """``Phi(s)``; fits ``transform`` on first use."""
    if not hasattr(transform, "cumulative_"):
        transform.fit()
    return transform.transform(s)


def Psi(transform, y):
    """``Psi(y) = Phi^{-1}(y)``; fits ``transform`` on first use."""
    if not hasattr(transform, "cumulative_"):
        transform.fit()
    return transform.inverse_transform(y)


def phi_of(nl, quadrature_tolerance=1e-12):
    """Fitted :class:`PhiTransform` for ``nl``."""
    return PhiTransform(nl, quadrature_tolerance=quadrature_tolerance).fit()


def phi_brute_force(nl, s, panels=1_000_000):
    """Midpoint Riemann sum of ``phi'(r)/r`` on ``[1, s]`` (test oracle)."""
    s = float(s)
    edges = np.linspace(1.0, s, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return float(np.sum(nl.dphi(mid) / mid) * (s - 1.0) / panels)


__all__ += ["Phi", "Psi", "phi_of", "phi_brute_force"]


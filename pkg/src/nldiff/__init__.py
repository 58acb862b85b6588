"""Numerical toolkit for short-time asymptotics of nonlinear diffusion ``u_t = Laplacian(phi(u))``.

Submodules: :mod:`nonlinearity` (admissible ``phi`` and the transform ``Phi``),
:mod:`selfsimilar` (one-dimensional self-similar profiles), :mod:`geometry`
(distance, curvature and level-set measures), :mod:`pde` (implicit solver) and
:mod:`asymptotics` (verification reports).
"""

__version__ = "0.1.0"

from .nonlinearity import Nonlinearity, PhiTransform, from_name, heat, make_nonlinearity, ramp, sine  # noqa: E402
from .selfsimilar import Profile, SelfSimilarProfile, asymptotic_constant, solve_half_line, solve_whole_line  # noqa: E402
from .geometry import DomainGeometry, TouchingBall, level_set_measure, signed_distance  # noqa: E402
from .pde import Field, Grid, solve  # noqa: E402
from .asymptotics import VerificationReport  # noqa: E402

__all__ = [
    "Nonlinearity", "PhiTransform", "from_name", "heat", "make_nonlinearity", "ramp", "sine",
    "Profile", "SelfSimilarProfile", "asymptotic_constant", "solve_half_line", "solve_whole_line",
    "DomainGeometry", "TouchingBall", "level_set_measure", "signed_distance",
    "Field", "Grid", "solve", "VerificationReport",
]

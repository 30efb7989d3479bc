"""Scalar reductions of the nonlocal coefficient.

Because the Kirchhoff coefficient depends on u only through the single
number |grad u|_2, several subproblems collapse to one strictly
increasing scalar equation

    h(y) = b y^{alpha + 1/2} + y^{1/2} - c = 0,   y >= 0,

whose unique root recovers the seminorm of the unknown.  The routines
here solve that equation and apply the three exact change-of-variables
tricks built on it: the linear comparison solve, the per-step rescaling
of the monotone iteration, and the reduction to a semilinear problem.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError
from .mesh import DomainMesh, GridFunction, h1_seminorm
from .problem import ProblemParams, require_member


@dataclass(frozen=True)
class RootProblem:
    b: float
    alpha: float
    c: float

    def __post_init__(self):
        if not self.b > 0 or not self.alpha > 0:
            raise ValueError("root problem needs b > 0 and alpha > 0")
        if self.c < 0:
            raise ValueError(f"right-hand side c must be >= 0, got {self.c}")

    def h(self, y: float) -> float:
        return self.b * y ** (self.alpha + 0.5) + np.sqrt(y) - self.c


def solve_h_root(b: float, alpha: float, c: float, tol: float | None = None) -> float:
    """Unique nonnegative root of b y^{alpha+1/2} + y^{1/2} = c.

    h is strictly increasing with h(0) = -c <= 0 and h -> +inf, so a
    bracketed bisection/Newton hybrid cannot miss.  Residual target
    |h(y)| <= 1e-13 * max(1, c).
    """
    prob = RootProblem(b, alpha, c)
    if c == 0.0:
        return 0.0
    if tol is None:
        tol = 1e-13 * max(1.0, c)
    # bracket: y^{1/2} >= c or b y^{alpha+1/2} >= c each force h >= 0
    hi = max(c * c, (c / b) ** (1.0 / (alpha + 0.5)))
    while prob.h(hi) < 0.0:  # guard against rounding at the corner
        hi *= 2.0
    lo = 0.0
    y = hi
    for _ in range(200):
        val = prob.h(y)
        if abs(val) <= tol:
            return float(y)
        if val > 0.0:
            hi = y
        else:
            lo = y
        dval = prob.b * (prob.alpha + 0.5) * y ** (prob.alpha - 0.5) + 0.5 / np.sqrt(y)
        step = y - val / dval
        y = step if lo < step < hi else 0.5 * (lo + hi)
    raise ConvergenceError(f"scalar root stalled at residual {val:.3e}")


def kirchhoff_linear_solve(mesh: DomainMesh, params: ProblemParams) -> GridFunction:
    """Exact solution of the linear comparison problem

        -(1 + b |grad u|^{2 alpha}) lap u = lambda f.

    Requires lambda > 0 and a witness-positive forcing.  With v the
    Poisson witness of f, every solution is u = lambda v / (1 + b y^alpha)
    where y solves h(y) = lambda |grad v|; then |grad u|_2^2 = y exactly.
    The output is the strictly positive comparison function the
    positivity arguments lean on.
    """
    if not params.lam > 0:
        raise ValueError("linear comparison solve needs lambda > 0")
    v = require_member(mesh, params.f)
    c = params.lam * h1_seminorm(mesh, v)
    y = solve_h_root(params.b, params.alpha, c)
    scale = params.lam / (1.0 + params.b * y**params.alpha)
    return scale * v


def rescale_to_semilinear(mesh: DomainMesh, params: ProblemParams, u: GridFunction):
    """Freeze the nonlocal coefficient of u and divide it out.

    Returns (v, effective_lambda) with

        v = u / (1 + b t)^{1/(p-1)},      t = |grad u|^{2 alpha},
        effective_lambda = lambda / (1 + b t)^{p/(p-1)}.

    If u solves the nonlocal equation then v solves the semilinear one
        -lap v = (v_+)^p + effective_lambda f
    with the same f, exactly (the substitution is algebraic).
    """
    t = h1_seminorm(mesh, u) ** (2.0 * params.alpha)
    denom = 1.0 + params.b * t
    v = denom ** (-1.0 / (params.p - 1.0)) * u
    eff_lam = params.lam * denom ** (-params.p / (params.p - 1.0))
    return v, float(eff_lam)


def picard_rescale(mesh: DomainMesh, params: ProblemParams, w: GridFunction) -> GridFunction:
    """Rescale a Poisson solve so the nonlocal equation holds exactly.

    Given w with -lap w = rhs, the field u = w / (1 + b y^alpha), with y
    the root of h(y) = |grad w|, satisfies

        (1 + b |grad u|^{2 alpha}) (-lap u) = rhs   and   |grad u|_2^2 = y.
    """
    c = h1_seminorm(mesh, w)
    y = solve_h_root(params.b, params.alpha, c)
    return (1.0 / (1.0 + params.b * y**params.alpha)) * w

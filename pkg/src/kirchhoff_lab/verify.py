"""Independent checks for computed solutions.

Everything here deliberately avoids the solver machinery it certifies:

* ``pohozaev_residual``  -- the star-shaped integral identity, boundary
  flux against volume terms, with one-sided second-order normal
  derivatives.  For supercritical exponents its sign structure is what
  rules solutions out, so the residual doubles as a correctness gauge.
* ``shooting_solve``     -- RK4 marching of the radial/mirrored ODE plus
  bisection on the center value; a discretization fully independent of
  the grid stencils.  ``homogeneous_shooting`` adds the scalar
  consistency analysis for the unforced problem, ``kirchhoff_shooting``
  the damped outer fixed point for the forced one.
* ``uniqueness_probe``   -- multi-start counting plus the contraction
  quantity whose smallness certifies at-most-one.
* ``supnorm_decay_scan`` -- the small-lambda vanishing law and the
  u/lambda limit profile.
* ``residual_certificate`` -- sup norm of the strong-form defect.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import constants
from ._kernels import rk4_radial
from .energy import energy_gradient
from .exceptions import ConvergenceError, MeshError, RegimeError
from .mesh import (
    DomainMesh,
    GridFunction,
    h1_seminorm,
    poisson_solve,
    sup_norm,
)
from .problem import ProblemParams, regime_letter
from .scalar_reduction import kirchhoff_linear_solve, rescale_to_semilinear
from .solvers import SolverConfig, descent_minimize, multi_start, newton_nonlocal


# ---------------------------------------------------------------------------
# integral identity


@dataclass(frozen=True)
class PohozaevReport:
    boundary: float  # int_{dOmega} (x . nu) (dw/dnu)^2 dS
    volume: float  # 2N int G + 2 int x.grad_x G - (N-2) int g w
    residual: float
    rel_residual: float
    eta: float  # N - 2 - 2N/(p+1); positive exactly above the critical exponent


def _as_values(mesh, u):
    if isinstance(u, GridFunction):
        if u.mesh is not mesh:
            raise MeshError("field lives on a different mesh")
        return u.values
    arr = np.asarray(u, dtype=float)
    if arr.shape != mesh.shape:
        raise MeshError(f"shape {arr.shape} does not match mesh {mesh.shape}")
    return arr


def _boundary_flux(mesh: DomainMesh, v: np.ndarray) -> float:
    """int over the boundary of (x . nu) (dw/dnu)^2, one-sided 2nd order."""
    if mesh.kind == "interval":
        h = mesh.h
        x_l = mesh.coords[0][0] - h
        x_r = mesh.coords[0][-1] + h
        dn_l = (4.0 * v[0] - v[1]) / (2.0 * h)
        dn_r = (-4.0 * v[-1] + v[-2]) / (2.0 * h)
        return (-x_l) * dn_l**2 + x_r * dn_r**2
    if mesh.kind == "rectangle":
        hx = mesh.extents[0] / (mesh.shape[0] + 1)
        hy = mesh.extents[1] / (mesh.shape[1] + 1)
        x_l = mesh.coords[0][0] - hx
        x_r = mesh.coords[0][-1] + hx
        y_b = mesh.coords[1][0] - hy
        y_t = mesh.coords[1][-1] + hy
        # the integrand vanishes at corners (w = 0 along each edge), so the
        # interior-node sums are exact trapezoid rules over each face
        dn = (4.0 * v[0, :] - v[1, :]) / (2.0 * hx)
        total = (-x_l) * float(np.sum(dn**2)) * hy
        dn = (-4.0 * v[-1, :] + v[-2, :]) / (2.0 * hx)
        total += x_r * float(np.sum(dn**2)) * hy
        dn = (4.0 * v[:, 0] - v[:, 1]) / (2.0 * hy)
        total += (-y_b) * float(np.sum(dn**2)) * hx
        dn = (-4.0 * v[:, -1] + v[:, -2]) / (2.0 * hy)
        total += y_t * float(np.sum(dn**2)) * hx
        return total
    if mesh.kind == "ball":
        h = mesh.h
        R = mesh.extents[0]
        dn = (-4.0 * v[-1] + v[-2]) / (2.0 * h)
        return 4.0 * np.pi * R**3 * dn**2
    raise MeshError(f"unsupported mesh kind {mesh.kind!r}")


def pohozaev_residual(mesh: DomainMesh, w, p: float, c_pow: float = 1.0,
                      forcing=None, forcing_xdot=None) -> PohozaevReport:
    """Identity residual for a solution of Delta w + c_pow (w+)^p + forcing = 0.

    ``forcing`` holds the full nodal inhomogeneity (already scaled),
    ``forcing_xdot`` the nodal values of x . grad(forcing); both None for
    the unforced problem.  The report's residual shrinks O(h) in general
    (one-sided flux), O(h^2) on smooth profiles.
    """
    v = _as_values(mesh, w)
    N = mesh.dim
    if forcing is None:
        fvals = np.zeros(mesh.shape)
        fdot = np.zeros(mesh.shape)
    else:
        fvals = _as_values(mesh, forcing)
        if forcing_xdot is None:
            raise ValueError("forcing_xdot (nodal x . grad forcing) is required "
                             "alongside a forcing term")
        fdot = _as_values(mesh, forcing_xdot)
    wp = np.maximum(v, 0.0)
    G = c_pow * wp ** (p + 1.0) / (p + 1.0) + fvals * v
    g = c_pow * wp**p + fvals
    weights = mesh.weights
    volume = (2.0 * N * float(np.sum(weights * G))
              + 2.0 * float(np.sum(weights * fdot * v))
              - (N - 2.0) * float(np.sum(weights * g * v)))
    boundary = _boundary_flux(mesh, v)
    residual = boundary - volume
    scale = max(abs(boundary), abs(volume))
    rel = 0.0 if scale == 0.0 else abs(residual) / scale
    eta = N - 2.0 - 2.0 * N / (p + 1.0)
    return PohozaevReport(boundary, volume, residual, rel, eta)


def xdot_grad_values(mesh: DomainMesh, forcing) -> np.ndarray:
    """Nodal x . grad(f) from a Forcing's analytic derivative."""
    if forcing.grad is None:
        raise ValueError(f"forcing {forcing.name!r} carries no gradient data")
    if mesh.kind == "rectangle":
        X, Y = np.meshgrid(mesh.coords[0], mesh.coords[1], indexing="ij")
        gx, gy = forcing.grad(X, Y)
        return X * gx + Y * gy
    x = mesh.coords[0]
    return x * forcing.grad(x)


def transformed_gradient_bound(mesh: DomainMesh, params: ProblemParams, u,
                               forcing_xdot) -> tuple:
    """Gradient bound for the rescaled solution above the critical exponent.

    Testing the rescaled equation with its own solution and dropping the
    (nonnegative) boundary flux of the integral identity gives

        |grad v|^2 <= eff_lam [ (2/eta) int (x.grad f) v
                                + (1 + (N+2)/eta) int f v ].

    Returns (lhs, rhs); callers assert lhs <= rhs with headroom.
    """
    v, eff_lam = rescale_to_semilinear(mesh, params, u)
    N = mesh.dim
    eta = N - 2.0 - 2.0 * N / (params.p + 1.0)
    if eta <= 0.0:
        raise RegimeError("the gradient bound needs a supercritical exponent")
    fvals = _as_values(mesh, params.f)
    fdot = _as_values(mesh, forcing_xdot)
    wts = mesh.weights
    rhs = eff_lam * ((2.0 / eta) * float(np.sum(wts * fdot * v.values))
                     + (1.0 + (N + 2.0) / eta) * float(np.sum(wts * fvals * v.values)))
    lhs = h1_seminorm(mesh, v) ** 2
    return lhs, rhs


# ---------------------------------------------------------------------------
# shooting oracle


def _interval_center(mesh: DomainMesh) -> float:
    lo = mesh.coords[0][0] - mesh.h
    return lo + 0.5 * mesh.extents[0]


def _shoot_profile(a, h_s, nsteps, dim, p, c_pow, c_f, f_half):
    u = np.empty(nsteps + 1)
    du = np.empty(nsteps + 1)
    rk4_radial(float(a), h_s, nsteps, dim, float(p), float(c_pow), float(c_f),
               f_half, u, du)
    return u, du


def _simpson(y: np.ndarray, h: float) -> float:
    n = len(y) - 1
    if n % 2:
        raise ValueError("Simpson rule needs an even interval count")
    return (h / 3.0) * float(y[0] + y[-1] + 4.0 * np.sum(y[1:-1:2])
                             + 2.0 * np.sum(y[2:-1:2]))


class _ShootingSetup:
    """Geometry bookkeeping shared by the oracle entry points."""

    def __init__(self, mesh: DomainMesh, refine: int, f_fn):
        if refine < 2 or refine % 2:
            raise ValueError("refine must be an even integer >= 2")
        if mesh.kind == "ball":
            self.dim = 3
            self.R = mesh.extents[0]
            n_axis = round(self.R / mesh.h)
            self.nsteps = refine * n_axis
            self.h_s = mesh.h / refine
            self.node_index = np.arange(mesh.shape[0]) * refine
        elif mesh.kind == "interval":
            # mirror about the midpoint: symmetric data assumed
            self.dim = 1
            self.R = 0.5 * mesh.extents[0]
            n_axis = round(mesh.extents[0] / mesh.h)
            self.nsteps = refine * n_axis
            self.h_s = mesh.h / (2 * refine)
            center = _interval_center(mesh)
            off = np.abs(mesh.coords[0] - center) / self.h_s
            self.node_index = np.rint(off).astype(int)
        else:
            raise MeshError("shooting needs an interval or radial-ball mesh")
        rq = 0.5 * self.h_s * np.arange(2 * self.nsteps + 1)
        if f_fn is None:
            self.f_half = np.zeros(2 * self.nsteps + 1)
        elif mesh.kind == "interval":
            center = _interval_center(mesh)
            self.f_half = np.asarray(f_fn(center + rq), dtype=float)
        else:
            self.f_half = np.asarray(f_fn(rq), dtype=float)
        self.mesh = mesh

    def shoot(self, a, p, c_pow, c_f):
        return _shoot_profile(a, self.h_s, self.nsteps, self.dim, p, c_pow,
                              c_f, self.f_half)

    def endpoint(self, a, p, c_pow, c_f) -> float:
        return float(self.shoot(a, p, c_pow, c_f)[0][-1])

    def to_grid(self, prof: np.ndarray) -> GridFunction:
        return GridFunction(self.mesh, prof[self.node_index])

    def gradient_sq(self, du: np.ndarray) -> float:
        r = self.h_s * np.arange(self.nsteps + 1)
        if self.dim == 3:
            integrand = 4.0 * np.pi * r**2 * du**2
        else:
            integrand = 2.0 * du**2  # both mirror halves
        return _simpson(integrand, self.h_s)


def _bisect_center_value(setup: _ShootingSetup, p, c_pow, c_f) -> float:
    """Center value whose profile hits zero at the boundary radius."""
    ladder = 2.0 ** np.arange(-30, 62, dtype=float)
    prev_a = 0.0
    prev_val = setup.endpoint(0.0, p, c_pow, c_f)
    if prev_val == 0.0 and c_f != 0.0:
        return 0.0
    lo = hi = None
    for a in ladder:
        val = setup.endpoint(a, p, c_pow, c_f)
        if not np.isfinite(val):
            break
        if val == 0.0:
            return float(a)
        if prev_val != 0.0 and np.sign(val) != np.sign(prev_val):
            lo, hi = prev_a, float(a)
            flo = prev_val
            break
        prev_a, prev_val = float(a), val
    if lo is None:
        raise ConvergenceError("no sign change in the shooting map over the bracket")
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        fmid = setup.endpoint(mid, p, c_pow, c_f)
        if fmid == 0.0:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def shooting_solve(mesh: DomainMesh, p: float, c_pow: float = 1.0,
                   c_f: float = 0.0, f_fn=None, refine: int = 8) -> GridFunction:
    """Oracle for Delta u + c_pow (u+)^p + c_f f = 0, radial or mirrored 1-D.

    Integrates outward with u'(0) = 0 and bisects on u(0) until the
    profile vanishes at the boundary; the bracket scan picks the smallest
    positive crossing, i.e. the minimal solution branch.  Interval meshes
    are solved on the half domain, so f must be symmetric about the
    midpoint.
    """
    setup = _ShootingSetup(mesh, refine, f_fn)
    a = _bisect_center_value(setup, p, c_pow, c_f)
    prof, _ = setup.shoot(a, p, c_pow, c_f)
    return setup.to_grid(prof)


@dataclass(frozen=True)
class HomogeneousProbe:
    found: bool
    t: float | None  # consistency root |grad u|^{2 alpha}
    solution: GridFunction | None
    boundary_defect: float  # |u(R)| of the underlying profile
    consistency_defect: float  # |zeta(t)| at the root


def homogeneous_shooting(mesh: DomainMesh, p: float, alpha: float, b: float,
                         refine: int = 8) -> HomogeneousProbe:
    """Existence probe for the unforced problem via scalar consistency.

    The unforced semilinear profile scales exactly, so the nonlocal
    problem reduces to zeta(t) = (1+bt)^{2 alpha/(p-1)} G - t with
    G = |grad w|^{2 alpha} of the base profile.  Above the threshold the
    map stays above the diagonal and no solution exists; below it the
    smallest root is returned along with the scaled profile.
    """
    setup = _ShootingSetup(mesh, refine, None)
    a = _bisect_center_value(setup, p, 1.0, 0.0)
    prof, dprof = setup.shoot(a, p, 1.0, 0.0)
    boundary_defect = abs(float(prof[-1]))
    G = setup.gradient_sq(dprof) ** alpha
    beta = 2.0 * alpha / (p - 1.0)

    def zeta(t):
        return (1.0 + b * t) ** beta * G - t

    if beta > 1.0:
        slope0 = beta * b * G
        if slope0 >= 1.0:
            return HomogeneousProbe(False, None, None, boundary_defect, math.inf)
        t_star = ((slope0) ** (-1.0 / (beta - 1.0)) - 1.0) / b
        if zeta(t_star) > 0.0:
            return HomogeneousProbe(False, None, None, boundary_defect, math.inf)
        lo, hi = 0.0, t_star
    else:
        lo, hi = 0.0, max(1.0, G)
        for _ in range(200):
            if zeta(hi) < 0.0:
                break
            hi *= 2.0
        else:
            return HomogeneousProbe(False, None, None, boundary_defect, math.inf)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if zeta(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    t = 0.5 * (lo + hi)
    scale = (1.0 + b * t) ** (1.0 / (p - 1.0))
    u = GridFunction(mesh, scale * prof[setup.node_index])
    return HomogeneousProbe(True, t, u, boundary_defect, abs(zeta(t)))


def kirchhoff_shooting(mesh: DomainMesh, params: ProblemParams, f_fn=None,
                       refine: int = 8, max_outer: int = 300) -> GridFunction:
    """Shooting oracle for the full forced nonlocal problem.

    ``f_fn`` is the coordinate callable for the forcing (the nodal field
    in ``params.f`` is never touched; the oracle stays off the grid).
    Inner loop: semilinear shooting with the coefficient frozen at
    (1+b t).  Outer loop: damped (factor 0.5) fixed point on
    t = |grad u|^{2 alpha} until |dt| <= 1e-10, the gradient taken from
    the fine profile by Simpson quadrature.
    """
    if params.lam > 0.0 and f_fn is None:
        raise ValueError("a forced problem needs the forcing callable f_fn")
    setup = _ShootingSetup(mesh, refine, f_fn)
    t = 0.0
    for _ in range(max_outer):
        coeff = 1.0 + params.b * t
        a = _bisect_center_value(setup, params.p, 1.0 / coeff, params.lam / coeff)
        prof, dprof = setup.shoot(a, params.p, 1.0 / coeff, params.lam / coeff)
        t_new = setup.gradient_sq(dprof) ** params.alpha
        if abs(t_new - t) <= 1e-10 * max(1.0, t):
            t = t_new
            break
        t += 0.5 * (t_new - t)
    else:
        raise ConvergenceError("outer consistency loop did not settle")
    coeff = 1.0 + params.b * t
    a = _bisect_center_value(setup, params.p, 1.0 / coeff, params.lam / coeff)
    prof, _ = setup.shoot(a, params.p, 1.0 / coeff, params.lam / coeff)
    return setup.to_grid(prof)


# ---------------------------------------------------------------------------
# probes built on the solvers


@dataclass(frozen=True)
class UniquenessRecord:
    lam: float
    count: int
    contraction: float  # C2 + |grad v| C1, nan when nothing was found
    certified: bool  # count <= 1 and contraction < 1


def uniqueness_probe(mesh: DomainMesh, params: ProblemParams, lams,
                     config: SolverConfig) -> list:
    """Distinct-solution count per lambda plus the contraction quantity.

    The quantity C2 + |grad v| C1 with C1 = 2 alpha b (2|grad v|)^{2a-1},
    C2 = (p/lambda_1)(2 sup v)^{p-1} bounds the energy-difference of two
    hypothetical solutions; below 1 it certifies at-most-one.  Counts are
    recorded either way (exploratory at large lambda).
    """
    if regime_letter(params, mesh.dim) != "A":
        raise RegimeError("the uniqueness probe runs in regime A only")
    lam1, _ = constants.eigenpair(mesh)
    out = []
    for lam in lams:
        sols = multi_start(mesh, replace(params, lam=float(lam)), config, 8)
        if sols:
            u = sols[0]
            sem = u.seminorm
            c1 = 2.0 * params.alpha * params.b * (2.0 * sem) ** (2.0 * params.alpha - 1.0)
            c2 = (params.p / lam1) * (2.0 * sup_norm(mesh, u.solution)) ** (params.p - 1.0)
            q = c2 + sem * c1
        else:
            q = float("nan")
        out.append(UniquenessRecord(float(lam), len(sols), q,
                                    len(sols) <= 1 and q < 1.0))
    return out


@dataclass(frozen=True)
class DecayReport:
    lams: tuple
    sup_norms: tuple
    completed: bool
    final_over_first: float
    monotone_ok: bool  # nonincreasing up to the slack factor
    limit_gap: float  # sup|u/lambda - poisson witness| / sup|witness|
    decay_threshold: float = 0.05  # calibration constants, echoed in reports
    monotone_slack: float = 0.10

    @property
    def decay_ok(self) -> bool:
        return self.completed and self.final_over_first <= self.decay_threshold


def supnorm_decay_scan(mesh: DomainMesh, params: ProblemParams, lams,
                       config: SolverConfig | None = None) -> DecayReport:
    """Sup-norm table over a decreasing lambda ladder, warm-started downward.

    Also evaluates the limit profile: u/lambda must approach the plain
    Poisson solution of f as lambda vanishes.  Solver failure aborts the
    scan and returns the partial table with completed=False.
    """
    if regime_letter(params, mesh.dim) != "A":
        raise RegimeError("the decay scan runs in regime A only")
    config = config or SolverConfig()
    lams = [float(l) for l in lams]
    sups = []
    prev = None
    prev_lam = None
    last_solution = None
    completed = True
    for lam in lams:
        if lam == 0.0:
            sups.append(0.0)
            prev, prev_lam = None, None
            continue
        p_lam = replace(params, lam=lam)
        if prev is None:
            start = kirchhoff_linear_solve(mesh, p_lam)
        else:
            start = GridFunction(mesh, prev.values * (lam / prev_lam))
        out = newton_nonlocal(mesh, p_lam, config, start)
        if not out.converged:
            out = descent_minimize(mesh, p_lam, config)
        if not out.converged:
            completed = False
            break
        sups.append(sup_norm(mesh, out.solution))
        prev, prev_lam = out.solution, lam
        last_solution = (out.solution, lam)
    ratio = sups[-1] / sups[0] if len(sups) >= 2 and sups[0] > 0 else float("nan")
    monotone = all(b <= (1.0 + 0.10) * a for a, b in zip(sups, sups[1:]))
    gap = float("nan")
    if last_solution is not None and params.f is not None:
        w = poisson_solve(mesh, params.f.values)
        u, lam = last_solution
        gap = sup_norm(mesh, GridFunction(mesh, u.values / lam - w.values))
        gap /= sup_norm(mesh, w)
    return DecayReport(tuple(lams[:len(sups)]), tuple(sups), completed,
                       ratio, monotone, gap)


def residual_certificate(mesh: DomainMesh, params: ProblemParams, u) -> float:
    """Sup norm of the strong-form defect; the universal acceptance gate."""
    if not isinstance(u, GridFunction):
        u = GridFunction(mesh, np.asarray(u, dtype=float))
    return sup_norm(mesh, energy_gradient(mesh, params, u))

"""Mesh construction, discrete operators, norms and spectral constants."""

import numpy as np
import pytest

from kirchhoff_lab.exceptions import MeshError, MeshMismatchError
from kirchhoff_lab.mesh import (
    GridFunction,
    build_mesh,
    dense_operator,
    h1_seminorm,
    l2_inner,
    laplacian_apply,
    lp_norm,
    poisson_solve,
    principal_eigenpair,
    sobolev_constant,
    sup_norm,
)


def random_field(mesh, rng, nonneg=False):
    vals = rng.standard_normal(mesh.shape)
    if nonneg:
        vals = np.abs(vals)
    return GridFunction(mesh, vals)


def test_interval_mesh_basic():
    mesh = build_mesh("interval", 1.0, 5)
    assert mesh.h == 0.25
    assert mesh.shape == (3,)
    np.testing.assert_allclose(mesh.coords[0], [0.25, 0.5, 0.75])


def test_centered_interval_coords():
    mesh = build_mesh("interval", 1.0, 5, centered=True)
    np.testing.assert_allclose(mesh.coords[0], [-0.25, 0.0, 0.25])


def test_ball_mesh_basic():
    mesh = build_mesh("ball", 1.0, 101)
    assert mesh.dim == 3
    assert mesh.symmetry_origin
    assert mesh.h == pytest.approx(0.01)
    assert mesh.shape == (100,)
    assert mesh.coords[0][0] == 0.0
    # origin carries zero quadrature weight; that is what makes the
    # ghost-node origin row exactly self-adjoint
    assert mesh.weights[0] == 0.0


def test_mesh_rejects_bad_arguments():
    with pytest.raises(MeshError):
        build_mesh("interval", 1.0, 3)
    with pytest.raises(MeshError):
        build_mesh("interval", -1.0, 9)
    with pytest.raises(MeshError):
        build_mesh("hexagon", 1.0, 9)


def test_mesh_mismatch_detected():
    m1 = build_mesh("interval", 1.0, 9)
    m2 = build_mesh("interval", 1.0, 9)
    u = m1.zeros()
    v = m2.zeros()
    with pytest.raises(MeshMismatchError):
        _ = u + v
    with pytest.raises(MeshMismatchError):
        laplacian_apply(m1, v)


# ---------------------------------------------------------------------------
# hand-checked values on the coarse unit interval


def test_torsion_interval_nodal_values():
    # -u'' = 1 on (0,1): u = x(1-x)/2; the 3-point stencil is exact on
    # quadratics so the nodal values at h = 1/4 come out exactly
    mesh = build_mesh("interval", 1.0, 5)
    u = poisson_solve(mesh, np.ones(mesh.shape))
    np.testing.assert_allclose(u.values, [0.09375, 0.125, 0.09375], atol=1e-14)


def test_torsion_interval_seminorm_squared():
    mesh = build_mesh("interval", 1.0, 5)
    u = poisson_solve(mesh, np.ones(mesh.shape))
    assert h1_seminorm(mesh, u) ** 2 == pytest.approx(0.078125, abs=1e-15)


def test_constant_l2_norm_within_quadrature_error():
    mesh = build_mesh("interval", 1.0, 5)
    one = GridFunction(mesh, np.ones(mesh.shape))
    assert abs(lp_norm(mesh, one, 2.0) - 1.0) <= mesh.h


def test_torsion_ball_nodal_values_exact():
    # u = (R^2 - r^2)/6 solves -lap u = 1 on the unit ball; quadratic, so
    # both the generic rows and the ghost-node origin row are exact
    mesh = build_mesh("ball", 1.0, 41)
    u = poisson_solve(mesh, np.ones(mesh.shape))
    r = mesh.coords[0]
    np.testing.assert_allclose(u.values, (1.0 - r**2) / 6.0, atol=1e-13)


# ---------------------------------------------------------------------------
# operator identities


@pytest.mark.parametrize(
    "mesh",
    [
        build_mesh("interval", 1.0, 33),
        build_mesh("rectangle", (1.0, 1.5), (17, 13)),
        build_mesh("ball", 1.0, 33),
    ],
    ids=["interval", "rectangle", "ball"],
)
def test_laplacian_symmetry_and_dirichlet_form(mesh):
    rng = np.random.default_rng(7)
    for _ in range(5):
        u = random_field(mesh, rng)
        v = random_field(mesh, rng)
        Lu = laplacian_apply(mesh, u)
        Lv = laplacian_apply(mesh, v)
        a = l2_inner(mesh, Lu, v)
        b = l2_inner(mesh, u, Lv)
        scale = max(abs(a), abs(b), 1.0)
        assert abs(a - b) <= 1e-12 * scale
        q = l2_inner(mesh, u, Lu)
        s2 = h1_seminorm(mesh, u) ** 2
        assert abs(q - s2) <= 1e-12 * max(s2, 1.0)


@pytest.mark.parametrize(
    "mesh",
    [
        build_mesh("interval", 1.0, 33),
        build_mesh("rectangle", (1.0, 1.0), (13, 13)),
        build_mesh("ball", 1.0, 33),
    ],
    ids=["interval", "rectangle", "ball"],
)
def test_poisson_inverts_laplacian(mesh):
    rng = np.random.default_rng(11)
    f = random_field(mesh, rng)
    u = poisson_solve(mesh, f)
    res = laplacian_apply(mesh, u) - f
    assert sup_norm(mesh, res) <= 1e-9 * max(1.0, sup_norm(mesh, f))


@pytest.mark.parametrize(
    "mesh",
    [
        build_mesh("interval", 1.0, 33),
        build_mesh("rectangle", (1.0, 1.0), (13, 13)),
        build_mesh("ball", 1.0, 33),
    ],
    ids=["interval", "rectangle", "ball"],
)
def test_discrete_strong_maximum_principle(mesh):
    rng = np.random.default_rng(23)
    for _ in range(5):
        vals = np.abs(rng.standard_normal(mesh.shape)) + 1e-3
        u = poisson_solve(mesh, vals)
        assert np.min(u.values) > 0.0


def test_dense_operator_matches_apply():
    for mesh in (
        build_mesh("interval", 1.0, 9),
        build_mesh("rectangle", (1.0, 2.0), (7, 9)),
        build_mesh("ball", 1.0, 9),
    ):
        rng = np.random.default_rng(3)
        u = rng.standard_normal(mesh.shape)
        A = dense_operator(mesh)
        direct = A @ u.ravel()
        via_apply = laplacian_apply(mesh, GridFunction(mesh, u)).values.ravel()
        np.testing.assert_allclose(direct, via_apply, rtol=1e-13, atol=1e-13)


def test_rectangle_eigenfunction_consistency():
    # lap(sin(pi x) sin(pi y)) = 2 pi^2 sin sin; leading truncation error of
    # the 5-point stencil is (h^2/12)(u_xxxx + u_yyyy) = (pi^4 h^2 / 6) u
    errs = {}
    for n in (17, 33):
        mesh = build_mesh("rectangle", (1.0, 1.0), (n, n))
        u = mesh.field_from_callable(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        Lu = laplacian_apply(mesh, u)
        err = sup_norm(mesh, Lu - 2.0 * np.pi**2 * u)
        h = 1.0 / (n - 1)
        assert err <= 1.05 * (np.pi**4 / 6.0) * h**2
        errs[n] = err
    assert 3.5 <= errs[17] / errs[33] <= 4.5


# ---------------------------------------------------------------------------
# spectral constants


def test_interval_principal_eigenvalue_closed_form():
    mesh = build_mesh("interval", 1.0, 129)
    lam, phi = principal_eigenpair(mesh)
    h = mesh.h
    exact = (2.0 - 2.0 * np.cos(np.pi * h)) / h**2
    assert abs(lam - exact) <= 1e-10 * exact
    assert np.min(phi.values) > 0.0
    assert sup_norm(mesh, phi) == pytest.approx(1.0)


def test_ball_principal_eigenvalue_near_pi_squared():
    # continuum value for the unit 3-ball is pi^2
    errs = {}
    for n in (33, 65):
        mesh = build_mesh("ball", 1.0, n)
        lam, phi = principal_eigenpair(mesh)
        errs[n] = abs(lam - np.pi**2)
        assert np.min(phi.values) > 0.0
    assert errs[33] <= 5.0 * (1.0 / 32) ** 2 * np.pi**2
    assert 3.0 <= errs[33] / errs[65] <= 5.0


def test_sobolev_constant_p1_reduces_to_eigenvalue():
    mesh = build_mesh("interval", 1.0, 65)
    lam, _ = principal_eigenpair(mesh)
    S = sobolev_constant(mesh, 1.0)
    assert abs(S - lam) <= 1e-6 * lam


def test_sobolev_constant_low_mode_oracle():
    # brute-force the quotient over the span of the first eigenvectors; the
    # quotient is scale-invariant so sweeping directions suffices.  The
    # minimizer is even about the midpoint, so the odd second mode buys
    # nothing (the two-mode minimum sits ~1.5% above S); the three-mode
    # subspace captures the even correction and lands within 1%.
    mesh = build_mesh("interval", 1.0, 65)
    p = 3.0
    A = dense_operator(mesh)
    _, V = np.linalg.eigh(A)

    def quotient(u):
        gf = GridFunction(mesh, u)
        denom = lp_norm(mesh, gf, p + 1.0) ** 2
        return l2_inner(mesh, gf, laplacian_apply(mesh, gf)) / denom

    two_mode = min(
        quotient(np.cos(t) * V[:, 0] + np.sin(t) * V[:, 1])
        for t in np.linspace(0.0, np.pi, 721, endpoint=False)
    )
    three_mode = min(
        quotient(
            np.cos(t1) * V[:, 0]
            + np.sin(t1) * np.cos(t2) * V[:, 1]
            + np.sin(t1) * np.sin(t2) * V[:, 2]
        )
        for t1 in np.linspace(0.0, np.pi, 90, endpoint=False)
        for t2 in np.linspace(0.0, np.pi, 90, endpoint=False)
    )
    S = sobolev_constant(mesh, p)
    assert S <= two_mode + 1e-10
    assert S <= three_mode + 1e-10
    assert abs(S - three_mode) <= 0.01 * three_mode


def test_sobolev_constant_scale_invariant_start():
    mesh = build_mesh("interval", 1.0, 33)
    _, phi = principal_eigenpair(mesh)
    s1 = sobolev_constant(mesh, 2.0, initial=phi)
    s2 = sobolev_constant(mesh, 2.0, initial=2.0 * phi)
    assert s1 == pytest.approx(s2, rel=1e-10)


def test_lp_norm_rejects_bad_exponent():
    mesh = build_mesh("interval", 1.0, 9)
    with pytest.raises(ValueError):
        lp_norm(mesh, mesh.zeros(), 0.5)

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from ecotone.errors import ConfigError, ConvergenceError, ShapeError
from ecotone.grid import make_grid
from ecotone.operators import (
    HelmholtzSolver, grad_energy, helmholtz_matrix, helmholtz_solve, laplacian_apply, laplacian_matrix,
)


def discrete_eigenvalue(k, n, h):
    return (2.0 / h**2) * (1.0 - np.cos(np.pi * k / (n - 1)))


@pytest.mark.parametrize("grid", [make_grid(1, 1.0, 33), make_grid(2, (1.0, 2.0), (9, 13))])
def test_constants_in_kernel(grid):
    np.testing.assert_allclose(laplacian_apply(grid, np.full(grid.node_count, 3.7)), 0.0, atol=1e-12)


def test_cosine_eigen_relation():
    g = make_grid(1, 1.0, 33)
    lam = discrete_eigenvalue(1, 33, g.spacing[0])
    u = np.cos(np.pi * g.x)
    err = np.max(np.abs(laplacian_apply(g, u) + lam * u))
    assert err <= 1e-12 * lam


def test_linear_field_interior_exact(line):
    out = laplacian_apply(line, 2.0 * line.x + 1.0)
    np.testing.assert_allclose(out[1:-1], 0.0, atol=1e-9)


def test_shape_mismatch(line):
    with pytest.raises(ShapeError):
        laplacian_apply(line, np.zeros(7))


@pytest.mark.parametrize("grid", [make_grid(1, 1.3, 17), make_grid(2, (1.0, 0.5), (7, 5))])
def test_symmetric_in_weighted_product_and_sbp(grid, rng):
    W = np.diag(grid.weights)
    L = laplacian_matrix(grid).toarray()
    np.testing.assert_allclose(W @ L, (W @ L).T, atol=1e-9)
    w = rng.normal(size=grid.node_count)
    lhs = -(grid.weights @ (laplacian_apply(grid, w) * w))
    assert lhs == pytest.approx(grad_energy(grid, w), rel=1e-12)


def test_matrix_matches_apply(rect, rng):
    u = rng.normal(size=rect.node_count)
    np.testing.assert_allclose(laplacian_matrix(rect) @ u, laplacian_apply(rect, u), rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("grid", [make_grid(1, 1.0, 65), make_grid(2, (1.0, 1.0), (17, 17))])
def test_helmholtz_constant_rhs(grid):
    u = helmholtz_solve(grid, np.full(grid.node_count, 2.5))
    np.testing.assert_allclose(u, 2.5, rtol=1e-11)


def test_helmholtz_mode_two():
    g = make_grid(1, 1.0, 65)
    lam = discrete_eigenvalue(2, 65, g.spacing[0])
    rhs = np.cos(2 * np.pi * g.x)
    np.testing.assert_allclose(helmholtz_solve(g, rhs), rhs / (1 + lam), atol=1e-13)


@pytest.mark.parametrize("grid", [make_grid(1, 1.0, 41), make_grid(2, (1.0, 1.0), (15, 15))])
def test_spike_gives_positive_solution(grid):
    rhs = np.zeros(grid.node_count)
    rhs[grid.node_count // 3] = 1.0
    assert np.all(helmholtz_solve(grid, rhs) > 0)


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(0.05, 20.0), d=st.floats(0.01, 5.0), seed=st.integers(0, 10**6),
       two_d=st.booleans())
def test_helmholtz_residual_against_sparse_direct(shift, d, seed, two_d):
    g = make_grid(2, (1.0, 0.7), (9, 12)) if two_d else make_grid(1, 2.0, 50)
    rhs = np.random.default_rng(seed).normal(size=g.node_count)
    u = helmholtz_solve(g, rhs, shift, d, tol=1e-11)
    A = helmholtz_matrix(g, shift, d)
    assert np.max(np.abs(A @ u - rhs)) <= 1e-10 * np.max(np.abs(rhs)) * max(1.0, shift)
    ref = spla.spsolve(A.tocsc(), rhs)
    np.testing.assert_allclose(u, ref, rtol=1e-8, atol=1e-10)


def test_cg_iteration_cap_reports_residual(rect, rng):
    solver = HelmholtzSolver(rect, 1e-3, 1.0, tol=1e-14, max_iter=2)
    with pytest.raises(ConvergenceError) as info:
        solver.solve(rng.normal(size=rect.node_count))
    assert info.value.residual > 0 and len(info.value.history) == 3


def test_bad_solver_parameters(line):
    with pytest.raises(ConfigError):
        HelmholtzSolver(line, 0.0)

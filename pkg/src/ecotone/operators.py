"""Neumann finite-difference operators and Helmholtz solves.

The Laplacian uses second-order central differences with mirror ghost nodes,
so boundary rows read ``2 (u_1 - u_0) / h^2``.  With trapezoidal weights ``W``
the product ``W @ Lap`` is symmetric, which makes ``-Lap`` self-adjoint and
non-negative in the quadrature inner product and gives the summation-by-parts
identity ``(-Lap w, w)_W = grad_energy(w)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .errors import ConfigError, ConvergenceError
from .grid import Grid


def _lap_axis(u: np.ndarray, h: float, axis: int) -> np.ndarray:
    u = np.moveaxis(u, axis, 0)
    out = np.empty_like(u)
    out[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    out[0] = 2.0 * (u[1] - u[0])
    out[-1] = 2.0 * (u[-2] - u[-1])
    return np.moveaxis(out, 0, axis) / (h * h)


def laplacian_apply(grid: Grid, field) -> np.ndarray:
    u = grid.check(field)
    if grid.dim == 1:
        return _lap_axis(u, grid.spacing[0], 0)
    u2 = u.reshape(grid.shape)
    return (_lap_axis(u2, grid.spacing[0], 0) + _lap_axis(u2, grid.spacing[1], 1)).ravel()


def _lap_matrix_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / (h * h)


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    if grid.dim == 1:
        return _lap_matrix_1d(grid.shape[0], grid.spacing[0])
    (nx, ny), (hx, hy) = grid.shape, grid.spacing
    return (
        sp.kron(_lap_matrix_1d(nx, hx), sp.identity(ny))
        + sp.kron(sp.identity(nx), _lap_matrix_1d(ny, hy))
    ).tocsr()


def helmholtz_matrix(grid: Grid, shift: float = 1.0, diffusivity: float = 1.0) -> sp.csr_matrix:
    """Sparse ``-d Lap + sigma I``."""
    return (sigma_identity(grid, shift) - diffusivity * laplacian_matrix(grid)).tocsr()


def sigma_identity(grid: Grid, shift: float) -> sp.csr_matrix:
    return shift * sp.identity(grid.node_count, format="csr")


def grad_energy(grid: Grid, field) -> float:
    """``||grad_h w||^2`` via weighted forward differences on grid edges."""
    u = grid.check(field)
    if grid.dim == 1:
        h = grid.spacing[0]
        return float(np.sum(np.diff(u) ** 2) / h)
    u2 = u.reshape(grid.shape)
    (hx, hy), (wx, wy) = grid.spacing, grid.axis_weights
    ex = np.sum(np.diff(u2, axis=0) ** 2, axis=0) @ wy / hx
    ey = wx @ np.sum(np.diff(u2, axis=1) ** 2, axis=1) / hy
    return float(ex + ey)


class HelmholtzSolver:
    """Solver for ``(-d Lap_h + sigma) u = rhs`` on a fixed grid.

    1D factors the tridiagonal matrix once (LAPACK ``gttrf``); 2D runs
    Jacobi-preconditioned conjugate gradients on the symmetrized system
    ``W A u = W rhs`` and stops on the unweighted max-norm residual.
    """

    def __init__(self, grid: Grid, shift: float, diffusivity: float = 1.0, tol: float = 1e-12,
                 max_iter: int | None = None):
        if not shift > 0 or not diffusivity > 0:
            raise ConfigError(f"need shift > 0 and diffusivity > 0, got {shift}, {diffusivity}")
        if not tol > 0:
            raise ConfigError(f"tolerance must be positive, got {tol}")
        self.grid = grid
        self.shift = float(shift)
        self.diffusivity = float(diffusivity)
        self.tol = float(tol)
        self.max_iter = max_iter or 20 * grid.node_count
        self.last_iterations = 0
        if grid.dim == 1:
            n, h = grid.shape[0], grid.spacing[0]
            c = self.diffusivity / (h * h)
            d = np.full(n, self.shift + 2.0 * c)
            dl = np.full(n - 1, -c)
            du = np.full(n - 1, -c)
            du[0] = -2.0 * c
            dl[-1] = -2.0 * c
            self._lu = lapack.dgttrf(dl, d, du)[:5]
        else:
            self._wmat = grid.weights
            self._diag = self.shift + 2.0 * self.diffusivity * sum(1.0 / h**2 for h in grid.spacing)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.shift * u - self.diffusivity * laplacian_apply(self.grid, u)

    def solve(self, rhs, x0=None) -> np.ndarray:
        b = self.grid.check(rhs, "rhs")
        if self.grid.dim == 1:
            dl, d, du, du2, ipiv = self._lu
            x, info = lapack.dgttrs(dl, d, du, du2, ipiv, b)
            if info != 0:
                raise ConvergenceError(f"tridiagonal solve failed (info={info})")
            return x
        return self._cg(b, x0)

    def _cg(self, b: np.ndarray, x0) -> np.ndarray:
        bnorm = np.max(np.abs(b))
        if bnorm == 0.0:
            return np.zeros_like(b)
        W = self._wmat
        x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
        r = b - self.apply(x)
        history = []
        rw = W * r
        z = rw / (W * self._diag)
        p = z.copy()
        rz = rw @ z
        for it in range(self.max_iter + 1):
            res = np.max(np.abs(r))
            history.append(res)
            if res <= self.tol * bnorm:
                self.last_iterations = it
                return x
            if it == self.max_iter:
                break
            Ap = W * self.apply(p)
            a = rz / (p @ Ap)
            x += a * p
            rw -= a * Ap
            r = rw / W
            z = rw / (W * self._diag)
            rz_new = rw @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise ConvergenceError(
            f"CG did not reach tolerance {self.tol:g} in {self.max_iter} iterations "
            f"(residual {history[-1]:.3e})",
            residual=history[-1], history=history,
        )


@lru_cache(maxsize=64)
def cached_solver(grid: Grid, shift: float, diffusivity: float = 1.0, tol: float = 1e-12) -> HelmholtzSolver:
    return HelmholtzSolver(grid, shift, diffusivity, tol)


def helmholtz_solve(grid: Grid, rhs, shift: float = 1.0, diffusivity: float = 1.0,
                    tol: float = 1e-12) -> np.ndarray:
    """Solve ``(-d Lap_h + sigma) u = rhs`` with Neumann boundary rows."""
    return cached_solver(grid, float(shift), float(diffusivity), float(tol)).solve(rhs)

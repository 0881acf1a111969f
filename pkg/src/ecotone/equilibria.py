"""Steady states of the coupled system and their hyperbolicity.

Equilibria satisfy ``f(v) = alpha w`` and ``(-d Lap_h + beta) w = s v``, or
after eliminating ``w``::

    f(v) - alpha s A^{-1} v = 0,     A = -d Lap_h + beta.

The linearization ``M = diag(f'(v)) - alpha s A^{-1}`` is self-adjoint in the
quadrature inner product, so its smallest singular value in that norm is the
smallest eigenvalue modulus.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ConvergenceError, DomainError, NumericalError, PerturbativeFailure
from .grid import Grid
from .model import SystemParams
from .nonlinearity import NonlinearitySpec
from .operators import cached_solver, helmholtz_matrix

ROOT_TOL = 1e-14
NONHYPERBOLIC = 1e-8
MARGIN_THRESHOLD = 1e-6


# ---------------------------------------------------------------- scalar roots

@dataclass(frozen=True)
class OdeRootSet:
    """Zeros of ``f`` in a scan range, sorted ascending."""

    roots: tuple
    derivatives: tuple
    hyperbolic: tuple
    scale: float

    def __len__(self):
        return len(self.roots)

    @property
    def min_gap(self) -> float:
        r = np.asarray(self.roots)
        return float(np.min(np.diff(r))) if r.size > 1 else math.inf

    def index_of(self, value: float, tol: float = 1e-8) -> int:
        d = np.abs(np.asarray(self.roots) - value)
        k = int(np.argmin(d))
        if d[k] > tol:
            raise DomainError(f"{value} is not a root in {self.roots}")
        return k

    def nearest(self, values) -> np.ndarray:
        r = np.asarray(self.roots)
        return np.argmin(np.abs(np.asarray(values)[..., None] - r), axis=-1)


def _fd_derivative(f, x, h=1e-7):
    return (f(np.array([x + h]))[0] - f(np.array([x - h]))[0]) / (2 * h)


def _polish(f, df, a, b, x0=None):
    """Bisection down to a narrow bracket, then safeguarded Newton."""
    fa = f(np.array([a]))[0]
    for _ in range(200):
        if b - a <= 1e-6 * max(1.0, abs(a)):
            break
        m = 0.5 * (a + b)
        fm = f(np.array([m]))[0]
        if fm == 0.0:
            return m
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    x = x0 if x0 is not None and a <= x0 <= b else 0.5 * (a + b)
    for _ in range(100):
        fx = f(np.array([x]))[0]
        if fx == 0.0:
            return x
        # shrink the bracket with every iterate so the bisection fallback always moves
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b = x
        d = df(x)
        nx = x - fx / d if d != 0.0 else 0.5 * (a + b)
        if not (a < nx < b):
            nx = 0.5 * (a + b)
        if abs(nx - x) <= ROOT_TOL * max(1.0, abs(x)) or b - a <= ROOT_TOL * max(1.0, abs(a)):
            return nx
        x = nx
    return x


def _touching_root(f, dfun, a, b, scale):
    """Root of even multiplicity inside ``[a, b]``: locate the zero of ``f'``."""
    da, db = dfun(a), dfun(b)
    if da == 0.0:
        x = a
    elif db == 0.0:
        x = b
    elif np.sign(da) == np.sign(db):
        return None
    else:
        fd = lambda z: np.array([dfun(float(t)) for t in np.atleast_1d(z)])
        x = _polish(fd, lambda t: (dfun(t + 1e-7) - dfun(t - 1e-7)) / 2e-7, a, b)
    return x if abs(f(np.array([x]))[0]) <= 1e-12 * scale else None


def ode_roots(f, range=(-2.0, 2.0), scan_points: int = 2001, df=None) -> OdeRootSet:
    """Roots of ``f`` on ``range`` by sign-change bracketing plus Newton polish.

    ``f`` is a vectorized scalar map or a :class:`NonlinearitySpec` (whose
    ``df`` is then used).  Roots with ``|f'| < 1e-8`` are kept but flagged
    non-hyperbolic, with a warning.
    """
    if isinstance(f, NonlinearitySpec):
        f, df = f.f, f.df
    if scan_points < 100:
        raise ConfigError("ode_roots needs at least 100 scan points")
    lo, hi = float(range[0]), float(range[1])
    if not hi > lo:
        raise ConfigError(f"degenerate scan range {range}")
    dfun = (lambda x: df(np.array([x]))[0]) if df is not None else (lambda x: _fd_derivative(f, x))
    x = np.linspace(lo, hi, scan_points)
    y = f(x)
    if not np.all(np.isfinite(y)):
        raise DomainError("f is not finite on the scan range")
    scale = max(1.0, float(np.max(np.abs(y))))
    found = []
    for k in np.flatnonzero(y == 0.0):
        found.append(x[k])
    s = np.sign(y)
    for k in np.flatnonzero(s[:-1] * s[1:] < 0):
        found.append(_polish(f, dfun, x[k], x[k + 1]))
    # touching roots: interior local minima of |f| without a sign change
    ay = np.abs(y)
    for k in np.flatnonzero((ay[1:-1] <= ay[:-2]) & (ay[1:-1] <= ay[2:]) & (s[:-2] == s[2:]) & (s[1:-1] != 0)) + 1:
        if ay[k] > 1e-3 * scale:
            continue
        r = _touching_root(f, dfun, x[k - 1], x[k + 1], scale)
        if r is not None and lo <= r <= hi:
            found.append(r)
    found.sort()
    roots = []
    for r in found:
        if not roots or abs(r - roots[-1]) > 1e-9 * max(1.0, abs(r)):
            roots.append(float(r))
    ders = tuple(float(dfun(r)) for r in roots)
    hyp = tuple(abs(d) >= NONHYPERBOLIC for d in ders)
    for r, h in zip(roots, hyp):
        if not h:
            warnings.warn(f"root {r:.6g} is non-hyperbolic (|f'| < {NONHYPERBOLIC})", RuntimeWarning)
    return OdeRootSet(tuple(roots), ders, hyp, scale)


# ---------------------------------------------------------------- inverse of f

@lru_cache(maxsize=64)
def _monotone_on(spec: NonlinearitySpec, lo: float, hi: float) -> float:
    v = np.linspace(lo, hi, 4001)
    return float(np.min(spec.df(v)))


def invert_f(spec: NonlinearitySpec, y, working_range=(-20.0, 20.0)):
    """Solve ``f(v) = y`` (vectorized) for monotone ``f``.

    Newton iteration safeguarded by a bisection bracket; the bracket grows
    beyond ``working_range`` if ``y`` lies outside its image.
    """
    kappa = _monotone_on(spec, float(working_range[0]), float(working_range[1]))
    if not kappa > 0:
        raise DomainError(f"f is not monotone on {tuple(working_range)} (min f' = {kappa:.3g})")
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    lo = np.full_like(y, float(working_range[0]))
    hi = np.full_like(y, float(working_range[1]))
    for _ in range(64):
        low = spec.f(lo) > y
        high = spec.f(hi) < y
        if not (low.any() or high.any()):
            break
        lo = np.where(low, 2 * lo - np.abs(lo) - 1.0, lo)
        hi = np.where(high, 2 * hi + np.abs(hi) + 1.0, hi)
    x = np.clip(y / max(kappa, 1e-300), lo, hi)
    tol = 1e-13 * (1.0 + np.abs(y))
    for _ in range(200):
        r = spec.f(x) - y
        if np.all(np.abs(r) <= tol):
            break
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        nx = x - r / spec.df(x)
        out = ~((nx > lo) & (nx < hi))
        nx = np.where(out, 0.5 * (lo + hi), nx)
        done = np.abs(r) <= tol
        x = np.where(done, x, nx)
    else:
        raise ConvergenceError("invert_f did not converge", residual=float(np.max(np.abs(spec.f(x) - y))))
    return float(x[0]) if scalar else x


# ---------------------------------------------------------------- solutions

@dataclass
class Partition:
    """Node labels indexing into the roots of an :class:`OdeRootSet` (0-based)."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)

    def profile(self, roots: OdeRootSet) -> np.ndarray:
        r = np.asarray(roots.roots)
        if self.labels.min() < 0 or self.labels.max() >= r.size:
            raise DomainError(f"labels must lie in 0..{r.size - 1}")
        return r[self.labels]

    def measures(self, grid: Grid, count: int) -> np.ndarray:
        return np.bincount(self.labels, weights=grid.weights, minlength=count)

    @classmethod
    def split(cls, grid: Grid, at: float, left: int, right: int, axis: int = 0) -> "Partition":
        """Two parts separated by the hyperplane ``x_axis = at``; nodes on it go right."""
        return cls(np.where(grid.coords[:, axis] < at, left, right))

    @classmethod
    def from_boxes(cls, grid: Grid, boxes, default: int) -> "Partition":
        """``boxes`` is a list of ``(lower_corner, upper_corner, label)``; later boxes win."""
        labels = np.full(grid.node_count, int(default))
        c = grid.coords
        for lo, hi, lab in boxes:
            lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
            inside = np.all((c >= lo - 1e-12) & (c <= hi + 1e-12), axis=1)
            labels[inside] = int(lab)
        return cls(labels)


@dataclass
class EquilibriumSolution:
    v0: np.ndarray
    w0: np.ndarray
    alpha: float
    residual: float
    source: str
    margin: float = math.nan
    margin_sign: int = 0
    correction_norm: float | None = None
    labels: np.ndarray | None = None
    base: np.ndarray | None = None
    history: list = field(default_factory=list)

    @property
    def hyperbolic(self) -> bool:
        return bool(self.margin > MARGIN_THRESHOLD)

    def summary(self) -> dict:
        return {
            "residual": self.residual,
            "correction_norm": self.correction_norm,
            "margin": self.margin,
            "source": self.source,
            "alpha": self.alpha,
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")

    def write_csv(self, grid: Grid, path):
        names = ("x",) if grid.dim == 1 else ("x", "y")
        with Path(path).open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(names + ("v0", "w0"))
            for c, v, w in zip(grid.coords, self.v0, self.w0):
                wr.writerow([format(float(z), ".17g") for z in (*c, v, w)])


def _helm(params: SystemParams, tol=1e-13):
    return cached_solver(params.grid, params.decay, params.diffusivity, tol)


def equilibrium_residual(v, params: SystemParams) -> float:
    """``|f(v) - alpha s A^{-1} v|_inf`` via one Helmholtz solve."""
    v = params.grid.check(v)
    w = _helm(params).solve(params.source * v)
    return float(np.max(np.abs(params.nonlinearity.f(v) - params.alpha * w)))


# ---------------------------------------------------------------- monotone case

def solve_monotone_equilibrium(params: SystemParams, w_guess=None, tol: float = 1e-11,
                               max_iter: int = 50, working_range=(-20.0, 20.0),
                               with_margin: bool = True) -> EquilibriumSolution:
    """Newton on ``G(w) = A w / s - f^{-1}(alpha w)``.

    Returns ``v0 = f^{-1}(alpha w0)``, which equals ``A w0 / s`` up to
    ``|G(w0)|`` but keeps ``f(v0) = alpha w0`` exact to rounding; forming
    ``A w0`` directly would add a rounding error of order ``|w0| / dx^2``.
    The Jacobian ``A / s - alpha diag(1 / f'(f^{-1}(alpha w)))`` is factored by
    sparse LU.  On fine grids the rounding floor of ``A w`` (which scales like
    ``|w| / dx^2``) can exceed ``tol``; Newton then stops once the step
    stagnates at that floor and the floor is reported in the history.
    """
    g, a, s = params.grid, params.alpha, params.source
    nl = params.nonlinearity
    A = helmholtz_matrix(g, params.decay, params.diffusivity).tocsc()
    w = np.zeros(g.node_count) if w_guess is None else np.array(g.check(w_guess), dtype=float)
    if w.ndim == 0 or w.size == 1:
        w = np.full(g.node_count, float(w))

    def G(w):
        return A @ w / s - invert_f(nl, a * w, working_range)

    r = G(w)
    history = [float(np.max(np.abs(r)))]
    a_norm = float(abs(A).sum(axis=1).max()) / s
    for _ in range(max_iter):
        floor = 64 * np.finfo(float).eps * a_norm * (1.0 + np.max(np.abs(w)))
        if history[-1] <= max(tol, floor):
            break
        v = invert_f(nl, a * w, working_range)
        J = (A / s - sp.diags(a / nl.df(v))).tocsc()
        dw = spla.spsolve(J, -r)
        lam = 1.0
        for _ in range(30):
            trial = w + lam * dw
            rt = G(trial)
            if np.max(np.abs(rt)) < history[-1] or lam < 1e-6:
                break
            lam *= 0.5
        w, r = trial, rt
        history.append(float(np.max(np.abs(r))))
        if np.max(np.abs(lam * dw)) <= 4 * np.finfo(float).eps * (1 + np.max(np.abs(w))) and history[-1] <= max(tol, 4 * floor):
            break
    else:
        raise ConvergenceError(f"monotone equilibrium Newton stalled at |G| = {history[-1]:.3e}",
                               residual=history[-1], history=history)
    v0 = invert_f(nl, a * w, working_range)
    sol = EquilibriumSolution(v0=v0, w0=w, alpha=a, residual=equilibrium_residual(v0, params),
                              source="monotone-elliptic", history=history)
    if with_margin:
        _attach_margin(sol, params)
    return sol


# ---------------------------------------------------------------- Newton on v

def _jacobian_operator(v, params: SystemParams):
    n = params.grid.node_count
    d = params.nonlinearity.df(v)
    helm = _helm(params)
    c = params.alpha * params.source

    def mv(y):
        return d * y - c * helm.solve(y)

    M = spla.LinearOperator((n, n), matvec=mv, dtype=float)
    with np.errstate(divide="ignore"):
        inv = np.where(d != 0, 1.0 / d, 1.0)
    P = spla.LinearOperator((n, n), matvec=lambda y: inv * y, dtype=float)
    return M, P


def _newton_v(v, params: SystemParams, tol=1e-11, max_iter=40):
    """Damped Newton for ``f(v) - alpha s A^{-1} v = 0`` with GMRES inner solves."""
    nl = params.nonlinearity
    helm = _helm(params)
    c = params.alpha * params.source

    def F(v):
        return nl.f(v) - c * helm.solve(v)

    r = F(v)
    history = [float(np.max(np.abs(r)))]
    for _ in range(max_iter):
        if history[-1] <= tol:
            return v, history
        M, P = _jacobian_operator(v, params)
        dv, info = spla.gmres(M, -r, M=P, rtol=1e-13, atol=1e-15, restart=60, maxiter=20)
        if info < 0:
            raise ConvergenceError("GMRES breakdown in equilibrium Newton", residual=history[-1], history=history)
        lam = 1.0
        while True:
            trial = v + lam * dv
            rt = F(trial)
            if np.max(np.abs(rt)) < history[-1] or lam < 1e-6:
                break
            lam *= 0.5
        v, r = trial, rt
        history.append(float(np.max(np.abs(r))))
    if history[-1] <= tol:
        return v, history
    raise ConvergenceError(f"equilibrium Newton stalled at residual {history[-1]:.3e}",
                           residual=history[-1], history=history)


def partition_equilibrium(partition: Partition, roots: OdeRootSet, params: SystemParams,
                          alpha_max: float = 0.05, tol: float = 1e-11, v_start=None,
                          with_margin: bool = True) -> EquilibriumSolution:
    """Equilibrium near the piecewise-constant profile ``sum u_i chi_i``.

    Newton starts from the profile (or ``v_start``) and the result is refused
    when the correction exceeds a quarter of the smallest gap between roots,
    i.e. when the iteration has left the perturbative regime.
    """
    if params.alpha > alpha_max:
        raise DomainError(f"alpha={params.alpha} exceeds alpha_max={alpha_max}")
    used = np.unique(partition.labels)
    if used.min() < 0 or used.max() >= len(roots):
        raise DomainError(f"labels must lie in 0..{len(roots) - 1}")
    for k in used:
        if not roots.hyperbolic[k]:
            raise DomainError(f"root {roots.roots[k]:.6g} is non-hyperbolic")
    base = partition.profile(roots)
    start = base.copy() if v_start is None else params.grid.check(v_start).copy()
    try:
        v, history = _newton_v(start, params, tol)
    except ConvergenceError as exc:
        raise PerturbativeFailure(f"{exc}; try a smaller alpha") from exc
    theta = float(np.max(np.abs(v - base)))
    if theta > roots.min_gap / 4:
        raise PerturbativeFailure(
            f"correction {theta:.3g} exceeds a quarter of the root gap {roots.min_gap:.3g}; "
            "the solution left the perturbative regime, try a smaller alpha"
        )
    w = _helm(params).solve(params.source * v)
    sol = EquilibriumSolution(
        v0=v, w0=w, alpha=params.alpha, residual=equilibrium_residual(v, params), source="partition",
        correction_norm=theta, labels=partition.labels.copy(), base=base, history=history,
    )
    if with_margin:
        _attach_margin(sol, params)
    return sol


def _scalar_newton(g, dg, x, iters=100):
    for _ in range(iters):
        gx, dgx = g(x), dg(x)
        if gx == 0.0:
            break
        if dgx == 0.0:
            raise DomainError(f"degenerate level {x:.6g}: vanishing derivative")
        step = gx / dgx
        x -= step
        if abs(step) <= ROOT_TOL * max(1.0, abs(x)):
            break
    return x


def homogeneous_levels(spec: NonlinearitySpec, alpha: float, vbar: float, vtilde: float,
                       decay: float = 1.0, source: float = 1.0):
    """Refine guesses to a constant equilibrium ``f(vb) = alpha s vb / beta`` and a companion ``f(vt) = f(vb)``."""
    k = alpha * source / decay
    f = lambda x: float(spec.f(np.array([x]))[0])
    df = lambda x: float(spec.df(np.array([x]))[0])
    vb = _scalar_newton(lambda x: f(x) - k * x, lambda x: df(x) - k, float(vbar))
    target = f(vb)
    vt = _scalar_newton(lambda x: f(x) - target, df, float(vtilde))
    if abs(vt - vb) < 1e-8:
        raise DomainError("companion level coincides with the homogeneous equilibrium")
    return vb, vt


def neumann_eigenvalues(grid: Grid) -> np.ndarray:
    """All eigenvalues of ``-Lap_h`` (mirror Neumann), sorted."""
    per_axis = [(2.0 / h**2) * (1.0 - np.cos(np.pi * np.arange(n) / (n - 1)))
                for n, h in zip(grid.shape, grid.spacing)]
    lam = per_axis[0]
    for extra in per_axis[1:]:
        lam = (lam[:, None] + extra[None, :]).ravel()
    return np.sort(lam)


def homogeneous_margin(spec: NonlinearitySpec, vbar: float, params: SystemParams) -> float:
    """Signed smallest-modulus eigenvalue of ``f'(vb) - alpha s (d lam_k + beta)^{-1}``."""
    lam = neumann_eigenvalues(params.grid)
    d = float(spec.df(np.array([vbar]))[0])
    mu = d - params.alpha * params.source / (params.diffusivity * lam + params.decay)
    k = int(np.argmin(np.abs(mu)))
    return float(mu[k])


def near_homogeneous_equilibrium(vbar: float, vtilde: float, omega2, params: SystemParams,
                                 delta0: float | None = None, tol: float = 1e-11,
                                 with_margin: bool = True) -> EquilibriumSolution:
    """Equilibrium close to ``vb chi_1 + vt chi_2`` for a small set ``omega2``.

    ``vbar`` and ``vtilde`` are refined by scalar Newton into an exact constant
    equilibrium and its companion level before use.  ``omega2`` is a boolean
    node mask; its quadrature measure must not exceed ``delta0`` (default
    ``0.05 |Omega|``).  The reported correction is ``|v - v12|_inf``.
    """
    g, nl = params.grid, params.nonlinearity
    mask = np.asarray(omega2, dtype=bool).ravel()
    if mask.shape != (g.node_count,):
        raise ConfigError("omega2 mask does not match the grid")
    delta0 = 0.05 * g.volume if delta0 is None else float(delta0)
    meas = float(g.weights @ mask)
    if meas > delta0 * (1 + 1e-12):
        raise DomainError(f"|Omega_2| = {meas:.4g} exceeds delta0 = {delta0:.4g}")
    vb, vt = homogeneous_levels(nl, params.alpha, vbar, vtilde, params.decay, params.source)
    mu = homogeneous_margin(nl, vb, params)
    if abs(mu) <= MARGIN_THRESHOLD:
        raise DomainError(f"homogeneous equilibrium {vb:.6g} is not hyperbolic (margin {mu:.3g})")
    base = np.where(mask, vt, vb)
    try:
        v, history = _newton_v(base.copy(), params, tol)
    except ConvergenceError as exc:
        raise PerturbativeFailure(f"{exc}; try a smaller Omega_2") from exc
    corr = float(np.max(np.abs(v - base)))
    if corr > abs(vb - vt) / 4:
        raise PerturbativeFailure(f"correction {corr:.3g} left the neighbourhood of the seed; shrink Omega_2")
    w = _helm(params).solve(params.source * v)
    sol = EquilibriumSolution(
        v0=v, w0=w, alpha=params.alpha, residual=equilibrium_residual(v, params),
        source="near-homogeneous", correction_norm=corr, labels=mask.astype(int), base=base,
        history=history,
    )
    if with_margin:
        _attach_margin(sol, params)
    return sol


# ---------------------------------------------------------------- hyperbolicity

@dataclass(frozen=True)
class Margin:
    value: float  # signed eigenvalue of smallest modulus
    form: str

    @property
    def sigma_min(self) -> float:
        return abs(self.value)

    @property
    def hyperbolic(self) -> bool:
        return self.sigma_min > MARGIN_THRESHOLD


def _margin_jacobian(v, params: SystemParams) -> float:
    """Shift-invert Lanczos on the symmetrized ``W^{1/2} M W^{-1/2}``.

    ``M^{-1} y = (A D - alpha s I)^{-1} A y`` with one sparse LU, so the
    eigenvalue of ``M`` closest to zero is the largest-modulus eigenvalue of
    the inverse.
    """
    g = params.grid
    n = g.node_count
    d = params.nonlinearity.df(v)
    c = params.alpha * params.source
    if c == 0.0:
        return float(d[np.argmin(np.abs(d))])
    A = helmholtz_matrix(g, params.decay, params.diffusivity).tocsc()
    K = (A @ sp.diags(d) - c * sp.identity(n)).tocsc()
    try:
        lu = spla.splu(K)
    except RuntimeError:
        return 0.0
    sq = np.sqrt(g.weights)

    def op(y):
        return sq * lu.solve(A @ (y / sq))

    if n <= 3:
        dense = np.column_stack([op(e) for e in np.eye(n)])
        mu = np.linalg.eigvals(dense)
        k = int(np.argmax(np.abs(mu)))
        return float(1.0 / mu[k].real)
    L = spla.LinearOperator((n, n), matvec=op, dtype=float)
    try:
        mu = spla.eigsh(L, k=1, which="LM", tol=1e-14, ncv=min(n - 1, 40),
                        v0=np.ones(n), return_eigenvectors=False, maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError("Lanczos did not converge for the hyperbolicity margin",
                               history=list(getattr(exc, "eigenvalues", []))) from exc
    return float(1.0 / mu[0])


def _margin_elliptic(w, params: SystemParams, working_range=(-20.0, 20.0)) -> float:
    """Same spectrum from the elliptic linearization ``A - alpha s (f^{-1})'(alpha w)``.

    ``(A - alpha s D^{-1}) t = mu D^{-1} A t`` with ``D^{-1} = (f^{-1})'`` has
    exactly the eigenvalues of ``M``; solved densely.
    """
    g, nl = params.grid, params.nonlinearity
    v = invert_f(nl, params.alpha * w, working_range)
    dinv = 1.0 / nl.df(v)
    A = helmholtz_matrix(g, params.decay, params.diffusivity).toarray()
    c = params.alpha * params.source
    lhs = A - c * np.diag(dinv)
    rhs = dinv[:, None] * A
    mu = sla.eigvals(lhs, rhs)
    mu = mu[np.isfinite(mu)]
    k = int(np.argmin(np.abs(mu)))
    return float(mu[k].real)


def hyperbolicity_margin(eq, params: SystemParams, form: str = "jacobian") -> Margin:
    """Signed eigenvalue of ``M = diag(f'(v0)) - alpha s A^{-1}`` closest to zero.

    ``form="jacobian"`` works from ``v0`` and ``f'`` (any ``f``).  The
    ``"elliptic"`` form works from ``w0`` through ``f^{-1}`` and requires a
    monotone ``f``; it is a dense independent cross-check for small grids.
    """
    v0 = eq.v0 if isinstance(eq, EquilibriumSolution) else np.asarray(eq, dtype=float)
    if form == "jacobian":
        return Margin(_margin_jacobian(params.grid.check(v0), params), form)
    if form == "elliptic":
        if not isinstance(eq, EquilibriumSolution):
            raise ConfigError("the elliptic form needs an EquilibriumSolution with w0")
        return Margin(_margin_elliptic(eq.w0, params), form)
    raise ConfigError(f"unknown margin form {form!r}")


def _attach_margin(sol: EquilibriumSolution, params: SystemParams):
    try:
        m = hyperbolicity_margin(sol, params)
    except NumericalError:
        sol.margin, sol.margin_sign = math.nan, 0
        return
    sol.margin, sol.margin_sign = m.sigma_min, int(np.sign(m.value))

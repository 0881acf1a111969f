"""System parameters, phase-space states and the forest-model reduction.

The canonical system is::

    v_tt + phi(v) v_t + f(v) = alpha w
    w_t - d Lap w + beta w = s v,      Neumann boundary

with ``d = beta = s = 1`` unless the parameters come from
:func:`forest_reduce`, which keeps the seed equation's own coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigError, ShapeError
from .grid import Grid
from .nonlinearity import NonlinearitySpec, PolyMap


@dataclass(frozen=True)
class SystemParams:
    alpha: float
    nonlinearity: NonlinearitySpec
    grid: Grid
    diffusivity: float = 1.0
    decay: float = 1.0
    source: float = 1.0

    def __post_init__(self):
        # alpha = 0 is admitted: it is the decoupled limit used by several checks.
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")
        for name in ("diffusivity", "decay", "source"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def canonical(self) -> bool:
        return self.diffusivity == self.decay == self.source == 1.0

    def with_alpha(self, alpha: float) -> "SystemParams":
        return replace(self, alpha=float(alpha))


@dataclass(frozen=True)
class FieldState:
    """Discrete phase-space point ``(v, v_t, w)`` at time ``t``."""

    t: float
    v: np.ndarray
    vt: np.ndarray
    w: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "FieldState":
        z = np.zeros(grid.node_count)
        return cls(t, z, z.copy(), z.copy())

    @classmethod
    def from_functions(cls, grid: Grid, v, vt=0.0, w=0.0, t: float = 0.0) -> "FieldState":
        """Sample callables (or constants) at the grid nodes."""
        def sample(g):
            return grid.sample(g) if callable(g) else np.full(grid.node_count, float(g))
        return cls(t, sample(v), sample(vt), sample(w))

    def validate(self, grid: Grid) -> "FieldState":
        for name in ("v", "vt", "w"):
            arr = getattr(self, name)
            if np.shape(arr) != (grid.node_count,):
                raise ShapeError(f"{name} has shape {np.shape(arr)}, expected ({grid.node_count},)")
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} contains non-finite values")
        return self

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.v.copy(), self.vt.copy(), self.w.copy())


@dataclass(frozen=True)
class ForestParams:
    """Coefficients of the young-tree / old-tree / seed model.

    ``gamma`` is the mortality of young trees as a function of old-tree
    density, given as a polynomial so the reduced antiderivatives are exact.
    """

    alpha: float
    beta: float
    delta: float
    d: float
    f: float
    h: float
    gamma: Polynomial = field(default_factory=lambda: Polynomial([1.0]))

    def __post_init__(self):
        for name in ("alpha", "beta", "delta", "d", "f", "h"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"forest parameter {name} must be positive, got {value}")
        if not isinstance(self.gamma, Polynomial):
            object.__setattr__(self, "gamma", Polynomial(np.atleast_1d(np.asarray(self.gamma, float))))


@dataclass(frozen=True)
class ForestReduction:
    nonlinearity: NonlinearitySpec
    alpha: float           # coupling in the v-equation
    diffusivity: float     # heat coefficients of the w-equation
    decay: float
    source: float
    recover_u: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def system_params(self, grid: Grid) -> SystemParams:
        return SystemParams(self.alpha, self.nonlinearity, grid,
                            self.diffusivity, self.decay, self.source)


def forest_reduce(p: ForestParams, working_range=(-20.0, 20.0)) -> ForestReduction:
    """Eliminate the young-tree density ``u = (v_t + h v) / f``.

    The result is the canonical second-order form with
    ``phi~(v) = h + gamma(v) + f``, ``f~(v) = h (gamma(v) + f) v`` and
    coupling ``beta delta f``.  Declared constants of the reduced pair are
    fitted on ``working_range``.
    """
    one = Polynomial([0.0, 1.0])
    phi = p.gamma + (p.h + p.f)
    fr = p.h * (p.gamma + p.f) * one
    F = fr.integ(lbnd=0.0)
    R = (phi * one).integ(lbnd=0.0)

    v = np.linspace(*working_range, 2001)
    beta0 = float(phi(v).min())
    if beta0 <= 0:
        raise ConfigError("h + gamma(v) + f must stay positive on the working range")
    K = max(0.0, -float(fr.deriv()(v).min()))
    gamma0, delta = 1e-3, 1.0
    C = max(0.0, float(np.max(gamma0 * np.abs(v) ** 3 - fr(v) * v)))
    spec = NonlinearitySpec(
        f=PolyMap(fr), df=PolyMap(fr.deriv()), F=PolyMap(F),
        phi=PolyMap(phi), dphi=PolyMap(phi.deriv()), R=PolyMap(R),
        beta0=beta0, K=K, gamma0=gamma0, delta=delta, C=C, name="forest_reduced",
    )

    def recover_u(v, vt):
        return (np.asarray(vt) + p.h * np.asarray(v)) / p.f

    return ForestReduction(
        nonlinearity=spec, alpha=p.beta * p.delta * p.f,
        diffusivity=p.d, decay=p.beta, source=p.alpha, recover_u=recover_u,
    )

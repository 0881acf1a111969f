"""Manufactured-solution convergence studies for the IMEX scheme.

A recipe supplies an exact smooth ``(v, w)``; the forcing that makes it an
exact solution is added to both equations, and errors at the final time are
regressed against the grid spacing or the time step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import StepperConfig, simulate
from .errors import ConfigError
from .grid import make_grid
from .model import FieldState, SystemParams
from .nonlinearity import NonlinearitySpec, monotone_cubic

Field = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ManufacturedRecipe:
    """Exact solution on ``[0, L]`` given through its space-time derivatives.

    Every callable takes ``(t, x)`` with ``x`` the nodal abscissae.
    """

    v: Field
    vt: Field
    vtt: Field
    w: Field
    wt: Field
    wxx: Field
    alpha: float
    nonlinearity: NonlinearitySpec
    extent: float = 1.0
    name: str = "manufactured"

    def forcing(self, x):
        nl, a = self.nonlinearity, self.alpha

        def g(t):
            v, vt = self.v(t, x), self.vt(t, x)
            gv = self.vtt(t, x) + nl.phi(v) * vt + nl.f(v) - a * self.w(t, x)
            gw = self.wt(t, x) - self.wxx(t, x) + self.w(t, x) - v
            return gv, gw

        return g


def heat_only_recipe() -> ManufacturedRecipe:
    """``v = 0`` and ``w = e^{-t} cos(pi x)``; isolates the spatial error of the heat solve."""
    zero = lambda t, x: np.zeros_like(x)
    w = lambda t, x: np.exp(-t) * np.cos(np.pi * x)
    return ManufacturedRecipe(
        v=zero, vt=zero, vtt=zero,
        w=w, wt=lambda t, x: -w(t, x), wxx=lambda t, x: -np.pi**2 * w(t, x),
        alpha=0.0, nonlinearity=monotone_cubic(), name="heat_only",
    )


def coupled_recipe(alpha: float = 0.5, nonlinearity: NonlinearitySpec | None = None) -> ManufacturedRecipe:
    """Smooth coupled solution; the monotone cubic unless ``nonlinearity`` is given."""
    def v(t, x):
        return 0.5 * np.cos(np.pi * x) * np.sin(t + 1.0)

    def vt(t, x):
        return 0.5 * np.cos(np.pi * x) * np.cos(t + 1.0)

    def w(t, x):
        return np.exp(-t) * (1.0 + 0.5 * np.cos(2 * np.pi * x))

    return ManufacturedRecipe(
        v=v, vt=vt, vtt=lambda t, x: -v(t, x),
        w=w, wt=lambda t, x: -w(t, x),
        wxx=lambda t, x: -2 * np.pi**2 * np.exp(-t) * np.cos(2 * np.pi * x),
        alpha=alpha, nonlinearity=nonlinearity or monotone_cubic(), name="coupled",
    )


def run_error(recipe: ManufacturedRecipe, nodes: int, dt: float, T: float) -> float:
    """Max nodal error over ``v`` and ``w`` at time ``T``."""
    grid = make_grid(1, recipe.extent, nodes)
    x = grid.x
    params = SystemParams(recipe.alpha, recipe.nonlinearity, grid)
    init = FieldState(0.0, recipe.v(0.0, x), recipe.vt(0.0, x), recipe.w(0.0, x))
    steps = int(round(T / dt))
    rec = simulate(init, params, StepperConfig(T / steps, stride=steps), T, forcing=recipe.forcing(x))
    end = rec.final
    return float(max(np.max(np.abs(end.v - recipe.v(end.t, x))),
                     np.max(np.abs(end.w - recipe.w(end.t, x)))))


def observed_order(sizes, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(size)``."""
    return float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])


@dataclass
class ConvergenceReport:
    spacings: np.ndarray | None = None
    spatial_errors: np.ndarray | None = None
    spatial_order: float | None = None
    dts: np.ndarray | None = None
    temporal_errors: np.ndarray | None = None
    temporal_order: float | None = None

    def as_dict(self) -> dict:
        out = {}
        for k, v in vars(self).items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def manufactured_convergence(
    space_recipe: ManufacturedRecipe | None = None,
    node_counts=(9, 17, 33, 65),
    time_recipe: ManufacturedRecipe | None = None,
    dts=(0.02, 0.01, 0.005, 0.0025),
    *,
    T: float = 0.5,
    cfl: float = 0.5,
    fine_nodes: int = 257,
) -> ConvergenceReport:
    """Observed spatial and temporal orders.

    The spatial study runs ``space_recipe`` on ``node_counts`` with
    ``dt = cfl * dx^2`` so the first-order time error scales like ``dx^2``
    too.  The temporal study runs ``time_recipe`` on a fixed grid of
    ``fine_nodes`` nodes over the step sizes ``dts``.  Either study is skipped
    when its recipe is ``None``.
    """
    rep = ConvergenceReport()
    if space_recipe is not None:
        nodes = [int(n) for n in node_counts]
        if len(nodes) < 3:
            raise ConfigError("spatial study needs at least 3 grid levels")
        hs = np.array([space_recipe.extent / (n - 1) for n in nodes])
        errs = np.array([run_error(space_recipe, n, cfl * h * h, T) for n, h in zip(nodes, hs)])
        rep.spacings, rep.spatial_errors, rep.spatial_order = hs, errs, observed_order(hs, errs)
    if time_recipe is not None:
        steps = np.asarray(dts, dtype=float)
        if steps.size < 3:
            raise ConfigError("temporal study needs at least 3 time-step levels")
        errs = np.array([run_error(time_recipe, fine_nodes, dt, T) for dt in steps])
        rep.dts, rep.temporal_errors, rep.temporal_order = steps, errs, observed_order(steps, errs)
    return rep

"""Composite experiments: stabilization, Lipschitz contrast and the forest model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from .dynamics import StepperConfig, TrajectoryRecord, simulate
from .equilibria import EquilibriumSolution, OdeRootSet, Partition, ode_roots, partition_equilibrium
from .grid import Grid
from .model import FieldState, ForestParams, SystemParams, forest_reduce
from .nonlinearity import NonlinearitySpec
from .ode import basin_labels, rk4
from .operators import laplacian_apply


# ---------------------------------------------------------------- stabilization

@dataclass
class StabilizationReport:
    record: TrajectoryRecord
    equilibrium: EquilibriumSolution
    roots: OdeRootSet
    labels: np.ndarray
    endpoints: np.ndarray
    separatrix_nodes: np.ndarray
    l1: float
    l2: float
    linf: float
    l1_off_separatrix: float
    lip_h: float
    lip_initial: float
    lip_final: float
    kato_violation: float
    kato_scale: float

    def summary(self) -> dict:
        return {
            "l1": self.l1, "l2": self.l2, "linf": self.linf,
            "l1_off_separatrix": self.l1_off_separatrix,
            "separatrix_nodes": self.separatrix_nodes.tolist(),
            "lip_h": self.lip_h, "lip_initial": self.lip_initial, "lip_final": self.lip_final,
            "kato_violation": self.kato_violation, "kato_scale": self.kato_scale,
            "equilibrium": self.equilibrium.summary(),
            "label_counts": np.bincount(self.labels, minlength=len(self.roots)).tolist(),
            "roots": list(self.roots.roots),
        }


def stabilize(params: SystemParams, initial: FieldState, cfg: StepperConfig, T: float,
              label_T: float = 200.0, label_dt: float = 0.01, alpha_max: float = 0.05,
              root_range=(-3.0, 3.0), probes=None, h: float | None = None) -> StabilizationReport:
    """Simulate, then compare with the partition equilibrium implied by basin labels.

    Each node is labelled by the root its initial pair ``(v, v_t)`` reaches
    under the uncoupled limit ODE.  Nodes whose label is a root with
    ``f' < 0`` sit on a stable manifold of an unstable rest point (a
    separatrix); they are reported separately because any perturbation,
    including rounding, can send them to either neighbouring root.
    """
    g, nl = params.grid, params.nonlinearity
    h = 2 * g.min_spacing if h is None else h
    rec = simulate(initial, params, cfg, T, probes=probes, h_list=[h])
    roots = ode_roots(nl, root_range)
    labels, ends = basin_labels(nl, roots, initial.v, initial.vt, label_T, label_dt)
    eq = partition_equilibrium(Partition(labels), roots, params, alpha_max=alpha_max)
    diff = rec.final.v - eq.v0
    unstable = np.array([d < 0 for d in roots.derivatives])
    sep = np.flatnonzero(unstable[labels])
    off = np.ones(g.node_count, dtype=bool)
    off[sep] = False
    bound = dg.kato_bound(rec)
    return StabilizationReport(
        record=rec, equilibrium=eq, roots=roots, labels=labels, endpoints=ends, separatrix_nodes=sep,
        l1=dg.lp_norm(diff, g, 1), l2=dg.lp_norm(diff, g, 2), linf=dg.lp_norm(diff, g, np.inf),
        l1_off_separatrix=float(g.weights[off] @ np.abs(diff[off])),
        lip_h=h, lip_initial=dg.lip_seminorm(initial.v, g, h), lip_final=dg.lip_seminorm(rec.final.v, g, h),
        kato_violation=dg.kato_check(rec), kato_scale=float(np.max(bound)),
    )


# ---------------------------------------------------------------- Lipschitz contrast

def front(grid: Grid, offset: float, amplitude: float, lipschitz: float, center: float | None = None):
    """``offset + amplitude tanh((x - center) / l)`` with Lipschitz constant ``amplitude / l``."""
    x = grid.coords[:, 0]
    c = 0.5 * grid.extents[0] if center is None else center
    width = amplitude / lipschitz
    return offset + amplitude * np.tanh((x - c) / width)


@dataclass
class ContrastRun:
    nonlinearity: str
    lipschitz: float
    record: TrajectoryRecord
    final_seminorms: dict


@dataclass
class ContrastReport:
    runs: list = field(default_factory=list)
    h_smooth: float = 0.05
    h_fine: float = 0.0
    agreement: float = np.nan  # relative gap of monotone seminorms at h_smooth
    ratio: float = np.nan  # non-monotone steep / shallow at h_fine

    def summary(self) -> dict:
        return {
            "h_smooth": self.h_smooth, "h_fine": self.h_fine,
            "monotone_relative_gap": self.agreement, "nonmonotone_ratio": self.ratio,
            "runs": [{"nonlinearity": r.nonlinearity, "lipschitz": r.lipschitz,
                      "final_seminorms": {str(k): v for k, v in r.final_seminorms.items()}} for r in self.runs],
        }


def lipschitz_contrast(grid: Grid, monotone: NonlinearitySpec, nonmonotone: NonlinearitySpec,
                       alpha: float, offset: float, amplitude: float, cfg: StepperConfig, T: float,
                       lipschitz=(10.0, 100.0), h_smooth: float = 0.05) -> ContrastReport:
    """Paired runs from two fronts differing only in steepness, under both nonlinearities."""
    h_fine = 2 * grid.min_spacing
    rep = ContrastReport(h_smooth=h_smooth, h_fine=h_fine)
    finals = {}
    for spec in (monotone, nonmonotone):
        params = SystemParams(alpha, spec, grid)
        for lip in lipschitz:
            v0 = front(grid, offset, amplitude, lip)
            z = np.zeros(grid.node_count)
            rec = simulate(FieldState(0.0, v0, z, z.copy()), params, cfg, T, h_list=[h_fine, h_smooth])
            fin = {h: float(d["seminorm_v"][-1]) for h, d in rec.seminorms.items()}
            rep.runs.append(ContrastRun(spec.name, lip, rec, fin))
            finals[(spec.name, lip)] = fin
    lo, hi = lipschitz[0], lipschitz[-1]
    a, b = finals[(monotone.name, lo)][h_smooth], finals[(monotone.name, hi)][h_smooth]
    rep.agreement = abs(a - b) / max(abs(a), abs(b), 1e-300)
    c, d = finals[(nonmonotone.name, lo)][h_fine], finals[(nonmonotone.name, hi)][h_fine]
    rep.ratio = d / max(c, 1e-300)
    return rep


# ---------------------------------------------------------------- forest model

def forest_rhs(p: ForestParams, grid: Grid):
    """Method-of-lines right-hand side of the young/old/seed system, state ``[u, v, w]``."""
    n = grid.node_count

    def rhs(t, z):
        u, v, w = z[:n], z[n:2 * n], z[2 * n:]
        du = p.beta * p.delta * w - p.gamma(v) * u - p.f * u
        dv = p.f * u - p.h * v
        dw = p.d * laplacian_apply(grid, w) - p.beta * w + p.alpha * v
        return np.concatenate([du, dv, dw])

    return rhs


def canonical_rhs(params: SystemParams):
    """Method-of-lines right-hand side of the canonical system, state ``[v, v_t, w]``."""
    g, nl = params.grid, params.nonlinearity
    n = g.node_count

    def rhs(t, z):
        v, vt, w = z[:n], z[n:2 * n], z[2 * n:]
        vtt = params.alpha * w - nl.phi(v) * vt - nl.f(v)
        wt = params.diffusivity * laplacian_apply(g, w) - params.decay * w + params.source * v
        return np.concatenate([vt, vtt, wt])

    return rhs


@dataclass
class ForestComparison:
    t: np.ndarray
    v_direct: np.ndarray
    v_reduced: np.ndarray
    u_direct: np.ndarray
    u_recovered: np.ndarray
    discrepancy_v: float
    discrepancy_u: float
    imex_discrepancy_v: float | None = None

    def summary(self) -> dict:
        return {"sup_discrepancy_v": self.discrepancy_v, "sup_discrepancy_u": self.discrepancy_u,
                "imex_sup_discrepancy_v": self.imex_discrepancy_v}


def forest_comparison(p: ForestParams, grid: Grid, u0, v0, w0, dt: float, T: float,
                      every: int = 100, with_imex: bool = False) -> ForestComparison:
    """Integrate the seed system directly and through its reduction, both with RK4.

    The reduction is a linear change of variables ``(u, v) -> (v, v_t)`` and
    RK4 commutes with linear maps, so the two routes agree to rounding; any
    larger gap points at an error in the reduction.  With ``with_imex`` the
    reduced system is also stepped by the first-order IMEX scheme and its
    (order ``dt``) gap is reported.
    """
    n = grid.node_count
    u0, v0, w0 = (np.broadcast_to(np.asarray(a, float), (n,)).copy() for a in (u0, v0, w0))
    red = forest_reduce(p)
    params = red.system_params(grid)
    t, Zf = rk4(forest_rhs(p, grid), np.concatenate([u0, v0, w0]), 0.0, T, dt, every)
    vt0 = p.f * u0 - p.h * v0
    _, Zc = rk4(canonical_rhs(params), np.concatenate([v0, vt0, w0]), 0.0, T, dt, every)
    vd, vr = Zf[:, n:2 * n], Zc[:, :n]
    ud, ur = Zf[:, :n], red.recover_u(Zc[:, :n], Zc[:, n:2 * n])
    out = ForestComparison(t, vd, vr, ud, ur, float(np.max(np.abs(vd - vr))), float(np.max(np.abs(ud - ur))))
    if with_imex:
        rec = simulate(FieldState(0.0, v0, vt0, w0), params, StepperConfig(dt, stride=every), T, keep_snapshots=True)
        vi = np.array([s.v for s in rec.snapshots])
        m = min(len(vi), len(vd))
        out.imex_discrepancy_v = float(np.max(np.abs(vi[:m] - vd[:m])))
    return out

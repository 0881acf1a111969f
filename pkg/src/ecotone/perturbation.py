"""Total-variation estimates for forced ODEs near regular attractors.

For ``u' = F(u) + h(t)`` with small ``h`` in ``W^{1,inf}`` and a gradient-like
``F``, the path length obeys an affine bound
``int_0^T |u'| dt <= C1 + C2 int_0^T |h'| dt``.  The lab measures both sides
over several horizons, fits ``(C1, C2)`` and reports how long the trajectory
spends outside small neighbourhoods of the equilibria.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError
from .ode import rk4

Vector = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ForcedOdeProblem:
    F: Vector
    equilibria: np.ndarray
    h: Callable[[float], np.ndarray]
    dh: Callable[[float], np.ndarray]
    eps: float
    u0: np.ndarray
    T: float
    name: str = "forced"

    def __post_init__(self):
        object.__setattr__(self, "u0", np.atleast_1d(np.asarray(self.u0, dtype=float)))
        eq = np.asarray(self.equilibria, dtype=float)
        object.__setattr__(self, "equilibria", eq.reshape(len(eq), -1))
        if self.u0.size > 3:
            raise ConfigError("forced ODE lab is limited to n <= 3")
        if not self.T > 0:
            raise ConfigError("horizon must be positive")
        sup = self.measured_eps()
        if not abs(sup - self.eps) <= 0.05 * max(abs(self.eps), 1e-300) + 1e-15:
            raise ConfigError(f"declared eps={self.eps} differs from sampled sup {sup:.4g} by more than 5%")

    def measured_eps(self, samples: int = 20001) -> float:
        ts = np.linspace(0.0, self.T, samples)
        hs = np.array([np.max(np.abs(self.h(t))) for t in ts])
        ds = np.array([np.max(np.abs(self.dh(t))) for t in ts])
        return float(max(hs.max(), ds.max()))

    def rhs(self, t, u):
        return self.F(u) + self.h(t)

    def with_horizon(self, T: float) -> "ForcedOdeProblem":
        return ForcedOdeProblem(self.F, self.equilibria, self.h, self.dh, self.eps, self.u0, T, self.name)


def sinusoid(eps: float, omega: float = 1.0, n: int = 1):
    """``h = eps sin(omega t)`` in every component and its derivative."""
    h = lambda t: np.full(n, eps * np.sin(omega * t))
    dh = lambda t: np.full(n, eps * omega * np.cos(omega * t))
    return h, dh


def double_well_problem(eps: float = 0.05, omega: float = 1.0, u0: float = 0.3, T: float = 100.0):
    """Gradient flow ``u' = -(u^3 - u) + eps sin(omega t)``."""
    h, dh = sinusoid(eps, omega)
    return ForcedOdeProblem(
        F=lambda u: -(u**3 - u), equilibria=np.array([[-1.0], [0.0], [1.0]]), h=h, dh=dh,
        eps=eps * max(1.0, omega), u0=np.array([u0]), T=T, name="double_well",
    )


def damped_oscillator_problem(spec, eps: float = 0.0, omega: float = 1.0, y0=(0.5, 0.0), T: float = 100.0,
                              roots=(-1.0, 0.0, 1.0)):
    """Limit ODE ``y'' + phi(y) y' + f(y) = h`` as a first-order system in ``(y, y')``."""
    hs, dhs = sinusoid(eps, omega)

    def F(z):
        y, p = z[:1], z[1:]
        return np.concatenate([p, -spec.phi(y) * p - spec.f(y)])

    return ForcedOdeProblem(
        F=F, equilibria=np.array([[r, 0.0] for r in roots]),
        h=lambda t: np.array([0.0, hs(t)[0]]), dh=lambda t: np.array([0.0, dhs(t)[0]]),
        eps=eps * max(1.0, omega), u0=np.asarray(y0, dtype=float), T=T, name="damped_oscillator",
    )


@dataclass
class OdeTrajectory:
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray
    dh: np.ndarray

    def path_length(self) -> np.ndarray:
        """Running ``int |u'| dt`` (trapezoid over samples)."""
        return _cumtrapz(np.linalg.norm(self.du, axis=1), self.t)

    def forcing_variation(self) -> np.ndarray:
        return _cumtrapz(np.linalg.norm(self.dh, axis=1), self.t)


def _cumtrapz(y, t):
    return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))])


def run_perturbed_ode(p: ForcedOdeProblem, dt: float) -> OdeTrajectory:
    """RK4 trajectory; ``u'`` is recorded as ``F(u) + h(t)`` at each sample."""
    t, U = rk4(p.rhs, p.u0, 0.0, p.T, dt)
    du = np.array([p.rhs(tk, uk) for tk, uk in zip(t, U)])
    dh = np.array([p.dh(tk) for tk in t])
    return OdeTrajectory(t, U, du, dh)


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    label: int  # equilibrium index, or -1 outside every neighbourhood

    @property
    def length(self) -> float:
        return self.end - self.start


def segment(traj: OdeTrajectory, equilibria, delta: float = 0.1, T: float | None = None) -> list[Segment]:
    """Maximal runs of samples inside ``O_delta(u_i)`` (or outside all of them).

    Run boundaries sit half-way between samples, so the segments are disjoint,
    increasing and cover ``[0, T]``.
    """
    eq = np.asarray(equilibria, dtype=float).reshape(len(equilibria), -1)
    t = traj.t if T is None else traj.t[traj.t <= T + 1e-12]
    U = traj.u[: t.size]
    dist = np.linalg.norm(U[:, None, :] - eq[None, :, :], axis=2)
    near = np.argmin(dist, axis=1)
    labels = np.where(dist[np.arange(t.size), near] < delta, near, -1)
    mids = np.concatenate([[t[0]], 0.5 * (t[1:] + t[:-1]), [t[-1]]])
    out = []
    start = 0
    for k in range(1, t.size + 1):
        if k == t.size or labels[k] != labels[start]:
            out.append(Segment(float(mids[start]), float(mids[k]), int(labels[start])))
            start = k
    return out


def out_time(segments) -> float:
    return float(sum(s.length for s in segments if s.label < 0))


@dataclass
class PerturbationReport:
    horizons: list
    int_du: list
    int_dh: list
    C1: float
    C2: float
    out_time: list
    passed: bool
    regime_exit: bool = False
    segments: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "horizons": list(map(float, self.horizons)),
            "int_du": list(map(float, self.int_du)),
            "int_dh": list(map(float, self.int_dh)),
            "C1": float(self.C1),
            "C2": float(self.C2),
            "out_time": list(map(float, self.out_time)),
            "pass": bool(self.passed),
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n")


def affine_envelope(x, y):
    """Least-squares ``y ~ C1 + C2 x``; a flat ``x`` gives ``C2 = 0`` and ``C1 = max y``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.ptp(x) <= 1e-12 * max(1.0, np.max(np.abs(x))):
        return float(np.max(y)), 0.0
    C2, C1 = np.polyfit(x, y, 1)
    return float(C1), float(C2)


def tv_check(problem: ForcedOdeProblem, horizons, dt: float = 0.01, eps0: float = 0.1,
             C2_max: float = 100.0, slack: float = 0.1, delta: float = 0.1) -> PerturbationReport:
    """Fit the affine path-length bound over ``horizons`` from one long run.

    Passes when every point lies below ``(1 + slack)`` times the fitted line
    and ``0 <= C2 <= C2_max``.  Forcing larger than ``eps0`` is reported as a
    regime exit with ``passed = False`` instead of raising.
    """
    hs = sorted(float(T) for T in horizons)
    if len(hs) < 3:
        raise ConfigError("tv_check needs at least 3 horizons")
    traj = run_perturbed_ode(problem.with_horizon(hs[-1]), dt)
    L, V = traj.path_length(), traj.forcing_variation()
    idx = [int(np.argmin(np.abs(traj.t - T))) for T in hs]
    int_du = [float(L[k]) for k in idx]
    int_dh = [float(V[k]) for k in idx]
    outs = [out_time(segment(traj, problem.equilibria, delta, T)) for T in hs]
    C1, C2 = affine_envelope(int_dh, int_du)
    fit = C1 + C2 * np.asarray(int_dh)
    below = bool(np.all(np.asarray(int_du) <= (1 + slack) * fit + 1e-12))
    notes = []
    regime_exit = problem.eps > eps0
    if regime_exit:
        notes.append(f"eps={problem.eps} exceeds eps0={eps0}: outside the small-forcing regime")
    if max(outs) > 0 and (max(outs) - min(outs)) > 0.05 * max(outs):
        notes.append("out-of-neighbourhood time keeps growing with the horizon")
    passed = below and 0.0 <= C2 <= C2_max and not regime_exit
    return PerturbationReport(hs, int_du, int_dh, C1, C2, outs, passed, regime_exit,
                              segment(traj, problem.equilibria, delta), notes)


@dataclass
class NodeStabilizationReport:
    nodes: list
    horizons: list
    lhs: np.ndarray  # [horizon, node]: int |v_tt| + |v_t|
    rhs: np.ndarray  # [horizon, node]: alpha int |w_t|
    path_vt: np.ndarray  # [horizon, node]: int |v_t|
    C1: list
    C2: list
    l1_total: list  # aggregated L1 dissipation integral at each horizon
    bounded: bool
    growth: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "nodes": list(map(int, self.nodes)),
            "horizons": list(map(float, self.horizons)),
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "C1": self.C1,
            "C2": self.C2,
            "l1_total": self.l1_total,
            "bounded": self.bounded,
            "growth": self.growth,
        }


def node_stabilization_report(traj, nodes=None, horizons=None, alpha: float | None = None,
                              growth_tol: float = 0.05) -> NodeStabilizationReport:
    """Per-node variation integrals from a probed dynamics trajectory.

    ``traj`` must come from ``simulate(..., probes=nodes)``.  Constants of the
    affine bound are fitted across nodes at every horizon.  ``bounded`` holds
    when the node integrals, ``C1`` and the aggregated L1 integral grow by at
    most ``growth_tol`` (relative, with an absolute floor) between the last two
    horizons.  Earlier horizons may still contain transients, e.g. a node that
    sits on an unstable root and leaves it late; ``growth`` keeps the relative
    growth of the aggregated integral between every consecutive pair.
    """
    probes = list(getattr(traj, "probes", ()))
    if not probes:
        raise ConfigError("trajectory has no probed nodes")
    nodes = probes if nodes is None else [int(n) for n in nodes]
    missing = [n for n in nodes if n not in probes]
    if missing:
        raise ConfigError(f"nodes {missing} were not recorded")
    cols = [probes.index(n) for n in nodes]
    t = np.asarray(traj.t)
    hs = [float(t[-1])] if horizons is None else sorted(float(T) for T in horizons)
    idx = [int(np.argmin(np.abs(t - T))) for T in hs]
    a = traj.meta.get("alpha", 0.0) if alpha is None else alpha
    ivtt = np.asarray(traj.probe_int_vtt)[:, cols]
    ivt = np.asarray(traj.probe_int_vt)[:, cols]
    iwt = np.asarray(traj.probe_int_wt)[:, cols]
    lhs = (ivtt + ivt)[idx]
    rhs = a * iwt[idx]
    fits = [affine_envelope(r, l) for r, l in zip(rhs, lhs)]
    C1 = [max(float(np.max(l - max(c2, 0.0) * r)), 0.0) for (c1, c2), r, l in zip(fits, rhs, lhs)]
    C2 = [max(c2, 0.0) for _, c2 in fits]
    l1 = [float(traj.diss_l1[k]) for k in idx]
    floor = 1e-9
    growth = [float((l1[k] - l1[k - 1]) / max(l1[k - 1], floor)) for k in range(1, len(hs))]
    bounded = True
    if len(hs) > 1:
        for prev, cur in ((lhs[-2], lhs[-1]), (np.array(C1[-2]), np.array(C1[-1])),
                          (np.array(l1[-2]), np.array(l1[-1]))):
            if np.any(cur > (1 + growth_tol) * prev + floor):
                bounded = False
    return NodeStabilizationReport(nodes, hs, lhs, rhs, ivt[idx], C1, C2, l1, bounded, growth)

"""Lie-split IMEX time stepping and trajectory recording.

One step from ``(v, v_t, w)`` at ``t_n``::

    v_t' = (v_t + dt (alpha w - f(v) + g_v(t_n))) / (1 + dt phi(v))
    v'   = v + dt v_t'
    (1 + dt (beta - d Lap_h)) w' = w + dt (s v' + g_w(t_{n+1}))

The velocity update is node-local with the damping taken implicitly; the heat
sub-step is backward Euler.  ``g_v, g_w`` are optional source terms used by
manufactured-solution tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import BlowUpError, ConfigError
from .grid import Grid
from .model import FieldState, SystemParams
from .operators import cached_solver

BLOWUP_THRESHOLD = 1e12

TRAJECTORY_COLUMNS = (
    "t", "lyapunov", "l2_v", "l2_vt", "l2_w", "linf_v", "linf_vt", "linf_w",
    "l1_vt", "l1_wt", "diss_l2", "diss_l1",
)


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    tol: float = 1e-10
    stride: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (0 < self.tol <= 1e-6):
            raise ConfigError(f"solver tolerance must lie in (0, 1e-6], got {self.tol}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ConfigError(f"snapshot stride must be a positive integer, got {self.stride}")


class Stepper:
    """Holds the factored heat operator for a fixed ``(params, dt)``."""

    def __init__(self, params: SystemParams, cfg: StepperConfig):
        self.params = params
        self.cfg = cfg
        dt = cfg.dt
        self.heat = cached_solver(params.grid, 1.0 + dt * params.decay, dt * params.diffusivity, cfg.tol)

    def __call__(self, state: FieldState, forcing=None) -> FieldState:
        p, dt = self.params, self.cfg.dt
        nl = p.nonlinearity
        v, vt, w = state.v, state.vt, state.w
        accel = p.alpha * w - nl.f(v)
        gw = 0.0
        if forcing is not None:
            gv, _ = forcing(state.t)
            _, gw = forcing(state.t + dt)
            accel = accel + gv
        vt1 = (vt + dt * accel) / (1.0 + dt * nl.phi(v))
        v1 = v + dt * vt1
        w1 = self.heat.solve(w + dt * (p.source * v1 + gw), x0=w)
        new = FieldState(state.t + dt, v1, vt1, w1)
        _guard(new)
        return new


def _guard(state: FieldState):
    for name in ("v", "vt", "w"):
        arr = getattr(state, name)
        # NaN fails the comparison, so one reduction covers both cases
        if not np.max(np.abs(arr)) <= BLOWUP_THRESHOLD:
            bad = ~np.isfinite(arr) | (np.abs(arr) > BLOWUP_THRESHOLD)
            node = int(np.argmax(bad))
            raise BlowUpError(
                f"{name} blew up at t={state.t:.6g}, node {node} (value {arr[node]!r})",
                t=state.t, node=node,
            )


def step(state: FieldState, params: SystemParams, cfg: StepperConfig, forcing=None) -> FieldState:
    """Advance ``state`` by one IMEX step of size ``cfg.dt``."""
    state.validate(params.grid)
    return Stepper(params, cfg)(state, forcing)


@dataclass
class TrajectoryRecord:
    """Sampled diagnostics, running dissipation integrals and optional probes.

    ``step_t``, ``step_lyapunov`` and ``step_rate`` are recorded at every
    step regardless of the stride, so the energy identity and the monotonicity
    of the Lyapunov functional can be checked at full resolution.
    ``diss_l2`` accumulates ``int |v_t|^2 + |w_t|^2`` and ``diss_l1``
    accumulates ``int |v_tt|_1 + |v_t|_1 + |w_t|_1``, both by the trapezoid
    rule over every step (not just the samples).  ``probe_*`` arrays have one
    column per probed node; ``probe_int_*`` are running time integrals of the
    absolute values at those nodes.
    """

    grid: Grid
    series: dict = field(default_factory=dict)
    seminorms: dict = field(default_factory=dict)
    probes: tuple = ()
    probe_series: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    final: FieldState | None = None
    meta: dict = field(default_factory=dict)

    def __getattr__(self, name):
        series = self.__dict__.get("series", {})
        if name in series:
            return series[name]
        probe = self.__dict__.get("probe_series", {})
        if name in probe:
            return probe[name]
        raise AttributeError(name)

    def __len__(self):
        return len(self.series.get("t", ()))

    def finalize(self):
        self.series = {k: np.asarray(v, dtype=float) for k, v in self.series.items()}
        self.probe_series = {k: np.asarray(v, dtype=float) for k, v in self.probe_series.items()}
        self.seminorms = {h: {k: np.asarray(v) for k, v in d.items()} for h, d in self.seminorms.items()}
        return self

    def write_csv(self, path):
        write_trajectory_csv(self, path)


class _Recorder:
    def __init__(self, params: SystemParams, h_list, probes, keep_snapshots):
        self.params = params
        self.h_list = list(h_list or ())
        raw = np.asarray(probes if probes is not None else (), dtype=float).ravel()
        if raw.size and (np.any(raw != np.round(raw)) or raw.min() < 0 or raw.max() >= params.grid.node_count):
            raise ConfigError(f"probes must be node indices in 0..{params.grid.node_count - 1}, got {raw.tolist()}")
        self.probes = raw.astype(int)
        self.keep = keep_snapshots
        self.rec = TrajectoryRecord(grid=params.grid, probes=tuple(int(p) for p in self.probes))
        self.rec.meta.update(alpha=params.alpha, decay=params.decay, source=params.source,
                             diffusivity=params.diffusivity, nonlinearity=params.nonlinearity.name)
        self.diss_l2 = 0.0
        self.diss_l1 = 0.0
        self.prev = None
        self.pint = np.zeros((3, len(self.probes)))

    def rates(self, state, vtt, wt):
        q = self.params.grid.weights
        l2 = q @ (state.vt * state.vt) + q @ (wt * wt)
        l1 = q @ np.abs(vtt) + q @ np.abs(state.vt) + q @ np.abs(wt)
        if len(self.probes):
            pr = np.abs(np.stack([vtt[self.probes], state.vt[self.probes], wt[self.probes]]))
        else:
            pr = 0.0
        return l2, l1, pr

    def accumulate(self, state, vtt, wt, dt):
        fine = self.rec.series
        fine.setdefault("step_t", []).append(state.t)
        fine.setdefault("step_lyapunov", []).append(dg.lyapunov(state, self.params))
        fine.setdefault("step_rate", []).append(dg.energy_rate(state.v, state.vt, wt, self.params))
        cur = self.rates(state, vtt, wt)
        if self.prev is not None:
            self.diss_l2 += 0.5 * dt * (self.prev[0] + cur[0])
            self.diss_l1 += 0.5 * dt * (self.prev[1] + cur[1])
            self.pint += 0.5 * dt * (self.prev[2] + cur[2])
        self.prev = cur

    def sample(self, state, vtt, wt):
        s = dg.diagnostic_sample(state, self.params, vtt, wt, self.h_list)
        series = self.rec.series
        for name, value in vars(s).items():
            if name == "seminorms":
                continue
            series.setdefault(name, []).append(value)
        series.setdefault("diss_l2", []).append(self.diss_l2)
        series.setdefault("diss_l1", []).append(self.diss_l1)
        for h, (sv, svt) in s.seminorms.items():
            d = self.rec.seminorms.setdefault(h, {"t": [], "seminorm_v": [], "seminorm_vt": []})
            d["t"].append(state.t)
            d["seminorm_v"].append(sv)
            d["seminorm_vt"].append(svt)
        if len(self.probes):
            ps = self.rec.probe_series
            for name, arr in (("probe_v", state.v), ("probe_vt", state.vt), ("probe_w", state.w),
                              ("probe_vtt", vtt), ("probe_wt", wt)):
                ps.setdefault(name, []).append(arr[self.probes])
            for k, name in enumerate(("probe_int_vtt", "probe_int_vt", "probe_int_wt")):
                ps.setdefault(name, []).append(self.pint[k].copy())
        if self.keep:
            self.rec.snapshots.append(state.copy())


def simulate(initial: FieldState, params: SystemParams, cfg: StepperConfig, T: float,
             probes=None, h_list=None, forcing=None, keep_snapshots: bool = False) -> TrajectoryRecord:
    """Integrate from ``initial`` over ``[t0, t0 + T]``, sampling every ``cfg.stride`` steps.

    ``v_tt`` and ``w_t`` are the scheme's own increments divided by ``dt``; at
    the initial time they come from the equations.  On blow-up the partial
    record is attached to the raised :class:`BlowUpError`.
    """
    if not T > 0:
        raise ConfigError(f"horizon must be positive, got {T}")
    initial.validate(params.grid)
    stepper = Stepper(params, cfg)
    dt = cfg.dt
    n_steps = max(1, math.ceil(T / dt - 1e-9))
    recorder = _Recorder(params, h_list, probes, keep_snapshots)

    state = initial
    vtt, wt = dg.rates_from_equation(state, params, forcing)
    recorder.accumulate(state, vtt, wt, dt)
    recorder.sample(state, vtt, wt)
    t0 = initial.t
    for n in range(1, n_steps + 1):
        try:
            new = stepper(state, forcing)
        except BlowUpError as exc:
            recorder.rec.final = state
            exc.record = recorder.rec.finalize()
            raise
        new = FieldState(t0 + n * dt, new.v, new.vt, new.w)
        vtt = (new.vt - state.vt) / dt
        wt = (new.w - state.w) / dt
        state = new
        recorder.accumulate(state, vtt, wt, dt)
        if n % cfg.stride == 0 or n == n_steps:
            recorder.sample(state, vtt, wt)
    recorder.rec.final = state
    recorder.rec.meta.update(dt=dt, steps=n_steps, T=T)
    return recorder.rec.finalize()


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(rec: TrajectoryRecord, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(TRAJECTORY_COLUMNS)
        cols = [rec.series[c] for c in TRAJECTORY_COLUMNS]
        for row in zip(*cols):
            wr.writerow([_fmt(x) for x in row])
    return path


def write_seminorm_csv(rec: TrajectoryRecord, path):
    path = Path(path)
    rows = []
    for h, d in rec.seminorms.items():
        for t, sv, svt in zip(d["t"], d["seminorm_v"], d["seminorm_vt"]):
            rows.append((t, h, sv, svt))
    rows.sort(key=lambda r: (r[0], r[1]))
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(("t", "h", "seminorm_v", "seminorm_vt"))
        for r in rows:
            wr.writerow([_fmt(x) for x in r])
    return path


def write_snapshot_csv(grid: Grid, state: FieldState, path):
    path = Path(path)
    names = ("x",) if grid.dim == 1 else ("x", "y")
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(names + ("v", "vt", "w"))
        for c, v, vt, w in zip(grid.coords, state.v, state.vt, state.w):
            wr.writerow([_fmt(x) for x in (*c, v, vt, w)])
    return path

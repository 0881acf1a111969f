"""Functionals and norms evaluated along discrete trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .grid import Grid
from .model import FieldState, SystemParams
from .operators import grad_energy, laplacian_apply

_EPS = 1e-9


def lp_norm(field, grid: Grid, p=2) -> float:
    u = grid.check(field)
    if p in (np.inf, "inf", "Inf") or (isinstance(p, float) and math.isinf(p)):
        return float(np.max(np.abs(u)))
    if p == 1:
        return float(grid.weights @ np.abs(u))
    if p == 2:
        return float(np.sqrt(grid.weights @ (u * u)))
    raise DomainError(f"unsupported norm exponent {p!r}; use 1, 2 or inf")


def h1_norm(field, grid: Grid) -> float:
    u = grid.check(field)
    return float(np.sqrt(grid.weights @ (u * u) + grad_energy(grid, u)))


def phase_norm(state: FieldState, grid: Grid) -> float:
    """``max(|v|_inf, |v_t|_inf, |w|_inf + |w|_H1)``."""
    return max(
        lp_norm(state.v, grid, np.inf),
        lp_norm(state.vt, grid, np.inf),
        lp_norm(state.w, grid, np.inf) + h1_norm(state.w, grid),
    )


def lyapunov(state: FieldState, params: SystemParams) -> float:
    """Energy ``|v_t|^2 + 2 (F(v), 1) - 2 alpha (v, w) + alpha (|grad w|^2 + |w|^2)``.

    For non-unit heat coefficients the last term becomes
    ``(alpha / s) (d |grad w|^2 + beta |w|^2)``, which keeps the decay identity.
    """
    g, nl, a = params.grid, params.nonlinearity, params.alpha
    q = g.weights
    v, vt, w = state.v, state.vt, state.w
    heat = (params.diffusivity * grad_energy(g, w) + params.decay * (q @ (w * w))) / params.source
    return float(q @ (vt * vt) + 2.0 * (q @ nl.F(v)) - 2.0 * a * (q @ (v * w)) + a * heat)


def energy_rate(v, vt, wt, params: SystemParams) -> float:
    """Dissipation rate ``2 (phi(v) v_t, v_t) + 2 (alpha / s) |w_t|^2``; ``dL/dt = -rate``."""
    q = params.grid.weights
    phi = params.nonlinearity.phi(v)
    return float(2.0 * (q @ (phi * vt * vt)) + 2.0 * params.alpha / params.source * (q @ (wt * wt)))


def rates_from_equation(state: FieldState, params: SystemParams, forcing=None):
    """Continuous-time ``(v_tt, w_t)`` evaluated from the equations at ``state``."""
    nl, g = params.nonlinearity, params.grid
    gv = gw = 0.0
    if forcing is not None:
        gv, gw = forcing(state.t)
    vtt = params.alpha * state.w - nl.phi(state.v) * state.vt - nl.f(state.v) + gv
    wt = (params.diffusivity * laplacian_apply(g, state.w) - params.decay * state.w
          + params.source * state.v + gw)
    return vtt, wt


def _trapezoid(y, t):
    return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))])


def energy_identity_residual(traj, params: SystemParams | None = None, t1=None, t2=None) -> float:
    """``|L(t2) - L(t1) + int_{t1}^{t2} rate dt|`` by trapezoid over samples.

    Uses the per-step series when the record has them, otherwise the strided
    samples.  ``params`` is accepted for signature symmetry; the record already
    stores the rate series computed with its own parameters.
    """
    rate = getattr(traj, "step_rate", None)
    if rate is not None and len(rate):
        t, L = traj.step_t, traj.step_lyapunov
    else:
        rate = getattr(traj, "energy_rate", None)
        t, L = getattr(traj, "t", ()), getattr(traj, "lyapunov", ())
    if rate is None or len(rate) == 0:
        raise ConfigError("trajectory has no energy-rate series")
    t = np.asarray(t)
    lo = t[0] if t1 is None else t1
    hi = t[-1] if t2 is None else t2
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 2:
        raise ConfigError("segment must contain at least two samples")
    ts, L, r = t[sel], np.asarray(L)[sel], np.asarray(rate)[sel]
    return float(abs(L[-1] - L[0] + _trapezoid(r, ts)[-1]))


def _min_offset(h: float, spacing: float) -> int:
    return max(1, math.ceil(h / spacing - _EPS))


def _check_h(grid: Grid, h: float):
    if not h >= grid.min_spacing * (1 - _EPS):
        raise DomainError(f"separation h={h} is below the grid spacing {grid.min_spacing}")


def _offsets_2d(grid: Grid, h: float, *, inside: bool):
    (nx, ny), (hx, hy) = grid.shape, grid.spacing
    i = np.arange(0, nx)[:, None]
    j = np.arange(-(ny - 1), ny)[None, :]
    dist = np.hypot(i * hx, j * hy)
    ii, jj = np.broadcast_arrays(i, j)
    if inside:
        mask = dist < h * (1 - _EPS)
    else:
        mask = (dist >= h * (1 - _EPS)) & ((ii > 0) | (jj > 0))
    order = np.argsort(dist[mask])
    return ii[mask][order], jj[mask][order], dist[mask][order]


def _shifted_pair(u2, i, j):
    nx, ny = u2.shape
    a = u2[i:, max(j, 0):ny + min(j, 0)]
    b = u2[:nx - i, max(-j, 0):ny - max(j, 0)]
    return a, b


def lip_seminorm(field, grid: Grid, h: float) -> float:
    """``sup |u(x1) - u(x2)| / |x1 - x2|`` over node pairs with ``|x1 - x2| >= h``."""
    _check_h(grid, h)
    u = grid.check(field)
    osc = float(u.max() - u.min())
    if osc == 0.0:
        return 0.0
    best = 0.0
    if grid.dim == 1:
        dx, n = grid.spacing[0], grid.shape[0]
        for k in range(_min_offset(h, dx), n):
            dist = k * dx
            if osc / dist <= best:
                break
            best = max(best, float(np.max(np.abs(u[k:] - u[:-k]))) / dist)
        return best
    u2 = u.reshape(grid.shape)
    for i, j, dist in zip(*_offsets_2d(grid, h, inside=False)):
        if osc / dist <= best:
            break
        a, b = _shifted_pair(u2, int(i), int(j))
        if a.size:
            best = max(best, float(np.max(np.abs(a - b))) / dist)
    return best


def mollify(field, grid: Grid, h: float) -> np.ndarray:
    """Average with a hat kernel ``(1 - |x - y| / h)_+`` against the quadrature weights.

    Near the boundary the kernel is clipped to the domain and renormalized, so
    the weights sum to one at every node.
    """
    _check_h(grid, h)
    u = grid.check(field)
    q = grid.weights
    if grid.dim == 1:
        dx, n = grid.spacing[0], grid.shape[0]
        m = min(n - 1, _min_offset(h, dx))
        num, den = q * u, q.copy()
        for k in range(1, m + 1):
            wk = 1.0 - k * dx / h
            if wk <= 0:
                break
            num[k:] += wk * (q * u)[:-k]
            num[:-k] += wk * (q * u)[k:]
            den[k:] += wk * q[:-k]
            den[:-k] += wk * q[k:]
        return num / den
    qu2, q2 = (q * u).reshape(grid.shape), q.reshape(grid.shape)
    num, den = qu2.copy(), q2.copy()
    for i, j, dist in zip(*_offsets_2d(grid, h, inside=True)):
        i, j = int(i), int(j)
        if i == 0 and j <= 0:
            continue
        wk = 1.0 - dist / h
        for si, sj in ((i, j), (-i, -j)):
            src = (slice(max(-si, 0), grid.shape[0] - max(si, 0)), slice(max(-sj, 0), grid.shape[1] - max(sj, 0)))
            dst = (slice(max(si, 0), grid.shape[0] + min(si, 0)), slice(max(sj, 0), grid.shape[1] + min(sj, 0)))
            num[dst] += wk * qu2[src]
            den[dst] += wk * q2[src]
    return (num / den).ravel()


def default_h_list(grid: Grid) -> list[float]:
    return [2.0 * grid.min_spacing, 0.05, 0.1]


@dataclass
class DiagnosticSample:
    t: float
    lyapunov: float
    l1_v: float
    l2_v: float
    linf_v: float
    l1_vt: float
    l2_vt: float
    linf_vt: float
    l2_w: float
    h1_w: float
    linf_w: float
    l1_wt: float
    l2_wt: float
    linf_wt: float
    l1_vtt: float
    energy_rate: float
    seminorms: dict = field(default_factory=dict)  # h -> (seminorm_v, seminorm_vt)


def diagnostic_sample(state: FieldState, params: SystemParams, vtt, wt, h_list=()) -> DiagnosticSample:
    g = params.grid
    semi = {}
    for h in h_list:
        if h >= g.min_spacing * (1 - _EPS):
            semi[h] = (lip_seminorm(state.v, g, h), lip_seminorm(state.vt, g, h))
    return DiagnosticSample(
        t=state.t,
        lyapunov=lyapunov(state, params),
        l1_v=lp_norm(state.v, g, 1), l2_v=lp_norm(state.v, g, 2), linf_v=lp_norm(state.v, g, np.inf),
        l1_vt=lp_norm(state.vt, g, 1), l2_vt=lp_norm(state.vt, g, 2), linf_vt=lp_norm(state.vt, g, np.inf),
        l2_w=lp_norm(state.w, g, 2), h1_w=h1_norm(state.w, g), linf_w=lp_norm(state.w, g, np.inf),
        l1_wt=lp_norm(wt, g, 1), l2_wt=lp_norm(wt, g, 2), linf_wt=lp_norm(wt, g, np.inf),
        l1_vtt=lp_norm(vtt, g, 1),
        energy_rate=energy_rate(state.v, state.vt, wt, params),
        seminorms=semi,
    )


def kato_bound(traj) -> np.ndarray:
    """``e^{-t} |w_t(0)|_1 + int_0^t e^{-(t-s)} |v_t(s)|_1 ds`` on the sample times.

    Decay and source rates come from the record metadata (1 when absent); the
    convolution is advanced exactly for the exponential and by trapezoid for
    the source.
    """
    t = np.asarray(traj.t)
    a = np.asarray(traj.l1_vt)
    rate = getattr(traj, "meta", {}).get("decay", 1.0)
    src = getattr(traj, "meta", {}).get("source", 1.0)
    out = np.empty_like(t)
    out[0] = traj.l1_wt[0]
    for k in range(1, len(t)):
        dt = t[k] - t[k - 1]
        e = math.exp(-rate * dt)
        out[k] = e * out[k - 1] + 0.5 * dt * src * (e * a[k - 1] + a[k])
    return out


def kato_check(traj) -> float:
    """Worst violation ``max_t (|w_t(t)|_1 - bound(t))``; non-positive when it holds."""
    if len(traj.t) == 0:
        return 0.0
    return float(np.max(np.asarray(traj.l1_wt) - kato_bound(traj)))

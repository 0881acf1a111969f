"""Classical fourth-order Runge-Kutta and the node-wise limit ODE.

With the coupling switched off, every node of the v-equation evolves
independently under ``y'' + phi(y) y' + f(y) = 0``; its attractor is the
basin label used when matching a stabilized state to a partition equilibrium.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BlowUpError, ConfigError
from .nonlinearity import NonlinearitySpec

BLOWUP_THRESHOLD = 1e12


def rk4_step(rhs, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4(rhs, y0, t0: float, T: float, dt: float, every: int = 1, callback=None):
    """Integrate ``y' = rhs(t, y)`` over ``[t0, t0 + T]``.

    Returns ``(t, Y)`` sampled every ``every`` steps (always including both
    ends).  ``callback(t, y)`` is called at every step, including the first.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    n = max(1, math.ceil(T / dt - 1e-9))
    h = T / n
    y = np.array(y0, dtype=float)
    ts, ys = [t0], [y.copy()]
    if callback is not None:
        callback(t0, y)
    for k in range(1, n + 1):
        y = rk4_step(rhs, t0 + (k - 1) * h, y, h)
        t = t0 + k * h
        if not np.max(np.abs(y)) <= BLOWUP_THRESHOLD:
            node = int(np.argmax(~np.isfinite(y) | (np.abs(y) > BLOWUP_THRESHOLD)))
            raise BlowUpError(f"ODE state blew up at t={t:.6g}", t=t, node=node)
        if callback is not None:
            callback(t, y)
        if k % every == 0 or k == n:
            ts.append(t)
            ys.append(y.copy())
    return np.asarray(ts), np.asarray(ys)


def limit_ode_rhs(spec: NonlinearitySpec):
    """Right-hand side for the stacked state ``[y, y']`` of ``y'' + phi(y) y' + f(y) = 0``."""
    def rhs(t, z):
        n = z.size // 2
        y, p = z[:n], z[n:]
        return np.concatenate([p, -spec.phi(y) * p - spec.f(y)])
    return rhs


def basin_labels(spec: NonlinearitySpec, roots, v, vt, T: float = 200.0, dt: float = 0.01):
    """Nearest root index of the limit-ODE endpoint started from ``(v, vt)`` at each node.

    Returns ``(labels, endpoints)``; the endpoints let callers see which nodes
    were still away from every root at ``T``.
    """
    r = np.asarray(roots.roots if hasattr(roots, "roots") else roots, dtype=float)
    z0 = np.concatenate([np.asarray(v, dtype=float), np.asarray(vt, dtype=float)])
    _, Z = rk4(limit_ode_rhs(spec), z0, 0.0, T, dt, every=10**9)
    end = Z[-1][: z0.size // 2]
    return np.argmin(np.abs(end[:, None] - r[None, :]), axis=1), end

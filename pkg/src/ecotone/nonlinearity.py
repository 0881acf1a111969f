"""Nonlinearity pairs ``(f, phi)`` and sampling-based assumption checks.

A :class:`NonlinearitySpec` carries ``f``, ``f'``, ``F`` (antiderivative of
``f`` vanishing at 0), ``phi``, ``phi'`` and ``R(y) = int_0^y phi(s) s ds``
together with the declared constants of the standing hypotheses::

    phi(v) >= beta0,   f(v) v >= -C + gamma0 |v|^(2+delta),   f'(v) >= -K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigError, EvaluationError

ScalarMap = Callable[[np.ndarray], np.ndarray]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class NonlinearitySpec:
    f: ScalarMap
    df: ScalarMap
    F: ScalarMap
    phi: ScalarMap
    dphi: ScalarMap
    R: ScalarMap
    beta0: float
    K: float
    gamma0: float
    delta: float
    C: float
    name: str = "custom"

    def __post_init__(self):
        if not self.beta0 > 0 or not self.gamma0 > 0 or not self.delta > 0:
            raise ConfigError("beta0, gamma0 and delta must be positive")
        if self.K < 0 or self.C < 0:
            raise ConfigError("K and C must be non-negative")


def _const(value: float) -> ScalarMap:
    return lambda v: np.full_like(np.asarray(v, dtype=float), value)


class PolyMap:
    """Callable ascending-coefficient polynomial evaluated by Horner's rule.

    Thin wrapper around :class:`numpy.polynomial.Polynomial` that skips its
    domain mapping, which dominates the cost for the short fields stepped here.
    """

    def __init__(self, poly: Polynomial):
        self.poly = Polynomial(poly.coef)
        coef = np.trim_zeros(np.asarray(poly.coef, dtype=float), "b")
        self.coef = coef if coef.size else np.zeros(1)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = np.full_like(v, self.coef[-1])
        for c in self.coef[-2::-1]:
            out = out * v + c
        return out

    def deriv(self) -> "PolyMap":
        return PolyMap(self.poly.deriv())

    def __repr__(self):
        return f"PolyMap({list(self.coef)})"


def polynomial_spec(
    f_coeffs,
    phi_coeffs=(1.0,),
    *,
    beta0: float,
    K: float,
    gamma0: float,
    delta: float,
    C: float,
    name: str = "polynomial",
) -> NonlinearitySpec:
    """Spec from ascending polynomial coefficients of ``f`` and ``phi``.

    All derived maps are exact polynomial operations, so ``F`` and ``R`` are
    consistent with ``f`` and ``phi`` to rounding.
    """
    fp = Polynomial(np.asarray(f_coeffs, dtype=float))
    pp = Polynomial(np.asarray(phi_coeffs, dtype=float))
    Fp = fp.integ(lbnd=0.0)
    Rp = (pp * Polynomial([0.0, 1.0])).integ(lbnd=0.0)
    return NonlinearitySpec(
        f=PolyMap(fp), df=PolyMap(fp.deriv()), F=PolyMap(Fp),
        phi=PolyMap(pp), dphi=PolyMap(pp.deriv()), R=PolyMap(Rp),
        beta0=beta0, K=K, gamma0=gamma0, delta=delta, C=C, name=name,
    )


def monotone_cubic() -> NonlinearitySpec:
    """``f(v) = v + v^3``, ``phi = 1``; ``f' >= 1`` everywhere."""
    return polynomial_spec(
        [0.0, 1.0, 0.0, 1.0], [1.0],
        beta0=1.0, K=0.0, gamma0=1.0, delta=2.0, C=0.0, name="monotone_cubic",
    )


def bistable_cubic() -> NonlinearitySpec:
    """``f(v) = v^3 - v``, ``phi = 1``; roots -1, 0, 1."""
    # v^4 - v^2 >= -1/2 + v^4/2
    return polynomial_spec(
        [0.0, -1.0, 0.0, 1.0], [1.0],
        beta0=1.0, K=1.0, gamma0=0.5, delta=2.0, C=0.5, name="bistable_cubic",
    )


CATALOG = {
    "monotone_cubic": monotone_cubic,
    "bistable_cubic": bistable_cubic,
}


def from_catalog(name: str) -> NonlinearitySpec:
    try:
        return CATALOG[name]()
    except KeyError:
        raise ConfigError(f"unknown nonlinearity {name!r}; choose from {sorted(CATALOG)}") from None


@dataclass
class CheckResult:
    passed: bool
    worst_v: float
    margin: float  # min over samples of (lhs - rhs); negative on failure


@dataclass
class ValidationReport:
    checks: dict[str, CheckResult] = field(default_factory=dict)
    monotone: bool = False
    kappa0: float = float("nan")

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def summary(self) -> str:
        lines = [
            f"{k}: {'pass' if c.passed else 'FAIL'} (margin {c.margin:.3g} at v={c.worst_v:.6g})"
            for k, c in self.checks.items()
        ]
        lines.append(f"monotone: {self.monotone} (min f' = {self.kappa0:.6g})")
        return "\n".join(lines)


def _evaluate(func: ScalarMap, v: np.ndarray, label: str) -> np.ndarray:
    with np.errstate(all="ignore"):
        out = np.asarray(func(v), dtype=float) * np.ones_like(v)
    bad = ~np.isfinite(out)
    if bad.any():
        point = float(v[np.argmax(bad)])
        raise EvaluationError(f"{label} is not finite at v={point!r}", point=point)
    return out


def _check(margin: np.ndarray, v: np.ndarray, tol: float = 0.0) -> CheckResult:
    i = int(np.argmin(margin))
    return CheckResult(passed=bool(margin[i] >= -tol), worst_v=float(v[i]), margin=float(margin[i]))


def _segment_integrals(func: ScalarMap, v: np.ndarray, label: str) -> np.ndarray:
    a, b = v[:-1], v[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = _evaluate(func, pts.ravel(), label).reshape(pts.shape)
    return half * (vals @ _GL_WEIGHTS)


def validate_assumptions(spec: NonlinearitySpec, range=(-20.0, 20.0), samples: int = 1000) -> ValidationReport:
    """Check the standing hypotheses on ``samples`` equispaced points of ``range``.

    Besides the three inequalities, the report checks that ``F`` and ``R``
    match quadratures of ``f`` and ``v*phi`` on every sample interval, and
    records whether ``f' >= kappa0 > 0`` holds (the monotone case).
    """
    lo, hi = (float(r) for r in range)
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise ConfigError(f"degenerate sampling range {range!r}")
    if samples < 100:
        raise ConfigError(f"need at least 100 samples, got {samples}")
    v = np.linspace(lo, hi, samples)
    f = _evaluate(spec.f, v, "f")
    phi = _evaluate(spec.phi, v, "phi")
    df = _evaluate(spec.df, v, "f'")
    F = _evaluate(spec.F, v, "F")
    R = _evaluate(spec.R, v, "R")

    rep = ValidationReport()
    rep.checks["damping_lower_bound"] = _check(phi - spec.beta0, v)
    rep.checks["dissipativity"] = _check(f * v + spec.C - spec.gamma0 * np.abs(v) ** (2 + spec.delta), v)
    rep.checks["one_sided_lipschitz"] = _check(df + spec.K, v)

    fint = _segment_integrals(spec.f, v, "f")
    rint = _segment_integrals(lambda s: spec.phi(s) * s, v, "phi")
    ftol = 1e-9 * (1.0 + np.max(np.abs(F)))
    rtol = 1e-9 * (1.0 + np.max(np.abs(R)))
    rep.checks["antiderivative_F"] = _check(-np.abs(np.diff(F) - fint), v[:-1], ftol)
    rep.checks["antiderivative_R"] = _check(-np.abs(np.diff(R) - rint), v[:-1], rtol)
    for key, func, tol in (("antiderivative_F", spec.F, ftol), ("antiderivative_R", spec.R, rtol)):
        at_zero = abs(float(np.asarray(func(0.0))))
        if at_zero > tol:
            rep.checks[key] = CheckResult(False, 0.0, -at_zero)

    rep.kappa0 = float(df.min())
    rep.monotone = bool(rep.kappa0 > 0)
    return rep

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecotone.errors import ConfigError, EvaluationError
from ecotone.nonlinearity import (
    NonlinearitySpec, bistable_cubic, from_catalog, monotone_cubic, polynomial_spec,
    validate_assumptions,
)


def test_monotone_cubic_passes_with_kappa_one(mono):
    rep = validate_assumptions(mono, (-10, 10), 1001)
    assert rep.passed, rep.summary()
    assert rep.monotone
    assert rep.kappa0 == pytest.approx(1.0, abs=1e-12)


def test_bistable_cubic_passes_but_not_monotone(bist):
    rep = validate_assumptions(bist, (-10, 10), 1001)
    for key in ("damping_lower_bound", "dissipativity", "one_sided_lipschitz"):
        assert rep.checks[key].passed
    assert not rep.monotone


def test_negative_identity_fails_dissipativity():
    spec = polynomial_spec([0.0, -1.0], beta0=1.0, K=1.0, gamma0=1.0, delta=2.0, C=0.0)
    rep = validate_assumptions(spec, (-1, 1), 200)
    chk = rep.checks["dissipativity"]
    assert not chk.passed
    assert chk.margin < 0
    assert abs(chk.worst_v) > 0


def test_inconsistent_antiderivative_is_caught(mono):
    bad = NonlinearitySpec(
        f=mono.f, df=mono.df, F=lambda v: 0.5 * np.asarray(v) ** 2, phi=mono.phi, dphi=mono.dphi,
        R=mono.R, beta0=1.0, K=0.0, gamma0=1.0, delta=2.0, C=0.0,
    )
    rep = validate_assumptions(bad, (-3, 3), 300)
    assert not rep.checks["antiderivative_F"].passed
    assert rep.checks["antiderivative_R"].passed


def test_nonfinite_evaluation_names_point(mono):
    spec = NonlinearitySpec(
        f=lambda v: 1.0 / np.asarray(v), df=mono.df, F=mono.F, phi=mono.phi, dphi=mono.dphi, R=mono.R,
        beta0=1.0, K=0.0, gamma0=1.0, delta=2.0, C=0.0,
    )
    with pytest.raises(EvaluationError) as info:
        validate_assumptions(spec, (-1, 1), 101)
    assert info.value.point == 0.0


@pytest.mark.parametrize("rng_,samples", [((1, 1), 200), ((0, 1), 50)])
def test_bad_sampling_arguments(mono, rng_, samples):
    with pytest.raises(ConfigError):
        validate_assumptions(mono, rng_, samples)


def test_catalog_lookup():
    assert from_catalog("bistable_cubic").name == "bistable_cubic"
    with pytest.raises(ConfigError):
        from_catalog("nope")


def test_polynomial_maps_match_hand_values(mono, bist):
    v = np.array([-2.0, 0.0, 1.0, 2.0])
    np.testing.assert_allclose(mono.f(v), v + v**3)
    np.testing.assert_allclose(mono.F(v), v**2 / 2 + v**4 / 4)
    np.testing.assert_allclose(bist.df(v), 3 * v**2 - 1)
    np.testing.assert_allclose(bist.R(v), v**2 / 2)


@settings(max_examples=30, deadline=None)
@given(r=st.floats(1.0, 15.0), a=st.floats(0.0, 0.9), b=st.floats(0.0, 0.9))
def test_validation_monotone_in_range(r, a, b):
    # a spec that passes on [-r, r] passes on every subinterval
    spec = bistable_cubic()
    full = validate_assumptions(spec, (-r, r), 400)
    lo, hi = -r + a * r, r - b * r
    if hi - lo < 1e-3:
        return
    sub = validate_assumptions(spec, (lo, hi), 400)
    for key, chk in full.checks.items():
        if chk.passed:
            assert sub.checks[key].passed, key

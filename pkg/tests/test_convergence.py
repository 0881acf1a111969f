import numpy as np
import pytest

from ecotone.convergence import (
    coupled_recipe, heat_only_recipe, manufactured_convergence, observed_order, run_error,
)
from ecotone.errors import ConfigError
from ecotone.nonlinearity import polynomial_spec


def test_exact_recipes_are_consistent():
    # finite differences of the recipe fields reproduce the declared derivatives
    rec = coupled_recipe()
    x = np.linspace(0, 1, 7)
    t, e = 0.3, 1e-6
    np.testing.assert_allclose((rec.v(t + e, x) - rec.v(t - e, x)) / (2 * e), rec.vt(t, x), atol=1e-8)
    np.testing.assert_allclose((rec.vt(t + e, x) - rec.vt(t - e, x)) / (2 * e), rec.vtt(t, x), atol=1e-8)
    np.testing.assert_allclose((rec.w(t + e, x) - rec.w(t - e, x)) / (2 * e), rec.wt(t, x), atol=1e-8)
    h = 1e-4
    wxx = (rec.w(t, x + h) - 2 * rec.w(t, x) + rec.w(t, x - h)) / h**2
    np.testing.assert_allclose(wxx, rec.wxx(t, x), atol=1e-5)


def test_heat_only_spatial_order():
    rep = manufactured_convergence(heat_only_recipe(), node_counts=(9, 17, 33, 65))
    assert rep.spatial_order == pytest.approx(2.0, abs=0.1)
    assert np.all(np.diff(rep.spatial_errors) < 0)


def test_coupled_temporal_order():
    rep = manufactured_convergence(time_recipe=coupled_recipe(), dts=(0.02, 0.01, 0.005, 0.0025))
    assert rep.temporal_order == pytest.approx(1.0, abs=0.15)


def test_linear_case_error_halves():
    lin = polynomial_spec([0.0, 1.0], beta0=1.0, K=0.0, gamma0=1.0, delta=1e-9, C=0.0, name="linear")
    recipe = coupled_recipe(nonlinearity=lin)
    errs = [run_error(recipe, 257, dt, 0.5) for dt in (0.02, 0.01, 0.005)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    np.testing.assert_allclose(ratios, 2.0, rtol=0.15)


def test_too_few_levels():
    with pytest.raises(ConfigError):
        manufactured_convergence(heat_only_recipe(), node_counts=(9, 17))
    with pytest.raises(ConfigError):
        manufactured_convergence(time_recipe=coupled_recipe(), dts=(0.01, 0.005))


def test_observed_order_of_power_law():
    h = np.array([0.1, 0.05, 0.025])
    assert observed_order(h, 3 * h**1.5) == pytest.approx(1.5)

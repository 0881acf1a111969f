import numpy as np
import pytest

from ecotone.diagnostics import lip_seminorm
from ecotone.dynamics import StepperConfig
from ecotone.experiments import forest_comparison, front, lipschitz_contrast, stabilize
from ecotone.grid import make_grid
from ecotone.model import FieldState, ForestParams, SystemParams
from ecotone.nonlinearity import bistable_cubic, monotone_cubic


def test_front_lipschitz_constant():
    g = make_grid(1, 1.0, 2001)
    for lip in (10.0, 100.0):
        v = front(g, 0.2, 0.5, lip)
        assert lip_seminorm(v, g, g.min_spacing) == pytest.approx(lip, rel=0.01)
        assert v.min() >= 0.2 - 0.5 and v.max() <= 0.2 + 0.5


def test_stabilize_small_run():
    g = make_grid(1, 1.0, 65)
    params = SystemParams(0.01, bistable_cubic(), g)
    v0 = np.tanh((g.x - 0.41) / 0.1)
    z = np.zeros(65)
    rep = stabilize(params, FieldState(0.0, v0, z, z.copy()), StepperConfig(1e-2, stride=100), 60.0,
                    label_T=60.0)
    assert rep.separatrix_nodes.size == 0
    assert rep.l1 <= 1e-3 and rep.linf <= 1e-2
    assert rep.lip_final > 3 * rep.lip_initial
    assert rep.kato_violation <= 1e-2 * rep.kato_scale
    assert set(np.unique(rep.labels)) == {0, 2}
    s = rep.summary()
    assert s["label_counts"][1] == 0 and s["equilibrium"]["source"] == "partition"


def test_stabilize_reports_separatrix_node():
    # a node starting exactly on the unstable root is labelled 0 and reported separately
    g = make_grid(1, 1.0, 65)
    params = SystemParams(0.01, bistable_cubic(), g)
    v0 = np.tanh((g.x - 0.5) / 0.1)
    z = np.zeros(65)
    rep = stabilize(params, FieldState(0.0, v0, z, z.copy()), StepperConfig(1e-2, stride=100), 5.0,
                    label_T=20.0)
    np.testing.assert_array_equal(rep.separatrix_nodes, [32])
    assert rep.l1_off_separatrix <= rep.l1


def test_contrast_smoke():
    g = make_grid(1, 1.0, 201)
    rep = lipschitz_contrast(g, monotone_cubic(), bistable_cubic(), 0.5, 0.0, 0.5,
                             StepperConfig(1e-2, stride=50), 2.0)
    assert len(rep.runs) == 4
    assert np.isfinite(rep.agreement) and rep.ratio > 0
    assert set(rep.summary()) >= {"monotone_relative_gap", "nonmonotone_ratio"}


def test_forest_routes_agree():
    g = make_grid(1, 10.0, 41)
    p = ForestParams(alpha=1.0, beta=1.0, delta=1.0, d=1.0, f=1.0, h=1.0, gamma=[0.5])
    u0 = 0.5 + 0.2 * np.cos(np.pi * g.x / 10)
    cmp = forest_comparison(p, g, u0, 0.3, 0.1, dt=1e-2, T=2.0, every=10, with_imex=True)
    assert cmp.discrepancy_v <= 1e-12 and cmp.discrepancy_u <= 1e-12
    assert 0 < cmp.imex_discrepancy_v < 1e-1

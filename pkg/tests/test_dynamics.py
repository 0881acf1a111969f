import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from ecotone.dynamics import (
    TRAJECTORY_COLUMNS, Stepper, StepperConfig, simulate, step, write_snapshot_csv, write_trajectory_csv,
)
from ecotone.equilibria import solve_monotone_equilibrium
from ecotone.errors import BlowUpError, ConfigError
from ecotone.grid import make_grid
from ecotone.model import FieldState, SystemParams
from ecotone.nonlinearity import polynomial_spec

LINEAR = polynomial_spec([0.0, 1.0], [1.0], beta0=1.0, K=0.0, gamma0=1.0, delta=1e-9, C=0.0, name="linear")


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(dt=-1.0), dict(dt=0.1, tol=1e-3), dict(dt=0.1, stride=0)])
def test_stepper_config_validation(kw):
    with pytest.raises(ConfigError):
        StepperConfig(**kw)


def test_equilibrium_is_fixed_point(line, mono):
    params = SystemParams(0.5, mono, line)
    sol = solve_monotone_equilibrium(params, w_guess=0.3 * np.ones(line.node_count))
    cfg = StepperConfig(1e-3, tol=1e-10)
    s0 = FieldState(0.0, sol.v0, np.zeros_like(sol.v0), sol.w0)
    s1 = step(s0, params, cfg)
    assert np.max(np.abs(s1.v - s0.v)) <= 10 * cfg.tol
    assert np.max(np.abs(s1.w - s0.w)) <= 10 * cfg.tol


def _oscillator_step(y, dt):
    v, vt = y
    vt1 = (vt - dt * v) / (1.0 + dt)
    return np.array([v + dt * vt1, vt1])


def test_linear_oscillator_local_error_is_second_order():
    g = make_grid(1, 1.0, 5)
    params = SystemParams(0.0, LINEAR, g)
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    errs = []
    for dt in (0.02, 0.01, 0.005):
        s = FieldState(0.0, np.full(5, 0.7), np.full(5, -0.2), np.zeros(5))
        s1 = step(s, params, StepperConfig(dt))
        exact = expm(A * dt) @ np.array([0.7, -0.2])
        np.testing.assert_allclose([s1.v[0], s1.vt[0]], _oscillator_step((0.7, -0.2), dt), rtol=1e-14)
        errs.append(np.hypot(s1.v[0] - exact[0], s1.vt[0] - exact[1]))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.05)


def test_heat_only_contracts(line, mono):
    params = SystemParams(0.0, mono, line)
    dt = 0.05
    w = np.cos(3 * np.pi * line.x) + 0.3
    s1 = step(FieldState(0.0, 0 * w, 0 * w, w), params, StepperConfig(dt))
    assert np.max(np.abs(s1.w)) <= np.max(np.abs(w)) / (1 + dt) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dt=st.floats(1e-4, 1.0), alpha=st.floats(0.0, 2.0),
       two_d=st.booleans())
def test_heat_substep_linf_bound(seed, dt, alpha, two_d, mono):
    g = make_grid(2, 1.0, 9) if two_d else make_grid(1, 1.0, 33)
    rng = np.random.default_rng(seed)
    v, vt, w = rng.uniform(-2, 2, (3, g.node_count))
    s1 = step(FieldState(0.0, v, vt, w), SystemParams(alpha, mono, g), StepperConfig(dt, tol=1e-12))
    bound = (np.max(np.abs(w)) + dt * np.max(np.abs(s1.v))) / (1 + dt)
    assert np.max(np.abs(s1.w)) <= bound * (1 + 1e-9) + 1e-12


def test_bit_identical_repeat(line, bist, rng):
    params = SystemParams(0.3, bist, line)
    s0 = FieldState(0.0, *rng.uniform(-1, 1, (3, line.node_count)))
    cfg = StepperConfig(1e-2, stride=10)
    a = simulate(s0, params, cfg, 1.0)
    b = simulate(s0, params, cfg, 1.0)
    assert a.final.v.tobytes() == b.final.v.tobytes()
    assert a.lyapunov.tobytes() == b.lyapunov.tobytes()


@pytest.mark.parametrize("which", ["mono", "bist"])
def test_continuity_in_initial_data(line, which, request, rng):
    spec = request.getfixturevalue(which)
    params = SystemParams(0.5, spec, line)
    s0 = FieldState(0.0, *rng.uniform(-1, 1, (3, line.node_count)))
    pert = FieldState(0.0, s0.v + 1e-6 * rng.uniform(-1, 1, line.node_count), s0.vt, s0.w)
    cfg = StepperConfig(1e-3)
    stp = Stepper(params, cfg)
    a, b = s0, pert
    for _ in range(1000):
        a, b = stp(a), stp(b)
        assert max(np.max(np.abs(a.v - b.v)), np.max(np.abs(a.w - b.w))) <= 1e-3


def test_zero_data_stays_zero(line, mono):
    rec = simulate(FieldState.zeros(line), SystemParams(0.5, mono, line), StepperConfig(0.01, stride=5), 1.0)
    for name in TRAJECTORY_COLUMNS[1:]:
        assert np.all(getattr(rec, name) == 0.0), name
    assert np.all(rec.final.v == 0)


def test_record_invariants(line, bist, rng):
    params = SystemParams(0.2, bist, line)
    s0 = FieldState(0.0, *rng.uniform(-1, 1, (3, line.node_count)))
    rec = simulate(s0, params, StepperConfig(5e-3, stride=7), 2.0, probes=[25, 75], keep_snapshots=True)
    assert np.all(np.diff(rec.t) > 0)
    assert rec.t[-1] == pytest.approx(2.0)
    assert np.all(np.diff(rec.diss_l2) >= 0) and np.all(np.diff(rec.diss_l1) >= 0)
    assert len(rec.step_t) == rec.meta["steps"] + 1
    assert rec.probe_v.shape == (len(rec), 2)
    assert len(rec.snapshots) == len(rec)
    np.testing.assert_array_equal(rec.snapshots[-1].v, rec.final.v)
    np.testing.assert_array_equal(rec.probe_v[-1], rec.final.v[[25, 75]])
    with pytest.raises(ConfigError):
        simulate(s0, params, StepperConfig(0.1), 0.2, probes=[0.25])


def test_blowup_reports_time_node_and_partial_record(line):
    # f = -v^3 violates dissipativity; data escape in finite time
    bad = polynomial_spec([0.0, 0.0, 0.0, -1.0], beta0=1.0, K=0.0, gamma0=1.0, delta=2.0, C=0.0)
    s0 = FieldState(0.0, 3.0 * np.exp(-((line.x - 0.3) / 0.05) ** 2), np.zeros(101), np.zeros(101))
    with pytest.raises(BlowUpError) as info:
        simulate(s0, SystemParams(0.0, bad, line), StepperConfig(1e-2), 10.0)
    err = info.value
    assert 0 < err.t < 10 and 0 <= err.node < 101
    assert abs(line.x[err.node] - 0.3) < 0.05
    assert err.record is not None and len(err.record.step_t) > 1


def test_csv_layout_and_precision(tmp_path, line, mono, rng):
    params = SystemParams(0.5, mono, line)
    rec = simulate(FieldState(0.0, *rng.uniform(-1, 1, (3, 101))), params, StepperConfig(0.01, stride=10), 0.5)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(rec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_COLUMNS)
    assert len(lines) == len(rec) + 1
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, 1], rec.lyapunov)
    snap = tmp_path / "snap.csv"
    write_snapshot_csv(line, rec.final, snap)
    assert snap.read_text().splitlines()[0] == "x,v,vt,w"


def test_two_dimensional_run(mono, rng):
    g = make_grid(2, (1.0, 1.0), (17, 17))
    params = SystemParams(0.5, mono, g)
    rec = simulate(FieldState(0.0, *rng.uniform(-1, 1, (3, g.node_count))), params, StepperConfig(0.01, stride=10), 1.0)
    assert np.all(np.diff(rec.step_lyapunov) <= 1e-2 * 0.01 * (1 + np.abs(rec.step_lyapunov[:-1])))

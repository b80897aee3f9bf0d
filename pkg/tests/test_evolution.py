import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp as scipy_ivp

from fracdrift.core import FractionalParams, HolderSynthConfig, ScalarField, TorusGrid
from fracdrift.errors import InstabilityError, InvalidArgument, StepRejected
from fracdrift.evolution import (
    CFL_MAX,
    DriftField,
    admissible_dt,
    flow_ode,
    perturbation_experiment,
    solve_ivp,
)
from fracdrift.regularity import smooth_data
from fracdrift.spectral import heat_propagate


@pytest.mark.parametrize("s", [0.2, 0.35, 0.5])
def test_eigenmode_decays_exactly(s):
    g = TorusGrid(1, 64)
    p = FractionalParams(s)
    u0 = ScalarField(g, np.cos(3 * g.x))
    st_, _ = solve_ivp(u0, DriftField.zero(g), None, 0.7, p, dt=0.7 / 10)
    want = math.exp(-0.7 * 3 ** (2 * s)) * np.cos(3 * g.x)
    np.testing.assert_allclose(st_.u.values, want, atol=1e-13)


def test_forced_steady_state_is_preserved():
    g = TorusGrid(2, 32)
    p = FractionalParams(0.3)
    X, Y = g.coords()
    k2 = 4 + 1
    u0 = ScalarField(g, np.sin(2 * X + Y))
    f = ScalarField(g, k2**0.3 * u0.values)
    st_, ts = solve_ivp(u0, DriftField.zero(g), f, 1.0, p)
    np.testing.assert_allclose(st_.u.values, u0.values, atol=1e-12)
    assert np.ptp(ts.sup) < 1e-12


def test_transport_only_converges():
    p = FractionalParams(0.25)
    errs = []
    for N in (64, 128, 256):
        g = TorusGrid(1, N)
        u0 = ScalarField(g, np.sin(g.x))
        st_, _ = solve_ivp(u0, DriftField.constant(g, 0.8), None, 1.0, p, diffusion=False)
        errs.append(np.abs(st_.u.values - np.sin(g.x - 0.8)).max())
    assert errs[2] < errs[1] < errs[0]
    assert math.log2(errs[1] / errs[2]) > 1.2


def test_constant_drift_is_a_moving_frame():
    # u(t, x) = heat(u0)(x - c t) for constant c
    p = FractionalParams(0.4)
    g = TorusGrid(1, 256)
    u0 = smooth_data(g, 4, 5)
    c = 0.6
    st_, _ = solve_ivp(u0, DriftField.constant(g, c), None, 1.0, p)
    heated = heat_propagate(u0, 1.0, p)
    k = g.wavenumbers()[0]
    shifted = g.irfft(g.rfft(heated.values) * np.exp(-1j * k * c))
    assert np.abs(st_.u.values - shifted).max() < 5e-4


@settings(max_examples=15)
@given(st.integers(0, 2**31), st.floats(0.15, 0.5))
def test_maximum_principle_without_forcing(seed, s):
    g = TorusGrid(1, 64)
    p = FractionalParams(s)
    u0 = smooth_data(g, 6, seed)
    b = DriftField.synthesize(g, [HolderSynthConfig(0.5, 2, 4, seed % 1000)])
    _, ts = solve_ivp(u0, b, None, 0.5, p)
    assert ts.sup[-1] <= ts.sup[0] + 1e-12
    assert np.all(np.diff(ts.sup) <= 1e-12)


def test_cfl_violation_reports_admissible_step():
    g = TorusGrid(1, 64)
    b = DriftField.constant(g, 4.0)
    limit = admissible_dt(b, g, -1.0, 0.0)
    assert limit == pytest.approx(CFL_MAX * g.h / 4.0)
    with pytest.raises(StepRejected) as exc:
        solve_ivp(ScalarField(g, np.sin(g.x)), b, None, 1.0, FractionalParams(0.25), dt=2 * limit)
    assert exc.value.admissible_dt == pytest.approx(limit)


def test_instability_guard_fires():
    g = TorusGrid(1, 64)
    b = DriftField.from_callable(g, lambda t, X: np.array([np.sin(X[0]) * 40]))
    rng = np.random.default_rng(0)
    u0 = ScalarField(g, rng.normal(size=64))
    with pytest.raises(InstabilityError):
        solve_ivp(u0, b, None, 1.0, FractionalParams(0.1), dt=0.05, cfl_max=100.0, diffusion=False)


def test_invalid_inputs():
    g = TorusGrid(1, 16)
    p = FractionalParams(0.25)
    u = ScalarField(g, np.zeros(16))
    with pytest.raises(InvalidArgument):
        solve_ivp(u, DriftField.zero(g), None, 0.0, p)
    with pytest.raises(InvalidArgument):
        solve_ivp(u, DriftField.zero(g), None, 1.0, p, eps=-1.0)
    with pytest.raises(InvalidArgument):
        DriftField.constant(g, [1.0, 2.0])
    with pytest.raises(InvalidArgument):
        DriftField(g, samples=np.full((1, 1, 16), np.nan))
    with pytest.raises(InvalidArgument):
        perturbation_experiment(u, DriftField.zero(g), None, 0.1, p, eps=0.2)


def test_time_series_csv_is_deterministic():
    g = TorusGrid(1, 64)
    p = FractionalParams(0.25)
    b = DriftField.synthesize(g, [HolderSynthConfig(0.6, 2, 4, 3)])
    runs = [solve_ivp(smooth_data(g, 5, 9), b, np.sin(g.x), 0.5, p)[1].to_csv() for _ in range(2)]
    assert runs[0] == runs[1]
    assert runs[0].splitlines()[0].startswith("t,sup,mean,energy,band_")


def _b(t, X):
    return np.array([0.3 * np.sin(X[0]) + 0.2 * np.cos(2 * t)])


def test_flow_rk4_fourth_order_against_scipy():
    g = TorusGrid(1, 32)
    b = DriftField.from_callable(g, _b)
    ref = scipy_ivp(lambda t, v: _b(t, (v,)), (0.0, -1.0), [0.0], rtol=1e-13, atol=1e-14).y[0, -1]
    errs = [abs(flow_ode(b, nsteps=n).V[0, 0] - ref) for n in (8, 16, 32)]
    assert math.log2(errs[0] / errs[1]) > 3.5
    assert math.log2(errs[1] / errs[2]) > 3.5


def test_flow_source_integral():
    g = TorusGrid(1, 64)
    path = flow_ode(DriftField.constant(g, 0.5), lambda t: np.cos(g.x), nsteps=64)
    # V = t/2, S' = cos V, S(0) = 0  =>  S = 2 sin(t/2)
    t = path.times
    want = 2 * np.sin(0.5 * t)
    np.testing.assert_allclose(path.V[:, 0], 0.5 * t, atol=1e-14)
    # f is sampled on the grid and linearly interpolated: accuracy ~h^2
    assert np.abs(path.S - want).max() < 2e-3
    assert path.S_at(0.0) == 0.0


def test_perturbation_delta_zero_matches_driftless():
    g = TorusGrid(1, 64)
    p = FractionalParams(0.25)
    b = DriftField.synthesize(g, [HolderSynthConfig(0.75, 2, 4, 1)])
    u0 = ScalarField(g, np.cos(g.x))
    assert perturbation_experiment(u0, b, np.sin(g.x), 0.0, p) <= 1e-12
    assert perturbation_experiment(u0, b, np.sin(g.x), 0.1, p) > 1e-3

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdrift.core import ExtendedField, FractionalParams, GradedYGrid, TorusGrid, default_gamma
from fracdrift.errors import InvalidArgument
from fracdrift.regularity import (
    ExperimentConfig,
    driftless_flatness,
    extend_history,
    flatness_profile,
    holder_estimate_experiment,
    shift_field,
    smooth_data,
    theorem1_experiment,
)

P = FractionalParams(0.25)
TIMES = np.linspace(-1.0, 0.0, 33)


def planted(fn, N=512, M=48):
    """Fields ``fn(t, x, y)`` on a 1-D cylinder grid."""
    g = TorusGrid(1, N, 2 * math.pi)
    yg = GradedYGrid(1.0, M, default_gamma(P))
    x = g.x[None, :]
    y = yg.nodes[:, None]
    return [ExtendedField(g, yg, np.broadcast_to(fn(t, x, y), (M + 1, N)).copy()) for t in TIMES]


@settings(max_examples=20)
@given(
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.floats(-3, 3),
)
def test_ansatz_is_fitted_exactly(A, d0, d1, d2):
    # D quadratic in t, so the derived D' is exact on any time grid
    a = P.a

    def u(t, x, y):
        D = d0 + d1 * t + d2 * t * t
        Dp = d1 + 2 * d2 * t
        return A * x + D + Dp * y ** (1 - a) / (1 - a)

    rep = flatness_profile(TIMES, planted(u), P)
    assert np.all(rep.deviations == 0.0)
    assert rep.slope is None
    assert not rep.used.any()
    np.testing.assert_allclose(rep.A[:, 0], A, atol=1e-8)


def test_free_dprime_absorbs_any_time_profile():
    a = P.a
    rep = flatness_profile(
        TIMES, planted(lambda t, x, y: 0.5 * x + np.sin(3 * t) + np.exp(t) * y ** (1 - a)), P, dprime="free"
    )
    assert np.all(rep.deviations == 0.0)
    derived = flatness_profile(TIMES, planted(lambda t, x, y: 0.5 * x + np.sin(3 * t) + np.exp(t) * y ** (1 - a)), P)
    assert derived.deviations.max() > 0


@pytest.mark.parametrize("gamma", [1.5, 2.0])
def test_planted_power_sets_the_slope(gamma):
    # |x|^gamma is orthogonal to the ansatz at every scale: deviation ~ rho^gamma
    rep = flatness_profile(TIMES, planted(lambda t, x, y: np.abs(x) ** gamma), P)
    assert rep.slope == pytest.approx(gamma, abs=0.05)
    assert rep.r2 > 0.99


def test_forcing_A_to_zero_exposes_the_linear_part():
    rep = flatness_profile(TIMES, planted(lambda t, x, y: 2.0 * x), P, force_A_zero=True)
    # the largest grid |x| inside the ball is only approximately rho
    assert rep.slope == pytest.approx(1.0, abs=0.02)
    assert np.all(rep.A == 0)


def test_small_scales_dropped_with_warning():
    rep = flatness_profile(TIMES, planted(lambda t, x, y: x * x, N=64, M=16), P, K=6)
    assert rep.warnings
    assert len(rep.scales) < 7


def test_flatness_argument_checks():
    fields = planted(lambda t, x, y: x)
    with pytest.raises(InvalidArgument):
        flatness_profile(TIMES, fields, P, r=0.7)
    with pytest.raises(InvalidArgument):
        flatness_profile(TIMES, fields, P, K=2)
    with pytest.raises(InvalidArgument):
        flatness_profile(TIMES, fields, P, dprime="guess")
    with pytest.raises(InvalidArgument):
        flatness_profile(TIMES - 1, fields, P)
    with pytest.raises(InvalidArgument):
        flatness_profile(TIMES[:-1], fields, P)


@pytest.mark.parametrize("s", [0.25, 0.4, 0.5])
def test_extension_history_neumann_normalization(s):
    p = FractionalParams(s)
    g = TorusGrid(1, 64)
    k = 3
    (ext,) = extend_history(np.cos(k * g.x)[None], g, p, M=512, Y=1.0)
    y1 = ext.ygrid.nodes[1]
    flux = (1 - p.a) * (ext.values[1] - ext.values[0]) / y1 ** (1 - p.a)
    want = -(k ** (2 * s)) * np.cos(k * g.x)
    assert np.abs(flux - want).max() <= 0.02 * k ** (2 * s)


def test_shift_field_is_exact_on_trig_data():
    g = TorusGrid(2, 32)
    X, Y = g.coords()
    np.testing.assert_allclose(shift_field(np.sin(X) * np.cos(2 * Y), g, np.array([0.3, -0.7])),
                               np.sin(X + 0.3) * np.cos(2 * (Y - 0.7)), atol=1e-13)


def test_smooth_data_slope_term():
    g = TorusGrid(1, 256)
    u = smooth_data(g, 6, 4, slope=1.0).values - smooth_data(g, 6, 4).values
    np.testing.assert_allclose(u, np.sin(g.x), atol=1e-13)


def test_driftless_flatness_beats_one_plus_alpha():
    rep = driftless_flatness(ExperimentConfig(N=256, seed=2))
    assert rep.slope >= 1 + 2 * 0.25 - 0.2


def test_zero_delta_reduces_to_driftless_run():
    cfg = ExperimentConfig(N=128, delta=0.0)
    t1 = theorem1_experiment(cfg)
    base = driftless_flatness(cfg)
    np.testing.assert_array_equal(np.array(t1.extra["flatness"]["deviations"]), base.deviations)
    assert t1.extra["V_final"] == [0.0]


def test_experiment_is_deterministic():
    cfg = ExperimentConfig(N=128, seed=11)
    a = theorem1_experiment(cfg).to_json()
    b = theorem1_experiment(cfg).to_json()
    assert a == b
    doc = json.loads(a)
    assert doc["manifest"]["config"]["seed"] == 11
    assert doc["manifest"]["drift"]["kind"] == "lacunary"


def test_theorem1_rejects_alpha_outside_range():
    with pytest.raises(InvalidArgument):
        theorem1_experiment(ExperimentConfig(s=0.25, alpha=0.6, N=128))


def test_holder_experiment_orders_drifts():
    cfg = ExperimentConfig(N=256)
    none = holder_estimate_experiment(cfg, "none")
    rough = holder_estimate_experiment(cfg, "rough")
    assert none.measured > 1.5
    assert rough.passed and rough.measured < none.measured
    with pytest.raises(InvalidArgument):
        holder_estimate_experiment(cfg, "wild")


def test_experiment_config_validation():
    with pytest.raises(InvalidArgument):
        ExperimentConfig(r=0.75)
    with pytest.raises(InvalidArgument):
        ExperimentConfig(K=2)
    with pytest.raises(InvalidArgument):
        ExperimentConfig(s=0.7)
    assert ExperimentConfig(N=512).levels == 7

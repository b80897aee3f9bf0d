import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracdrift.core import FractionalParams, ScalarField, TorusGrid
from fracdrift.errors import DomainError, InvalidArgument, ResolutionError
from fracdrift.spectral import (
    frac_laplacian,
    frac_laplacian_op,
    heat_kernel,
    heat_profile,
    heat_propagate,
    propagator_op,
    selfsimilar_check,
)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.5])
@pytest.mark.parametrize("k", [1, 3, 7])
def test_symbol_on_cosine_modes(s, k):
    g = TorusGrid(1, 64)
    f = ScalarField(g, np.cos(k * g.x))
    np.testing.assert_allclose(frac_laplacian(f, FractionalParams(s)).values, k ** (2 * s) * np.cos(k * g.x), atol=1e-12)


def test_two_dimensional_symbol_uses_modulus():
    g = TorusGrid(2, 32)
    X, Y = np.meshgrid(g.x, g.x, indexing="ij")
    f = ScalarField(g, np.cos(3 * X + 4 * Y))
    np.testing.assert_allclose(frac_laplacian(f, FractionalParams(0.5, n=2)).values, 5 * f.values, atol=1e-11)


@given(arrays(np.float64, 32, elements=st.floats(-1, 1)), st.sampled_from([0.1, 0.25, 0.4, 0.5]))
def test_fractional_laplacian_is_positive_semidefinite(v, s):
    g = TorusGrid(1, 32)
    f = ScalarField(g, v)
    assert float(np.dot(v, frac_laplacian(f, FractionalParams(s)).values)) >= -1e-10


@given(arrays(np.float64, 64, elements=st.floats(-1, 1)), st.floats(min_value=0.01, max_value=2.0))
def test_heat_maximum_principle(v, t):
    g = TorusGrid(1, 64)
    f = ScalarField(g, v)
    out = heat_propagate(f, t, FractionalParams(0.5)).values
    osc = float(v.max() - v.min())
    assert out.max() <= v.max() + 1e-10 * max(osc, 1.0)


def test_zero_mode_preserved():
    g = TorusGrid(1, 64)
    op = propagator_op(g, FractionalParams(0.25), 3.0, eps=0.1)
    assert op.zero_mode == 1.0
    assert frac_laplacian_op(g, FractionalParams(0.25)).zero_mode == 0.0


def test_semigroup_identity():
    g = TorusGrid(1, 256)
    p = FractionalParams(0.3)
    f = ScalarField(g, np.cos(g.x) + 0.3 * np.sin(5 * g.x))
    a = heat_propagate(heat_propagate(f, 0.2, p), 0.5, p).values
    b = heat_propagate(f, 0.7, p).values
    assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()


def test_negative_time_rejected():
    with pytest.raises(InvalidArgument):
        propagator_op(TorusGrid(1, 16), FractionalParams(0.25), -1.0)


def test_cauchy_kernel_at_half():
    g = TorusGrid(1, 2**18, 400.0)
    H = heat_profile(FractionalParams(0.5), g)
    x, v = H.radial_samples()
    L = g.L
    # Poisson kernel at height 1 summed over periodic images, in closed form
    periodic = np.sinh(2 * math.pi / L) / (L * (np.cosh(2 * math.pi / L) - np.cos(2 * math.pi * x / L)))
    assert np.max(np.abs(v - periodic) / periodic) < 1e-9
    assert H.mass == pytest.approx(1.0, abs=1e-10)


def test_profile_refuses_unresolved_symbol():
    with pytest.raises(ResolutionError):
        heat_profile(FractionalParams(0.25), TorusGrid(1, 64, 100.0))


def test_kernel_positive_and_unit_mass():
    g = TorusGrid(1, 4096, 200.0)
    h = heat_kernel(g, FractionalParams(0.25), 0.5)
    assert h.sum() * g.h == pytest.approx(1.0, abs=1e-10)
    assert h.min() > -1e-10


def test_selfsimilarity_small_and_containment_enforced():
    p = FractionalParams(0.5)
    assert selfsimilar_check(p, 0.5, 1.0, TorusGrid(1, 2**14, 64 * math.pi)) < 1e-3
    with pytest.raises(DomainError):
        selfsimilar_check(p, 0.5, 1.0, TorusGrid(1, 2**10, 8.0))

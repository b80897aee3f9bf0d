import json
import math

import numpy as np
import pytest

from fracdrift.barriers import (
    C_MARGIN,
    bfun_closed_form,
    bfun_interior_residual,
    caloric_residuals,
    check_bfun_properties,
    compute_bfun,
    make_barrier,
    sample_region,
    verify_supersolution,
)
from fracdrift.core import FractionalParams
from fracdrift.errors import InvalidArgument


def flat_operator_by_hand(pts, C, alpha, a, n):
    # y^alpha and |X|^alpha are both powers, so the weighted Laplacian is explicit
    y = pts[:, -1]
    r = np.linalg.norm(pts, axis=1)
    return C * alpha * (alpha - 1 + a) * y ** (a + alpha - 2) + alpha * (alpha + n - 1 + a) * y**a * r ** (alpha - 2)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", [0.25, 0.4])
def test_flat_barrier_operator_and_constant(n, s):
    p = FractionalParams(s, n=n)
    al = (1 - p.a) / 2
    spec = make_barrier("flat_boundary", p, al, h=1 / 8 if n == 2 else 1 / 32)
    pts = sample_region(spec, 1 / 8 if n == 2 else 1 / 32)
    np.testing.assert_allclose(spec.operator(pts), flat_operator_by_hand(pts, spec.C, al, p.a, n), rtol=1e-9, atol=1e-9)
    C_star = (al + n - 1 + p.a) / (1 - p.a - al)
    assert C_star <= spec.C <= C_star * (1 + 2 * C_MARGIN)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_sphere_barrier_certified_at_two_resolutions(alpha):
    p = FractionalParams(0.25)
    spec = make_barrier("sphere_boundary", p, alpha)
    for h in (1 / 32, 1 / 64):
        rep = verify_supersolution(spec, h)
        assert rep.passed and rep.limit_ok
        assert rep.max_value <= rep.tolerance
    assert 1 <= spec.C < 2**10


def test_exact_and_fd_operators_agree():
    p = FractionalParams(0.25)
    spec = make_barrier("sphere_boundary", p, 0.5)
    pts = sample_region(spec, 1 / 32)
    pts = pts[(np.linalg.norm(pts, axis=1) < 0.9) & (pts[:, -1] > 0.1)]
    pts = pts[np.linalg.norm(pts - np.array(spec.center), axis=1) > 0.2]
    ex = spec.operator(pts)
    fd = spec.operator(pts, method="fd", step=1e-3)
    assert np.abs(ex - fd).max() <= 1e-4 * max(1.0, np.abs(ex).max())
    rep = verify_supersolution(spec, 1 / 32, method="fd")
    assert rep.passed


def test_constant_below_certified_value_fails():
    p = FractionalParams(0.25)
    spec = make_barrier("flat_boundary", p, 0.25)
    rep = verify_supersolution(spec, 1 / 32, C=0.5 * spec.C)
    assert not rep.passed


def test_sample_region_stays_inside():
    p = FractionalParams(0.25)
    sph = sample_region(make_barrier("sphere_boundary", p, 0.5), 1 / 32)
    assert np.all(np.linalg.norm(sph, axis=1) < 1) and np.all(sph[:, -1] > 0)
    flat = sample_region(make_barrier("flat_boundary", p, 0.25), 1 / 32)
    assert np.all((flat[:, -1] > 0) & (flat[:, -1] < 1))


def test_certificate_contents():
    p = FractionalParams(0.25)
    spec = make_barrier("sphere_boundary", p, 0.5)
    rep = verify_supersolution(spec, 1 / 32)
    cert = json.loads(spec.certificate_json(rep))
    assert cert["C_found"] == spec.C and cert["pass"] is True
    assert cert["params"]["alpha"] == 0.5


@pytest.mark.parametrize("n", [1, 2])
def test_caloric_corrected_is_exact(n):
    p = FractionalParams(0.25, n=n)
    spec = make_barrier("caloric_U", p)
    b1, i1 = caloric_residuals(spec, 32)
    b2, i2 = caloric_residuals(spec, 64)
    assert b1 < 1e-8 and b2 < 1e-8
    assert i2 < i1 / 4


def test_caloric_literal_has_constant_boundary_defect():
    p = FractionalParams(0.25)
    a = p.a
    spec = make_barrier("caloric_U", p, variant="literal")
    bnd, _ = caloric_residuals(spec, 64)
    assert bnd == pytest.approx(4 * a / (1 + a), rel=1e-6)


def test_bad_barrier_arguments():
    p = FractionalParams(0.25)
    with pytest.raises(InvalidArgument):
        make_barrier("sphere_boundary", p, 1.2)
    with pytest.raises(InvalidArgument):
        make_barrier("flat_boundary", p, 0.6)  # 1 - a = 0.5
    with pytest.raises(InvalidArgument):
        make_barrier("sphere_boundary", p, 0.5, center=(0.5, 0.5))
    with pytest.raises(InvalidArgument):
        make_barrier("caloric_U", p, variant="printed")
    with pytest.raises(InvalidArgument):
        make_barrier("nope", p)
    with pytest.raises(InvalidArgument):
        make_barrier("bfun", FractionalParams(0.5))
    with pytest.raises(InvalidArgument):
        make_barrier("bfun", FractionalParams(0.25, n=2))


@pytest.mark.parametrize("s", [0.25, 0.4])
def test_bfun_quadrature_matches_hypergeometric_form(s):
    p = FractionalParams(s)
    B = compute_bfun(p, N=64, M=32)
    X, Y = np.meshgrid(B.x, B.y)
    ref = bfun_closed_form(p, X[B.inside], Y[B.inside])
    assert np.abs(B.field.values[B.inside] - ref).max() < 1e-8


def test_bfun_properties():
    B = compute_bfun(FractionalParams(0.25))
    rep = check_bfun_properties(B)
    assert rep.boundary_sup <= 1e-3
    assert rep.neumann_max_error <= 0.02
    assert rep.argmax_is_origin
    assert rep.symmetry_error < 1e-10
    assert rep.c1 > 0 and rep.c2 > 0 and rep.passed
    assert set(rep.to_dict()) >= {"c1", "c2", "decay_exponent"}
    assert bfun_interior_residual(B) < 0.05


def test_bfun_value_at_origin_is_maximal_on_axis():
    p = FractionalParams(0.3)
    y = np.linspace(0, 0.99, 50)
    vals = bfun_closed_form(p, np.zeros_like(y), y)
    assert np.all(np.diff(vals) < 0)
    assert abs(bfun_closed_form(p, np.array(1.0), np.array(0.0))) < 1e-12

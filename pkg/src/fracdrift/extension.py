"""Degenerate extension problem ``div(y^a grad u) = 0`` on torus x (0, Y).

The horizontal operator is diagonal in Fourier space, so the solve splits
into one tridiagonal problem per frequency. In the vertical direction the
scheme is a conservative flux form whose face weights are the harmonic
means of ``y^a``::

    F_{j+1/2} = (u_{j+1} - u_j) / (z_{j+1} - z_j),   z = y^(1-a) / (1-a)

which is exact on both ``1`` and ``y^(1-a)``. Each per-mode matrix is a
symmetric M-matrix.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.special import kve

from .core import (
    ExtendedField,
    FractionalParams,
    GradedYGrid,
    ScalarField,
    TorusGrid,
    default_gamma,
    fit_exponent,
)
from .errors import FracdriftError, InvalidArgument, OracleFailure

__all__ = [
    "ExtensionSolution",
    "ExpansionFit",
    "SpecialSolution",
    "special_solutions",
    "special_solution_errors",
    "default_ygrid",
    "thomas",
    "boundary_flux",
    "mode_multipliers",
    "solve_extension",
    "mode_ode_oracle",
    "calibration_constant",
    "poisson_multiplier",
    "poisson_extend",
    "expansion_fit",
    "poisson_expansion_fit",
    "flux_residual",
    "corollary_constants",
    "check_corollary_expansion",
]

TopBC = Literal["mode_decay", "zero"]
Horizontal = Literal["spectral", "fd"]


# ---------------------------------------------------------------------------
# discrete operator pieces


def _zcoord(y: np.ndarray, a: float) -> np.ndarray:
    return y ** (1.0 - a) / (1.0 - a)


def _cell_weights(y: np.ndarray, a: float) -> np.ndarray:
    """``int y^a dy`` over the dual cell of every node (half cells at the ends)."""
    faces = np.concatenate([[y[0]], 0.5 * (y[1:] + y[:-1]), [y[-1]]])
    prim = faces ** (1.0 + a) / (1.0 + a)
    return np.diff(prim)


def thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal solve, vectorized over trailing axes.

    ``diag`` and ``rhs`` have shape ``(m, ...)``; ``lower[i]`` multiplies
    ``x[i-1]`` in row ``i`` (``lower[0]`` unused) and ``upper[i]``
    multiplies ``x[i+1]`` (``upper[-1]`` unused). No pivoting: callers pass
    diagonally dominant systems.
    """
    m = diag.shape[0]
    lower = np.broadcast_to(np.asarray(lower, dtype=float).reshape((m,) + (1,) * (diag.ndim - 1)), diag.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float).reshape((m,) + (1,) * (diag.ndim - 1)), diag.shape)
    cp = np.empty(diag.shape)
    dp = np.empty(np.broadcast_shapes(diag.shape, rhs.shape), dtype=np.result_type(diag, rhs))
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, m):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x = np.empty_like(dp)
    x[-1] = dp[-1]
    for i in range(m - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _horizontal_symbol(grid: TorusGrid, horizontal: Horizontal) -> np.ndarray:
    """Eigenvalues of ``-Delta_x`` on the ``rfftn`` lattice."""
    if horizontal == "spectral":
        return grid.kabs() ** 2
    if horizontal == "fd":
        return sum((2.0 - 2.0 * np.cos(k * grid.h)) / grid.h**2 for k in grid.wavenumbers())
    raise InvalidArgument(f"unknown horizontal operator {horizontal!r}")


def _decay_ratio(k: np.ndarray, Y: float, s: float) -> np.ndarray:
    """``phi'(Y)/phi(Y)`` for the decaying mode ``phi = y^s K_s(k y)``."""
    k = np.asarray(k, dtype=float)
    out = np.zeros_like(k)
    pos = k > 0
    kk = k[pos]
    out[pos] = -kk * kve(1.0 - s, kk * Y) / kve(s, kk * Y)
    return out


def mode_multipliers(
    lam: np.ndarray, p: FractionalParams, ygrid: GradedYGrid, top_bc: TopBC = "mode_decay"
) -> np.ndarray:
    """Discrete extension profiles ``phi_j(lam)`` with ``phi_0 = 1``.

    ``lam`` holds eigenvalues of ``-Delta_x`` (any shape); the result has
    shape ``(M + 1,) + lam.shape``. The zero eigenvalue always gets the
    constant profile.
    """
    a = p.a
    y = ygrid.nodes
    lam = np.asarray(lam, dtype=float)
    flat = lam.ravel()
    z = _zcoord(y, a)
    inv_dz = 1.0 / np.diff(z)  # face conductances, length M
    W = _cell_weights(y, a)
    M = ygrid.M
    if top_bc == "mode_decay":
        m = M  # unknowns y_1..y_M
        lower = np.concatenate([[0.0], -inv_dz[1:M]])
        upper = np.concatenate([-inv_dz[1:M], [0.0]])
        base = np.concatenate([inv_dz[: M - 1] + inv_dz[1:M], [inv_dz[M - 1]]])
        diag = base[:, None] + W[1 : M + 1, None] * flat[None, :]
        ratio = _decay_ratio(np.sqrt(flat), ygrid.Y, p.s)
        diag[-1] -= ygrid.Y**a * ratio
    elif top_bc == "zero":
        m = M - 1  # unknowns y_1..y_{M-1}
        lower = np.concatenate([[0.0], -inv_dz[1 : M - 1]])
        upper = np.concatenate([-inv_dz[1 : M - 1], [0.0]])
        base = inv_dz[: M - 1] + inv_dz[1:M]
        diag = base[:, None] + W[1:M, None] * flat[None, :]
    else:
        raise InvalidArgument(f"unknown top boundary condition {top_bc!r}")
    rhs = np.zeros((m, flat.size))
    rhs[0] = inv_dz[0]
    phi = np.empty((M + 1, flat.size))
    phi[0] = 1.0
    phi[1 : m + 1] = thomas(lower, diag, upper, rhs)
    if top_bc == "zero":
        phi[M] = 0.0
    zero = flat == 0.0
    phi[:, zero] = 1.0
    return phi.reshape((M + 1,) + lam.shape)


def boundary_flux(values: np.ndarray, ygrid: GradedYGrid, p: FractionalParams) -> np.ndarray:
    """Raw DtN ``(1-a) (u(y_1) - u(0)) / y_1^(1-a)`` (approximates ``lim y^a u_y``)."""
    y1 = ygrid.nodes[1]
    return (1.0 - p.a) * (values[1] - values[0]) / y1 ** (1.0 - p.a)


def flux_residual(
    values: np.ndarray,
    ygrid: GradedYGrid,
    p: FractionalParams,
    lap_x: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Flux balance of ``div(y^a grad u)`` over the dual cells of nodes ``j = 1..M-1``.

    ``lap_x`` maps an array whose leading axis is ``y`` to its horizontal
    Laplacian. The result has the layout of ``values[1:-1]`` and equals
    ``F_{j+1/2} - F_{j-1/2} + W_j Delta_x u_j`` with ``W_j`` the integral
    of ``y^a`` over the cell. It is left unnormalized: dividing by the
    tiny cells near ``y = 0`` would only amplify round-off.
    """
    a = p.a
    y = ygrid.nodes
    z = _zcoord(y, a)
    shape = (-1,) + (1,) * (values.ndim - 1)
    F = np.diff(values, axis=0) / np.diff(z).reshape(shape)
    W = _cell_weights(y, a)[1:-1].reshape(shape)
    return F[1:] - F[:-1] + W * lap_x(values[1:-1])


# ---------------------------------------------------------------------------
# independent per-mode oracle


def mode_ode_oracle(
    k: float,
    p: FractionalParams,
    Y: float,
    rtols: tuple[float, ...] = (1e-9, 1e-11, 1e-13),
    agree: float = 1e-8,
) -> float:
    """``-lim y^a phi'(0)`` for ``(y^a phi')' = k^2 y^a phi``, ``phi(0)=1``, ``phi(Y)=0``.

    Solved by linear shooting in ``z = y^(1-a)/(1-a)``, where the equation
    becomes ``phi_zz = k^2 y(z)^(2a) phi`` and the flux is ``phi_z``. The
    tolerance is tightened until two successive answers agree to ``agree``.
    """
    k = float(k)
    if k == 0:
        raise InvalidArgument("oracle needs k != 0")
    if abs(k) * Y < 10:
        raise InvalidArgument(f"need |k| Y >= 10 for decay, got {abs(k) * Y}")
    a = p.a
    k2 = k * k
    Z = Y ** (1.0 - a) / (1.0 - a)
    expo = 2.0 * a / (1.0 - a)

    def rhs(z, w):
        yz2a = ((1.0 - a) * z) ** expo if expo else 1.0
        return np.array([w[1], k2 * yz2a * w[0], w[3], k2 * yz2a * w[2]])

    prev = None
    for rtol in rtols:
        sol = solve_ivp(
            rhs, (0.0, Z), np.array([1.0, 0.0, 0.0, 1.0]), method="DOP853", rtol=rtol, atol=rtol * 1e-3
        )
        if not sol.success:
            raise OracleFailure(f"shooting failed: {sol.message}")
        phi1, phi2 = sol.y[0, -1], sol.y[2, -1]
        val = phi1 / phi2
        if prev is not None and abs(val - prev) <= agree * abs(val):
            return float(val)
        prev = val
    raise OracleFailure(f"oracle did not converge to {agree:.0e} for k={k}, s={p.s}")


@lru_cache(maxsize=64)
def _calibration(s: float, k1: float) -> float:
    p = FractionalParams(s)
    oracle = mode_ode_oracle(k1, p, 12.0 / k1)
    return -(k1 ** (2.0 * s)) / oracle


def calibration_constant(p: FractionalParams, grid: TorusGrid) -> float:
    """Signed ``c`` with ``(-Delta)^s f = c * lim y^a u_y``, matched on the lowest mode."""
    return _calibration(p.s, 2.0 * math.pi / grid.L)


# ---------------------------------------------------------------------------
# solutions


@dataclass(frozen=True)
class ExtensionSolution:
    field: ExtendedField
    params: FractionalParams
    dtn: ScalarField
    residual: float
    calibration: float
    top_bc: str = "mode_decay"
    horizontal: str = "spectral"

    @property
    def fractional_laplacian(self) -> ScalarField:
        """Calibrated DtN: the extension's estimate of ``(-Delta)^s f``."""
        return ScalarField(self.dtn.grid, self.calibration * self.dtn.values)

    def sidecar(self) -> dict:
        yg = self.field.ygrid
        return {
            "params": {"s": self.params.s, "a": self.params.a, "alpha": self.params.alpha, "n": self.params.n},
            "calibration": self.calibration,
            "residual": self.residual,
            "top_bc": self.top_bc,
            "horizontal": self.horizontal,
            "ygrid": {"Y": yg.Y, "M": yg.M, "gamma": yg.gamma},
        }

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_values(
        cls, xgrid: TorusGrid, ygrid: GradedYGrid, values: np.ndarray, p: FractionalParams, calibration: float = float("nan")
    ) -> "ExtensionSolution":
        """Wrap externally sampled values (e.g. a closed form) with its DtN."""
        fld = ExtendedField(xgrid, ygrid, values)
        dtn = ScalarField(xgrid, boundary_flux(fld.values, ygrid, p))
        return cls(fld, p, dtn, float("nan"), calibration, top_bc="external", horizontal="none")


def default_ygrid(p: FractionalParams, grid: TorusGrid, M: int = 256, Y: float | None = None) -> GradedYGrid:
    return GradedYGrid(Y=0.5 * grid.L if Y is None else Y, M=M, gamma=default_gamma(p))


def solve_extension(
    f: ScalarField,
    p: FractionalParams,
    ygrid: GradedYGrid | None = None,
    top_bc: TopBC = "mode_decay",
    horizontal: Horizontal = "spectral",
) -> ExtensionSolution:
    """Discrete extension of ``f`` on ``torus x [0, Y]``.

    ``top_bc='mode_decay'`` closes every mode with the exact decay ratio of
    ``y^s K_s(|k| y)``; ``'zero'`` imposes ``u(Y) = 0`` on non-constant
    modes (use ``Y >= 10 / k_min``).
    """
    if not np.all(np.isfinite(f.values)):
        raise InvalidArgument("trace must be finite")
    if f.grid.n != p.n:
        raise InvalidArgument("trace dimension does not match params.n")
    grid = f.grid
    ygrid = ygrid or default_ygrid(p, grid)
    lam = _horizontal_symbol(grid, horizontal)
    phi = mode_multipliers(lam, p, ygrid, top_bc)
    coeffs = grid.rfft(f.values)
    values = grid.irfft(phi * coeffs[None])
    values[0] = f.values  # exact trace at the nodes
    if not np.all(np.isfinite(values)):
        raise FracdriftError("extension solve produced non-finite values")

    def lap_x(v):
        return grid.irfft(-lam * grid.rfft(v))

    res = flux_residual(values, ygrid, p, lap_x)
    fld = ExtendedField(grid, ygrid, values)
    dtn = ScalarField(grid, boundary_flux(values, ygrid, p))
    return ExtensionSolution(
        fld,
        p,
        dtn,
        float(np.abs(res).max()) if res.size else 0.0,
        calibration_constant(p, grid),
        top_bc,
        horizontal,
    )


# ---------------------------------------------------------------------------
# Poisson kernel path


@lru_cache(maxsize=16)
def _poisson_mass(s: float) -> float:
    pw = 0.5 + s
    val, _ = quad(lambda t: (1.0 + t * t) ** -pw, 0.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=500)
    return 2.0 * val


def poisson_multiplier(rho: float, p: FractionalParams) -> float:
    """Fourier transform at ``|xi| y = rho`` of the unit-mass Poisson kernel.

    The kernel ``y^(1-a) / (|z|^2 + y^2)^((n+1-a)/2)`` integrated over
    ``n - 1`` directions is the one-dimensional kernel, so the transform is
    the same function of ``rho`` for ``n = 1, 2``. Quadrature only: large
    ``rho`` uses a Fourier-weighted integral, small ``rho`` the rescaled
    form ``1 - m = 2 C rho^(2s) int (1 - cos u)(rho^2 + u^2)^(-1/2-s) du``.
    """
    rho = abs(float(rho))
    if rho == 0.0:
        return 1.0
    pw = 0.5 + p.s
    C = 1.0 / _poisson_mass(p.s)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        if rho >= 1.0:
            val, _ = quad(
                lambda t: (1.0 + t * t) ** -pw, 0.0, np.inf, weight="cos", wvar=rho, epsabs=1e-15, limlst=200
            )
            return 2.0 * C * val
        U = 8.0 * np.pi

        def g(u):
            return (rho * rho + u * u) ** -pw

        inner, _ = quad(lambda u: (1.0 - np.cos(u)) * g(u), 0.0, U, epsabs=1e-15, epsrel=1e-13, limit=400)
        tail, _ = quad(g, U, np.inf, epsabs=1e-15, epsrel=1e-13)
        osc, _ = quad(g, U, np.inf, weight="cos", wvar=1.0, epsabs=1e-15)
    return 1.0 - 2.0 * C * rho ** (2.0 * p.s) * (inner + tail - osc)


def poisson_extend(f: ScalarField, p: FractionalParams, y: float) -> ScalarField:
    """Convolution of ``f`` with the periodized unit-mass Poisson kernel at height ``y``."""
    if not y > 0:
        raise InvalidArgument(f"height y must be positive, got {y}")
    grid = f.grid
    kabs = grid.kabs()
    uniq, inv = np.unique(np.round(kabs * y, 14), return_inverse=True)
    mult = np.array([poisson_multiplier(r, p) for r in uniq])[inv].reshape(kabs.shape)
    return ScalarField(grid, grid.irfft(mult * grid.rfft(f.values)))


# ---------------------------------------------------------------------------
# explicit solutions


@dataclass(frozen=True)
class SpecialSolution:
    """Closed-form solution of the extension problem and its raw DtN.

    ``evaluate`` takes the tuple of horizontal coordinate arrays and ``y``;
    ``dtn`` takes the coordinate tuple.
    """

    tag: str
    evaluate: Callable[[tuple, np.ndarray], np.ndarray]
    dtn: Callable[[tuple], np.ndarray]

    def sample(self, xgrid: TorusGrid, ygrid: GradedYGrid) -> ExtendedField:
        X = tuple(c[None] for c in xgrid.coords())
        y = ygrid.nodes.reshape((-1,) + (1,) * xgrid.n)
        vals = np.broadcast_to(self.evaluate(X, y), (ygrid.M + 1,) + xgrid.shape)
        return ExtendedField(xgrid, ygrid, vals)


def special_solutions(p: FractionalParams, A: float = 1.0) -> dict[str, SpecialSolution]:
    """The four lowest explicit solutions; ``x`` means the first coordinate.

    Keys: ``linear`` (A x), ``profile`` (y^(1-a)/(1-a)), ``mixed``
    (A x y^(1-a)/(1-a)) and ``quadratic`` (|x|^2 - n y^2/(1+a)).
    """
    a, n = p.a, p.n
    e = 1.0 - a

    def zero(X):
        return np.zeros_like(X[0])

    return {
        "linear": SpecialSolution("linear", lambda X, y: A * X[0] + 0.0 * y, zero),
        "profile": SpecialSolution("profile", lambda X, y: 0.0 * X[0] + y**e / e, lambda X: 1.0 + zero(X)),
        "mixed": SpecialSolution("mixed", lambda X, y: A * X[0] * y**e / e, lambda X: A * X[0]),
        "quadratic": SpecialSolution(
            "quadratic", lambda X, y: sum(c * c for c in X) - n / (1.0 + a) * y * y, zero
        ),
    }


def _interior_lap(values: np.ndarray, h: float, n: int) -> np.ndarray:
    """Second-difference Laplacian over the trailing ``n`` axes; edge columns are left at 0."""
    out = np.zeros_like(values)
    core = (slice(None),) + (slice(1, -1),) * n
    for ax in range(1, n + 1):
        fwd = [slice(None)] + [slice(1, -1)] * n
        bwd = list(fwd)
        fwd[ax], bwd[ax] = slice(2, None), slice(None, -2)
        out[core] += (values[tuple(fwd)] - 2.0 * values[core] + values[tuple(bwd)]) / h**2
    return out


def special_solution_errors(
    sol: SpecialSolution, p: FractionalParams, xgrid: TorusGrid, ygrid: GradedYGrid
) -> tuple[float, float]:
    """``(sup flux-balance residual, sup DtN error)`` of a closed form on the mesh.

    The closed forms are polynomials in ``x`` and not periodic, so the
    horizontal operator is the second difference (exact on them), and only
    interior columns are scored.
    """
    vals = np.asarray(sol.sample(xgrid, ygrid).values)
    n = xgrid.n
    res = flux_residual(vals, ygrid, p, lambda v: _interior_lap(v, xgrid.h, n))
    core = (slice(None),) + (slice(1, -1),) * n
    dtn_err = np.abs(boundary_flux(vals, ygrid, p) - sol.dtn(xgrid.coords()))
    return float(np.abs(res[core]).max()), float(dtn_err.max())


# ---------------------------------------------------------------------------
# expansion near y = 0


@dataclass(frozen=True)
class ExpansionFit:
    g: ScalarField
    band_edges: np.ndarray  # upper y of each dyadic band
    residuals: np.ndarray  # sup |u - f - y^(1-a) g| per band
    slope: float | None
    r2: float | None


def expansion_fit(sol: ExtensionSolution, min_levels: int = 6) -> ExpansionFit:
    """Extract ``g`` from the first level and measure the remainder band by band.

    Bands are ``(Y 2^-(m+1), Y 2^-m]`` for ``m >= 2`` and skip the node that
    defines ``g``; the slope is fitted over bands whose residual is
    positive, when at least three exist.
    """
    fld = sol.field
    a = sol.params.a
    y = fld.ygrid.nodes
    Y = fld.ygrid.Y
    if np.count_nonzero((y > 0) & (y < 0.25 * Y)) < min_levels:
        raise InvalidArgument(f"need at least {min_levels} y-levels below Y/4")
    f = fld.values[0]
    g = (fld.values[1] - f) / y[1] ** (1.0 - a)
    shape = (-1,) + (1,) * (fld.values.ndim - 1)
    rem = np.abs(fld.values - f[None] - (y ** (1.0 - a)).reshape(shape) * g[None])
    per_level = rem.reshape(rem.shape[0], -1).max(axis=1)
    usable = np.arange(y.size) >= 2  # g is read off node 1, so its residual is zero by construction
    edges, res = [], []
    m = 2
    while True:
        hi, lo = Y * 2.0**-m, Y * 2.0 ** -(m + 1)
        sel = (y > lo) & (y <= hi) & usable
        if hi < y[1]:
            break
        if np.any(sel):
            edges.append(hi)
            res.append(per_level[sel].max())
        m += 1
    edges = np.array(edges)
    res = np.array(res)
    ok = res > 0
    slope = r2 = None
    if np.count_nonzero(ok) >= 3:
        slope, r2 = fit_exponent(edges[ok], res[ok])
    return ExpansionFit(ScalarField(fld.xgrid, g), edges, res, slope, r2)


def poisson_expansion_fit(
    f: ScalarField, p: FractionalParams, heights: np.ndarray, y_g: float | None = None
) -> ExpansionFit:
    """Expansion remainder of the Poisson-kernel extension at the given heights.

    ``g`` comes from the kernel path alone, read at ``y_g`` (default: a
    sixteenth of the smallest height). Each height plays the role of a band.
    """
    heights = np.sort(np.asarray(heights, dtype=float))[::-1]
    if heights.size < 3 or np.any(heights <= 0):
        raise InvalidArgument("need at least three positive heights")
    y_g = heights[-1] / 16.0 if y_g is None else float(y_g)
    e = 1.0 - p.a
    g = (poisson_extend(f, p, y_g).values - f.values) / y_g**e
    res = np.array([np.abs(poisson_extend(f, p, y).values - f.values - y**e * g).max() for y in heights])
    ok = res > 0
    slope = r2 = None
    if np.count_nonzero(ok) >= 3:
        slope, r2 = fit_exponent(heights[ok], res[ok])
    return ExpansionFit(ScalarField(f.grid, g), heights, res, slope, r2)


def _fd_gradient(values: np.ndarray, grid: TorusGrid, idx: tuple[int, ...]) -> np.ndarray:
    """Fourth-order centred gradient of a trace at one node (no periodicity assumed)."""
    out = []
    h = grid.h
    for axis in range(grid.n):
        def at(off):
            j = list(idx)
            j[axis] += off
            return values[tuple(j)]
        out.append((-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h))
    return np.array(out)


def corollary_constants(
    sol: ExtensionSolution, x0_index: tuple[int, ...] | None = None, radii: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, float]:
    """Empirical ``C`` of ``|u - f(x0) - grad f(x0).x - D y^(1-a)| <= C (x^2 + y^2 + |x| y^(1-a))``.

    Returns ``(radii, C_per_radius, D)``; ``C`` on a radius is the sup of the
    quotient over nodes of the half ball of that radius around ``(x0, 0)``.
    """
    fld = sol.field
    grid = fld.xgrid
    a = sol.params.a
    idx = x0_index if x0_index is not None else grid.origin_index
    fit_g = (fld.values[1] - fld.values[0]) / fld.ygrid.nodes[1] ** (1.0 - a)
    D = float(fit_g[idx])
    f0 = fld.values[0][idx]
    grad = _fd_gradient(fld.values[0], grid, idx)
    x0 = np.array([grid.x[i] for i in idx])
    coords = grid.coords()
    dx = [c - x0[i] for i, c in enumerate(coords)]
    lin = sum(gi * di for gi, di in zip(grad, dx))
    xnorm = np.sqrt(sum(d * d for d in dx))
    y = fld.ygrid.nodes.reshape((-1,) + (1,) * grid.n)
    model = f0 + lin[None] + D * y ** (1.0 - a)
    err = np.abs(fld.values - model)
    denom = xnorm[None] ** 2 + y**2 + xnorm[None] * y ** (1.0 - a)
    dist = np.sqrt(xnorm[None] ** 2 + y**2)
    if radii is None:
        radii = 0.5 ** np.arange(1, 6)
    consts = []
    for r in radii:
        sel = (dist <= r) & (denom > 0)
        if not np.any(sel):
            raise InvalidArgument(f"no nodes in the half ball of radius {r}")
        consts.append(float((err[sel] / denom[sel]).max()))
    return np.asarray(radii, dtype=float), np.array(consts), D


def check_corollary_expansion(sol: ExtensionSolution, x0_index: tuple[int, ...] | None = None) -> float:
    """Smallest ``C`` valid on every half ball of the shrinking family."""
    _, consts, _ = corollary_constants(sol, x0_index)
    return float(consts.max())

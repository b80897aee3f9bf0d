"""Fourier-multiplier realizations of the fractional Laplacian and its heat semigroup.

Symbols are functions of the cyclic wavenumber magnitude ``|2 pi k / L|``
with ``k`` in ``{-N/2+1, ..., N/2}``. In one dimension ``|k|^{2s}`` is
conditionally negative definite on the cyclic group for ``s <= 1/2``, so
the discrete propagator kernel is a probability vector and the maximum
principle holds to round-off.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .core import FractionalParams, ScalarField, TorusGrid, fit_exponent
from .errors import DomainError, InvalidArgument, ResolutionError

__all__ = [
    "MultiplierOp",
    "HeatProfile",
    "frac_laplacian_op",
    "propagator_op",
    "frac_laplacian",
    "heat_propagate",
    "heat_kernel",
    "heat_profile",
    "selfsimilar_check",
]


@dataclass(frozen=True)
class MultiplierOp:
    """Real, even Fourier multiplier stored on the ``rfftn`` lattice."""

    grid: TorusGrid
    symbol: np.ndarray

    def __post_init__(self):
        sym = np.broadcast_to(np.asarray(self.symbol, dtype=float), self.grid.kabs().shape).copy()
        sym.flags.writeable = False
        object.__setattr__(self, "symbol", sym)

    @property
    def zero_mode(self) -> float:
        return float(self.symbol.flat[0])

    def apply(self, f: ScalarField) -> ScalarField:
        if f.grid != self.grid:
            raise InvalidArgument("field and operator live on different grids")
        return ScalarField(self.grid, self.apply_array(f.values))

    def apply_array(self, values: np.ndarray) -> np.ndarray:
        return self.grid.irfft(self.symbol * self.grid.rfft(values))

    def compose(self, other: "MultiplierOp") -> "MultiplierOp":
        return MultiplierOp(self.grid, self.symbol * other.symbol)

    def to_csv(self) -> str:
        """``k1[,k2],symbol`` rows, one per stored frequency."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        ks = np.broadcast_arrays(*self.grid.wavenumbers(), self.symbol)
        header = [f"k{i + 1}" for i in range(self.grid.n)] + ["symbol"]
        w.writerow(header)
        for row in zip(*(a.ravel() for a in ks)):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def frac_laplacian_op(grid: TorusGrid, p: FractionalParams) -> MultiplierOp:
    return MultiplierOp(grid, grid.kabs() ** (2.0 * p.s))


def propagator_op(grid: TorusGrid, p: FractionalParams, t: float, eps: float = 0.0) -> MultiplierOp:
    """``exp(-t (|k|^{2s} + eps |k|^2))``; the zero mode is exactly 1."""
    if t < 0:
        raise InvalidArgument(f"propagation time must be non-negative, got {t}")
    if eps < 0:
        raise InvalidArgument(f"artificial viscosity must be non-negative, got {eps}")
    k = grid.kabs()
    return MultiplierOp(grid, np.exp(-t * (k ** (2.0 * p.s) + eps * k * k)))


def _check_finite(f: ScalarField):
    if not np.all(np.isfinite(f.values)):
        raise InvalidArgument("input field must be finite")


def frac_laplacian(f: ScalarField, p: FractionalParams) -> ScalarField:
    _check_finite(f)
    return frac_laplacian_op(f.grid, p).apply(f)


def heat_propagate(f: ScalarField, t: float, p: FractionalParams, eps: float = 0.0) -> ScalarField:
    _check_finite(f)
    return propagator_op(f.grid, p, t, eps).apply(f)


def heat_kernel(grid: TorusGrid, p: FractionalParams, t: float) -> np.ndarray:
    """Periodic fractional heat kernel ``h(t, x)`` sampled on the grid, centred at the origin node."""
    if t <= 0:
        raise InvalidArgument(f"kernel time must be positive, got {t}")
    sym = np.exp(-t * grid.kabs() ** (2.0 * p.s))
    vals = grid.irfft(sym) / grid.h**grid.n
    return np.fft.fftshift(vals)


@dataclass(frozen=True)
class HeatProfile:
    """Self-similar profile ``H(x, 0)`` sampled on a grid centred at the origin."""

    params: FractionalParams
    grid: TorusGrid
    values: np.ndarray
    mass: float
    nyquist_symbol: float

    def radial_samples(self) -> tuple[np.ndarray, np.ndarray]:
        """Values along the positive first axis, ``x > 0``."""
        mid = self.grid.N // 2
        x = self.grid.x[mid + 1 :]
        if self.grid.n == 1:
            v = self.values[mid + 1 :]
        else:
            v = self.values[mid + 1 :, mid]
        return x, v

    def tail_fit(self, xmin: float, xmax: float) -> tuple[float, float]:
        """Log-log slope of ``H(x, 0)`` over ``xmin <= x <= xmax`` on dyadic-spaced samples."""
        x, v = self.radial_samples()
        targets = np.geomspace(xmin, xmax, 2 * max(3, int(np.log2(xmax / xmin)) + 1))
        idx = np.unique(np.searchsorted(x, targets).clip(0, x.size - 1))
        if np.any(v[idx] <= 0):
            raise ResolutionError("profile is not positive over the requested tail range")
        return fit_exponent(x[idx], v[idx])


def heat_profile(p: FractionalParams, grid: TorusGrid, tol: float = 1e-12) -> HeatProfile:
    """Inverse transform of ``exp(-|xi|^{2s})`` (the ``t = 1`` kernel)."""
    if grid.n != p.n:
        raise InvalidArgument("grid dimension does not match params.n")
    kmax = np.pi / grid.h
    nyq = float(np.exp(-(kmax ** (2.0 * p.s))))
    if nyq >= tol:
        raise ResolutionError(
            f"symbol at Nyquist is {nyq:.3e} >= {tol:.0e}; increase N (or decrease L)"
        )
    vals = heat_kernel(grid, p, 1.0)
    mass = float(vals.sum() * grid.h**grid.n)
    vals.flags.writeable = False
    return HeatProfile(p, grid, vals, mass, nyq)


def _interp_at_scaled(grid: TorusGrid, values: np.ndarray, lam: float) -> np.ndarray:
    """Evaluate the periodic field at ``lam * x`` for every node ``x``."""
    x = grid.x
    xe = np.append(x, x[0] + grid.L)
    if grid.n == 1:
        ve = np.append(values, values[0])
        return CubicSpline(xe, ve, bc_type="periodic")(lam * x)
    ve = np.pad(values, ((0, 1), (0, 1)), mode="wrap")
    spl = RectBivariateSpline(xe, xe, ve, kx=3, ky=3)
    return spl(lam * x, lam * x)


def selfsimilar_check(p: FractionalParams, t1: float, t2: float, grid: TorusGrid) -> float:
    """Sup discrepancy between ``h(t2, x)`` and ``lam^n h(t1, lam x)``, ``lam = (t1/t2)^{1/2s}``.

    Compared on ``|x| <= L/4`` so that periodization of the wider kernel
    does not enter.
    """
    if not 0 < t1 <= t2:
        raise InvalidArgument(f"need 0 < t1 <= t2, got t1={t1}, t2={t2}")
    h1 = heat_kernel(grid, p, t1)
    h2 = heat_kernel(grid, p, t2)
    edge = np.max(np.abs(h2[0])) if grid.n == 1 else np.max(np.abs(np.concatenate([h2[0], h2[:, 0]])))
    if edge > 1e-3 * h2.max():
        raise DomainError(
            f"kernel at t2={t2} is not contained in the torus (edge/peak = {edge / h2.max():.2e})"
        )
    lam = (t1 / t2) ** (1.0 / (2.0 * p.s))
    predicted = lam**grid.n * _interp_at_scaled(grid, h1, lam)
    inner = np.abs(grid.x) <= 0.25 * grid.L
    diff = np.abs(predicted - h2)
    if grid.n == 1:
        return float(diff[inner].max())
    return float(diff[np.ix_(inner, inner)].max())

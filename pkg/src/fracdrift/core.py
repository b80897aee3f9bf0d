"""Grids, fields, exponent bookkeeping and the synthetic Hölder-class data.

Everything here is immutable once constructed: arrays held by the field
types are flagged read-only so that values can be shared between threads
and experiment jobs without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, ResolutionError

__all__ = [
    "FractionalParams",
    "TorusGrid",
    "GradedYGrid",
    "ScalarField",
    "ExtendedField",
    "HolderSynthConfig",
    "SplitMix64",
    "make_graded_grid",
    "default_gamma",
    "synth_holder",
    "holder_seminorm",
    "band_oscillation",
    "fit_exponent",
    "spectral_gradient",
]


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgument(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class FractionalParams:
    """Exponents of the drift-diffusion problem.

    ``a = 1 - 2s`` is derived on access so the pair can never disagree.
    ``alpha`` is the extra drift regularity and defaults to ``s`` (the
    midpoint of its admissible range).
    """

    s: float
    alpha: float | None = None
    n: int = 1

    def __post_init__(self):
        s = _finite("s", self.s)
        if not 0.0 < s <= 0.5:
            raise InvalidArgument(f"s must lie in (0, 0.5], got {s}")
        alpha = s if self.alpha is None else _finite("alpha", self.alpha)
        if not 0.0 < alpha < 2.0 * s:
            raise InvalidArgument(f"alpha must lie in (0, 2s) = (0, {2 * s}), got {alpha}")
        if self.n not in (1, 2):
            raise InvalidArgument(f"dimension n must be 1 or 2, got {self.n}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "alpha", alpha)

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on ``[-L/2, L/2)^n``; the origin is a node."""

    n: int = 1
    N: int = 128
    L: float = 2.0 * math.pi

    def __post_init__(self):
        if self.n not in (1, 2):
            raise InvalidArgument(f"dimension n must be 1 or 2, got {self.n}")
        N = int(self.N)
        if N < 8 or N & (N - 1):
            raise InvalidArgument(f"N must be a power of two >= 8, got {self.N}")
        L = _finite("L", self.L)
        if L <= 0:
            raise InvalidArgument(f"L must be positive, got {L}")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "L", L)

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def origin_index(self) -> tuple[int, ...]:
        return (self.N // 2,) * self.n

    @property
    def x(self) -> np.ndarray:
        """1D node coordinates along one axis."""
        return -0.5 * self.L + self.h * np.arange(self.N)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to ``shape`` (``indexing='ij'``)."""
        return tuple(np.meshgrid(*([self.x] * self.n), indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumbers in ``rfftn`` layout, broadcastable per axis."""
        ks = []
        for axis in range(self.n):
            if axis == self.n - 1:
                k = 2.0 * np.pi * np.fft.rfftfreq(self.N, d=self.h)
            else:
                k = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)
                # Nyquist treated symmetrically (sign is irrelevant to |k|).
                k[self.N // 2] = abs(k[self.N // 2])
            shape = [1] * self.n
            shape[axis] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    def kabs(self) -> np.ndarray:
        """|k| on the ``rfftn`` frequency lattice."""
        ks = self.wavenumbers()
        return np.sqrt(sum(k * k for k in ks))

    def rfft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values, axes=tuple(range(-self.n, 0)))

    def irfft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(coeffs, s=self.shape, axes=tuple(range(-self.n, 0)))


@dataclass(frozen=True)
class GradedYGrid:
    """Nodes ``y_j = Y (j/M)^gamma`` for ``j = 0..M``."""

    Y: float
    M: int
    gamma: float = 1.0
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        Y = _finite("Y", self.Y)
        gamma = _finite("gamma", self.gamma)
        if Y <= 0:
            raise InvalidArgument(f"Y must be positive, got {Y}")
        if int(self.M) != self.M or self.M < 4:
            raise InvalidArgument(f"M must be an integer >= 4, got {self.M}")
        if gamma < 1:
            raise InvalidArgument(f"gamma must be >= 1, got {gamma}")
        M = int(self.M)
        nodes = Y * (np.arange(M + 1) / M) ** gamma
        nodes[0], nodes[-1] = 0.0, Y
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "nodes", _frozen(nodes))


def default_gamma(p: FractionalParams) -> float:
    """Grading that makes ``y^((1-a)/2)`` uniform on the y-nodes."""
    return 2.0 / (1.0 - p.a)


def make_graded_grid(Y: float, M: int, gamma: float) -> GradedYGrid:
    return GradedYGrid(Y=Y, M=M, gamma=gamma)


@dataclass(frozen=True)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise InvalidArgument(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("field values must be finite")
        object.__setattr__(self, "values", _frozen(values))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    @property
    def osc(self) -> float:
        return float(self.values.max() - self.values.min())


@dataclass(frozen=True)
class ExtendedField:
    """Values on ``(y_j, x)`` nodes; ``values[0]`` is the trace at ``y = 0``."""

    xgrid: TorusGrid
    ygrid: GradedYGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.ygrid.M + 1,) + self.xgrid.shape
        if values.shape != expected:
            raise InvalidArgument(f"extended field shape {values.shape} != {expected}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def trace(self) -> ScalarField:
        return ScalarField(self.xgrid, self.values[0])

    def slice(self, j: int) -> ScalarField:
        return ScalarField(self.xgrid, self.values[j])


@dataclass(frozen=True)
class HolderSynthConfig:
    beta: float
    lam: int = 2
    J: int = 6
    seed: int = 0
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise InvalidArgument(f"beta must lie in (0, 1], got {self.beta}")
        if int(self.lam) != self.lam or self.lam < 2:
            raise InvalidArgument(f"lacunary base must be an integer > 1, got {self.lam}")
        if int(self.J) != self.J or self.J < 1:
            raise InvalidArgument(f"J must be a positive integer, got {self.J}")
        _finite("amplitude", self.amplitude)


class SplitMix64:
    """SplitMix64 stream (Steele, Lea & Flood), reproducible across languages.

    State advances by the golden-gamma constant; outputs use the standard
    finalizer. ``random()`` maps the top 53 bits to ``[0, 1)``.
    """

    _MASK = (1 << 64) - 1
    _GAMMA = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.state = int(seed) & self._MASK

    def next_u64(self) -> int:
        self.state = (self.state + self._GAMMA) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()


def synth_holder(cfg: HolderSynthConfig, grid: TorusGrid) -> ScalarField:
    """Lacunary Weierstrass sum ``sum_j lam^(-beta j) cos(lam^j 2 pi x / L + theta_j)``.

    Terms run over ``j = 1..J``. In two dimensions every term is applied
    along both axes with independent phases.
    """
    top = cfg.lam**cfg.J
    if top > grid.N // 2:
        raise ResolutionError(
            f"highest mode lam^J = {top} exceeds N/2 = {grid.N // 2}; refine the grid"
        )
    rng = SplitMix64(cfg.seed)
    coords = grid.coords()
    out = np.zeros(grid.shape)
    for j in range(1, cfg.J + 1):
        weight = float(cfg.lam) ** (-cfg.beta * j)
        freq = 2.0 * np.pi * cfg.lam**j / grid.L
        for xi in coords:
            theta = 2.0 * np.pi * rng.random()
            out += weight * np.cos(freq * xi + theta)
    return ScalarField(grid, cfg.amplitude * out)


def spectral_gradient(field: ScalarField) -> np.ndarray:
    """Gradient components (axis first) computed by Fourier differentiation."""
    grid = field.grid
    coeffs = grid.rfft(field.values)
    comps = []
    for k in grid.wavenumbers():
        kk = k.copy()
        # Nyquist derivative of a real field is ambiguous; drop it.
        kk[np.isclose(np.abs(kk), np.pi / grid.h)] = 0.0
        comps.append(grid.irfft(1j * kk * coeffs))
    return np.stack(comps)


def _band_offsets(grid: TorusGrid, scale: float) -> list[tuple[tuple[int, ...], float]]:
    lo, hi = 0.5 * scale, scale
    half = grid.N // 2
    out = []
    if grid.n == 1:
        for m in range(1, half + 1):
            d = m * grid.h
            if lo <= d <= hi:
                out.append(((m,), d))
    else:
        for m1 in range(0, half + 1):
            for m2 in range(-half + 1, half + 1):
                if m1 == 0 and m2 <= 0:
                    continue
                d = grid.h * math.hypot(m1, m2)
                if lo <= d <= hi:
                    out.append(((m1, m2), d))
    return out


def _band_sup(values: np.ndarray, grid: TorusGrid, scale: float, exponent: float) -> float:
    offsets = _band_offsets(grid, scale)
    if not offsets:
        raise InvalidArgument(f"no grid pairs at distances in [{scale / 2}, {scale}]")
    axes = tuple(range(values.ndim - grid.n, values.ndim))
    best = 0.0
    for shift, dist in offsets:
        diff = np.abs(np.roll(values, shift, axis=axes) - values)
        best = max(best, float(diff.max()) / dist**exponent)
    return best


def _check_scale(grid: TorusGrid, scale: float) -> float:
    scale = _finite("scale", scale)
    if not 0.0 < scale <= 0.5 * grid.L:
        raise InvalidArgument(f"scale must lie in (0, L/2], got {scale}")
    return scale


def holder_seminorm(field: ScalarField, exponent: float, scale: float) -> float:
    """Banded Hölder quotient at one dyadic scale.

    For ``exponent <= 1`` this is the sup of ``|u(x) - u(x')| / |x - x'|^exponent``
    over node pairs with ``|x - x'|`` in ``[scale/2, scale]`` (periodic
    distance). For ``1 < exponent <= 2`` the same quotient with exponent
    ``exponent - 1`` is applied to each component of the spectral gradient.
    """
    exponent = _finite("exponent", exponent)
    if not 0.0 < exponent <= 2.0:
        raise InvalidArgument(f"exponent must lie in (0, 2], got {exponent}")
    scale = _check_scale(field.grid, scale)
    if exponent <= 1.0:
        return _band_sup(field.values, field.grid, scale, exponent)
    grad = spectral_gradient(field)
    return _band_sup(grad, field.grid, scale, exponent - 1.0)


def band_oscillation(field: ScalarField, scale: float) -> float:
    """Largest increment ``|u(x) - u(x')|`` over the distance band of ``scale``."""
    scale = _check_scale(field.grid, scale)
    return _band_sup(field.values, field.grid, scale, 0.0)


def fit_exponent(scales: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of ``log(values)`` against ``log(scales)`` and its r²."""
    x = np.asarray(scales, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgument("scales and values must be 1D sequences of equal length")
    if x.size < 3:
        raise InvalidArgument(f"need at least 3 (scale, value) pairs, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidArgument("scales and values must be finite")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidArgument("scales and values must be strictly positive")
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-30 * max(1.0, float(np.sum(ly**2))):
        r2 = 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(r2)

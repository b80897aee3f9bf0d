"""Time stepping for ``u_t + b.grad u + (-Delta)^s u - eps Delta u = f`` on the torus.

Each step is a Lie splitting: the drift is advanced by a second-order
upwind (MUSCL, minmod) scheme on the advective form with SSP-RK2, then
diffusion and forcing are integrated exactly per Fourier mode::

    u <- exp(-dt L) u + dt phi1(dt L) f,   phi1(z) = (1 - e^-z) / z

The forward-Euler stage of the drift scheme is a convex combination of
neighbouring values while ``dt sum_i max|b_i| / h <= 2/3``, so the drift
substep never creates new extrema.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .core import FractionalParams, HolderSynthConfig, ScalarField, TorusGrid, band_oscillation, synth_holder
from .errors import InstabilityError, InvalidArgument, StepRejected

__all__ = [
    "CFL_MAX",
    "DriftField",
    "EvolutionState",
    "TimeSeries",
    "FlowPath",
    "advect_rate",
    "step",
    "solve_ivp",
    "flow_ode",
    "perturbation_experiment",
    "periodic_interp",
]

CFL_MAX = 0.5
T_START = -1.0

Forcing = Union[None, ScalarField, np.ndarray, Callable[[float], np.ndarray]]


def periodic_interp(values: np.ndarray, grid: TorusGrid, pts: np.ndarray) -> np.ndarray:
    """Periodic (bi)linear interpolation; ``pts`` has shape ``(m, n)``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x = grid.x
    if grid.n == 1:
        return np.interp(pts[:, 0], x, values, period=grid.L)
    xe = np.append(x, x[0] + grid.L)
    ve = np.pad(values, ((0, 1), (0, 1)), mode="wrap")
    wrapped = (pts - x[0]) % grid.L + x[0]
    return RegularGridInterpolator((xe, xe), ve)(wrapped)


# ---------------------------------------------------------------------------
# drift


@dataclass(frozen=True)
class DriftField:
    """Vector field ``b(t, x)``, either sampled or in closed form.

    Sampled data are linear in time between ``times`` (constant outside)
    and periodic-linear in space. A closed form is
    ``func(t, X) -> (n, ...)`` with ``X`` a tuple of coordinate arrays.
    ``holder`` is the claimed spatial exponent; nothing is assumed about
    the divergence.
    """

    grid: TorusGrid
    times: np.ndarray | None = None
    samples: np.ndarray | None = None  # (nt, n) + grid.shape
    func: Callable | None = None
    holder: float | None = None
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.samples is None) == (self.func is None):
            raise InvalidArgument("give exactly one of samples or func")
        if self.samples is not None:
            vals = np.array(self.samples, dtype=float)
            times = np.array(self.times if self.times is not None else [0.0], dtype=float)
            if vals.shape != (times.size, self.grid.n) + self.grid.shape:
                raise InvalidArgument(f"drift samples have shape {vals.shape}")
            if not np.all(np.isfinite(vals)):
                raise InvalidArgument("drift samples must be finite")
            if np.any(np.diff(times) <= 0):
                raise InvalidArgument("drift sample times must increase")
            vals.flags.writeable = False
            times.flags.writeable = False
            object.__setattr__(self, "samples", vals)
            object.__setattr__(self, "times", times)

    @classmethod
    def zero(cls, grid: TorusGrid) -> "DriftField":
        return cls(grid, samples=np.zeros((1, grid.n) + grid.shape), descriptor={"kind": "zero"})

    @classmethod
    def constant(cls, grid: TorusGrid, c: Sequence[float] | float) -> "DriftField":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        if c.size != grid.n:
            raise InvalidArgument("constant drift needs one component per dimension")
        vals = np.broadcast_to(c.reshape((1, grid.n) + (1,) * grid.n), (1, grid.n) + grid.shape)
        return cls(grid, samples=vals, descriptor={"kind": "constant", "c": c.tolist()})

    @classmethod
    def from_callable(cls, grid: TorusGrid, func: Callable, holder: float | None = None, **descriptor) -> "DriftField":
        return cls(grid, func=func, holder=holder, descriptor={"kind": "closed_form", **descriptor})

    @classmethod
    def synthesize(cls, grid: TorusGrid, cfgs: Sequence[HolderSynthConfig]) -> "DriftField":
        """Time-independent drift with one lacunary component per axis."""
        if len(cfgs) != grid.n:
            raise InvalidArgument("need one synthesis config per component")
        comps = np.stack([synth_holder(c, grid).values for c in cfgs])
        desc = {
            "kind": "lacunary",
            "components": [{"beta": c.beta, "lam": c.lam, "J": c.J, "seed": c.seed, "amplitude": c.amplitude} for c in cfgs],
        }
        return cls(grid, samples=comps[None], holder=cfgs[0].beta, descriptor=desc)

    def scaled(self, factor: float) -> "DriftField":
        if self.func is not None:
            f = self.func
            return DriftField(self.grid, func=lambda t, X: factor * np.asarray(f(t, X)), holder=self.holder,
                              descriptor={**self.descriptor, "scale": factor})
        return DriftField(self.grid, self.times, factor * self.samples, holder=self.holder,
                          descriptor={**self.descriptor, "scale": factor})

    def at(self, t: float) -> np.ndarray:
        """``b(t, .)`` on the grid, shape ``(n,) + grid.shape``."""
        if self.func is not None:
            out = np.asarray(self.func(t, self.grid.coords()), dtype=float)
            return np.broadcast_to(out, (self.grid.n,) + self.grid.shape)
        ts = self.times
        if ts.size == 1 or t <= ts[0]:
            return self.samples[0]
        if t >= ts[-1]:
            return self.samples[-1]
        i = int(np.searchsorted(ts, t)) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1.0 - w) * self.samples[i] + w * self.samples[i + 1]

    def at_points(self, t: float, pts: np.ndarray) -> np.ndarray:
        """``b(t, pts)`` for ``pts`` of shape ``(m, n)``; returns ``(m, n)``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.func is not None:
            X = tuple(pts[:, i] for i in range(self.grid.n))
            out = np.asarray(self.func(t, X), dtype=float)
            return np.broadcast_to(out, (self.grid.n, pts.shape[0])).T
        bt = self.at(t)
        return np.stack([periodic_interp(bt[i], self.grid, pts) for i in range(self.grid.n)], axis=1)

    def sup(self, t0: float = T_START, t1: float = 0.0) -> np.ndarray:
        """Per-component sup of ``|b|`` over the time window (sampled slices or 65 probes)."""
        if self.func is None:
            return np.abs(self.samples).reshape(self.samples.shape[0], self.grid.n, -1).max(axis=(0, 2))
        probes = np.linspace(t0, t1, 65)
        return np.max([np.abs(self.at(t)).reshape(self.grid.n, -1).max(axis=1) for t in probes], axis=0)


# ---------------------------------------------------------------------------
# state and stepping


@dataclass(frozen=True)
class EvolutionState:
    t: float
    u: ScalarField
    params: FractionalParams
    eps: float = 0.0
    dt: float | None = None  # last accepted step
    cfl: float | None = None  # its CFL number

    def __post_init__(self):
        if self.eps < 0 or not math.isfinite(self.eps):
            raise InvalidArgument(f"eps must be finite and >= 0, got {self.eps}")


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def advect_rate(u: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """``-b . grad u`` by second-order upwind reconstruction (minmod-limited)."""
    out = np.zeros_like(u)
    for ax in range(u.ndim):
        dm = u - np.roll(u, 1, axis=ax)  # u_i - u_{i-1}
        dp = np.roll(dm, -1, axis=ax)  # u_{i+1} - u_i
        slope = _minmod(dm, dp)
        left_face = u + 0.5 * slope  # value at i+1/2 from the left
        right_face = u - 0.5 * slope  # value at i-1/2 from the right
        d_up = (left_face - np.roll(left_face, 1, axis=ax)) / h
        d_dn = (np.roll(right_face, -1, axis=ax) - right_face) / h
        bx = b[ax]
        out -= np.where(bx > 0, bx * d_up, bx * d_dn)
    return out


def _forcing_values(f: Forcing, grid: TorusGrid, t: float) -> np.ndarray | None:
    if f is None:
        return None
    if isinstance(f, ScalarField):
        return f.values
    if callable(f):
        out = np.asarray(f(t), dtype=float)
    else:
        out = np.asarray(f, dtype=float)
    if out.shape != grid.shape:
        raise InvalidArgument(f"forcing shape {out.shape} != grid shape {grid.shape}")
    return out


def _diffusion_symbols(grid: TorusGrid, p: FractionalParams, eps: float, dt: float):
    k = grid.kabs()
    z = dt * (k ** (2.0 * p.s) + eps * k * k)
    decay = np.exp(-z)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi1 = np.where(z > 1e-8, -np.expm1(-z) / np.where(z > 0, z, 1.0), 1.0 - 0.5 * z)
    return decay, phi1


def admissible_dt(b: DriftField, grid: TorusGrid, t0: float, t1: float, cfl_max: float = CFL_MAX) -> float:
    speed = float(np.sum(b.sup(t0, t1)))
    return math.inf if speed == 0 else cfl_max * grid.h / speed


def step(
    state: EvolutionState,
    b: DriftField,
    f: Forcing,
    dt: float,
    cfl_max: float = CFL_MAX,
    diffusion: bool = True,
) -> EvolutionState:
    """One split step of length ``dt``. ``diffusion=False`` leaves only the drift (test hook)."""
    if not dt > 0 or not math.isfinite(dt):
        raise InvalidArgument(f"dt must be positive, got {dt}")
    grid = state.u.grid
    if b.grid != grid:
        raise InvalidArgument("drift and field live on different grids")
    t = state.t
    b0, b1 = b.at(t), b.at(t + dt)
    speed = float(np.sum(np.maximum(np.abs(b0).reshape(grid.n, -1).max(axis=1),
                                    np.abs(b1).reshape(grid.n, -1).max(axis=1))))
    cfl = dt * speed / grid.h
    if cfl > cfl_max * (1 + 1e-12):
        raise StepRejected(f"CFL {cfl:.3f} exceeds {cfl_max}", cfl_max * grid.h / speed)
    u = state.u.values
    if speed > 0:
        u1 = u + dt * advect_rate(u, b0, grid.h)
        u = 0.5 * u + 0.5 * (u1 + dt * advect_rate(u1, b1, grid.h))
    fv = _forcing_values(f, grid, t + 0.5 * dt)
    if diffusion:
        decay, phi1 = _diffusion_symbols(grid, state.params, state.eps, dt)
        coeffs = decay * grid.rfft(u)
        if fv is not None:
            coeffs = coeffs + dt * phi1 * grid.rfft(fv)
        u = grid.irfft(coeffs)
    elif fv is not None:
        u = u + dt * fv
    return EvolutionState(t + dt, ScalarField(grid, u), state.params, state.eps, dt, cfl)


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class TimeSeries:
    t: np.ndarray
    sup: np.ndarray
    mean: np.ndarray
    energy: np.ndarray
    band_scales: np.ndarray
    bands: np.ndarray  # (nt, nscales) oscillation per dyadic band
    history: np.ndarray | None = None  # (nt,) + grid.shape when kept

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "sup", "mean", "energy"] + [f"band_{r!r}" for r in self.band_scales.tolist()])
        for i in range(self.t.size):
            row = [self.t[i], self.sup[i], self.mean[i], self.energy[i]] + list(self.bands[i])
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _default_band_scales(grid: TorusGrid) -> np.ndarray:
    top = grid.L / 4
    scales = top * 0.5 ** np.arange(0, 8)
    return scales[scales >= 2 * grid.h]


def _record(u: np.ndarray, grid: TorusGrid, scales: np.ndarray) -> tuple[float, float, float, list]:
    fld = ScalarField(grid, u)
    vol = grid.h**grid.n
    return (
        float(np.abs(u).max()),
        float(u.mean()),
        float(0.5 * np.sum(u * u) * vol),
        [band_oscillation(fld, r) for r in scales],
    )


def solve_ivp(
    u0: ScalarField,
    b: DriftField,
    f: Forcing,
    T: float,
    p: FractionalParams,
    eps: float = 0.0,
    dt: float | None = None,
    t0: float = T_START,
    cfl_max: float = CFL_MAX,
    band_scales: np.ndarray | None = None,
    keep_history: bool = False,
    diffusion: bool = True,
) -> tuple[EvolutionState, TimeSeries]:
    """Evolve ``u0`` from ``t0`` over ``[t0, t0 + T]`` with uniform steps.

    ``dt`` defaults to the largest admissible step (at most ``T / 16``);
    it is then shrunk so that the steps tile ``[t0, t0 + T]`` exactly.
    """
    if not T > 0 or not math.isfinite(T):
        raise InvalidArgument(f"T must be positive, got {T}")
    if not np.all(np.isfinite(u0.values)):
        raise InvalidArgument("initial data must be finite")
    grid = u0.grid
    limit = admissible_dt(b, grid, t0, t0 + T, cfl_max)
    target = min(limit, T / 16) if dt is None else float(dt)
    if target > limit * (1 + 1e-12):
        raise StepRejected(f"requested dt={target} exceeds CFL limit", limit)
    nsteps = max(1, math.ceil(T / target - 1e-9))
    dt = T / nsteps
    fsup = 0.0
    if f is not None:
        probes = [t0 + T * i / 8 for i in range(9)]
        fsup = max(float(np.abs(_forcing_values(f, grid, tt)).max()) for tt in probes)
    guard = 10.0 * (float(np.abs(u0.values).max()) + T * fsup) + 1e-300
    scales = _default_band_scales(grid) if band_scales is None else np.asarray(band_scales, dtype=float)
    state = EvolutionState(t0, u0, p, eps)
    rows = [_record(u0.values, grid, scales)]
    times = [t0]
    hist = [u0.values] if keep_history else None
    for i in range(nsteps):
        state = step(state, b, f, dt, cfl_max, diffusion)
        # land exactly on the grid of times
        state = EvolutionState(t0 + (i + 1) * dt, state.u, p, eps, state.dt, state.cfl)
        u = state.u.values
        if float(np.abs(u).max()) > guard:
            raise InstabilityError(f"sup-norm {np.abs(u).max():.3e} exceeded guard {guard:.3e} at t={state.t}")
        rows.append(_record(u, grid, scales))
        times.append(state.t)
        if keep_history:
            hist.append(u)
    sup, mean, energy, bands = zip(*rows)
    series = TimeSeries(
        np.array(times),
        np.array(sup),
        np.array(mean),
        np.array(energy),
        scales,
        np.array(bands),
        np.array(hist) if keep_history else None,
    )
    return state, series


# ---------------------------------------------------------------------------
# flow


@dataclass(frozen=True)
class FlowPath:
    """Backward characteristic ``V`` with ``V(0) = 0`` and the forcing integral ``S``.

    ``times`` increase from the start of the window to 0. ``S`` satisfies
    ``S' = f(t, V(t))`` and ``S(0) = 0``, so that the moving-frame forcing
    ``f(t, x + V) - S'`` vanishes at the origin.
    """

    times: np.ndarray
    V: np.ndarray  # (nt, n)
    S: np.ndarray  # (nt,)

    def V_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.V[:, i]) for i in range(self.V.shape[1])])

    def S_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.S))


def _forcing_at_points(f: Forcing, grid: TorusGrid, t: float, pts: np.ndarray) -> float:
    if f is None:
        return 0.0
    return float(periodic_interp(_forcing_values(f, grid, t), grid, pts)[0])


def flow_ode(b: DriftField, f: Forcing = None, nsteps: int = 256, t0: float = T_START) -> FlowPath:
    """Classical RK4 for ``V' = b(t, V)`` backwards from ``V(0) = 0``, with ``S`` on the same clock."""
    if nsteps < 1:
        raise InvalidArgument("nsteps must be positive")
    grid = b.grid
    h = -t0 / nsteps
    times = np.linspace(t0, 0.0, nsteps + 1)
    V = np.zeros((nsteps + 1, grid.n))
    S = np.zeros(nsteps + 1)

    def rhs(t, v):
        return b.at_points(t, v[None])[0]

    def src(t, v):
        return _forcing_at_points(f, grid, t, v[None])

    for i in range(nsteps, 0, -1):
        t, v = times[i], V[i]
        k1 = rhs(t, v)
        k2 = rhs(t - h / 2, v - h / 2 * k1)
        k3 = rhs(t - h / 2, v - h / 2 * k2)
        k4 = rhs(t - h, v - h * k3)
        V[i - 1] = v - h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if f is not None:
            # Simpson on S' = f(t, V(t)); midpoint of V by cubic Hermite
            vm = 0.5 * (v + V[i - 1]) - h / 8 * (k1 - rhs(t - h, V[i - 1]))
            S[i - 1] = S[i] - h / 6 * (src(t, v) + 4 * src(t - h / 2, vm) + src(t - h, V[i - 1]))
    return FlowPath(times, V, S)


# ---------------------------------------------------------------------------
# approximation experiment


def perturbation_experiment(
    u0: ScalarField,
    b: DriftField,
    f: Forcing,
    delta: float,
    p: FractionalParams,
    eps: float = 0.0,
    nsteps: int = 128,
) -> float:
    """Sup over the run of ``|u - v|``: drifted vs driftless, unit time window.

    ``b`` and ``f`` are rescaled to sup-norm ``delta`` (``f`` only when it is
    non-zero); ``v`` solves the driftless, unforced problem without
    viscosity. Both runs share one step partition.
    """
    if delta < 0:
        raise InvalidArgument("delta must be non-negative")
    if eps > delta:
        raise InvalidArgument(f"eps={eps} must not exceed delta={delta}")
    grid = u0.grid
    bmax = float(np.max(b.sup()))
    bs = b.scaled(delta / bmax) if bmax > 0 else b.scaled(0.0)
    fs = None
    if f is not None:
        fv = _forcing_values(f, grid, T_START)
        fmax = float(np.abs(fv).max())
        if fmax > 0 and not callable(f):
            fs = ScalarField(grid, delta / fmax * fv)
        elif fmax > 0:
            fs = lambda t: delta / fmax * _forcing_values(f, grid, t)  # noqa: E731
    dt = 1.0 / nsteps
    limit = admissible_dt(bs, grid, T_START, 0.0)
    if dt > limit:
        dt = 1.0 / math.ceil(1.0 / limit)
    _, su = solve_ivp(u0, bs, fs, 1.0, p, eps, dt=dt, keep_history=True)
    _, sv = solve_ivp(u0, DriftField.zero(grid), None, 1.0, p, 0.0, dt=dt, keep_history=True)
    return float(np.abs(su.history - sv.history).max())

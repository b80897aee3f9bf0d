"""Named check suites shared by ``fracdrift validate`` and the acceptance tests.

Each suite returns a list of :class:`Check`; a check carries the measured
value, the bound it was compared with and the verdict, so a report can be
printed without recomputing anything.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .barriers import (
    caloric_residuals,
    check_bfun_properties,
    compute_bfun,
    make_barrier,
    verify_supersolution,
)
from .core import FractionalParams, GradedYGrid, HolderSynthConfig, ScalarField, TorusGrid, default_gamma
from .evolution import DriftField, perturbation_experiment
from .extension import (
    default_ygrid,
    expansion_fit,
    poisson_expansion_fit,
    solve_extension,
    special_solution_errors,
    special_solutions,
)
from .regularity import ExperimentConfig, driftless_flatness, smooth_data, theorem1_experiment, theorem2_experiment
from .spectral import frac_laplacian, heat_profile, heat_propagate, selfsimilar_check

__all__ = [
    "Check",
    "special_solution_suite",
    "dtn_suite",
    "expansion_suite",
    "barrier_suite",
    "bfun_suite",
    "heat_suite",
    "perturbation_suite",
    "flatness_suite",
    "exponent_suite",
    "all_passed",
]

ROUNDOFF = 1e-10  # errors at or below this count as exact


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.6g} ({self.bound})"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["value"] = None if not math.isfinite(self.value) else self.value
        return d


def all_passed(checks: Iterable[Check]) -> bool:
    return all(c.passed for c in checks)


def _order(coarse: float, fine: float) -> float:
    if fine <= ROUNDOFF:
        return math.inf
    if coarse <= 0:
        return -math.inf
    return math.log2(coarse / fine)


# ---------------------------------------------------------------------------
# extension


def special_solution_suite(p: FractionalParams, levels: tuple[int, ...] = (32, 64, 128)) -> list[Check]:
    """Residual and DtN error of the four closed forms under joint refinement of ``N`` and ``M``.

    Pass: the finest error is at round-off, or the observed order between
    the last two levels is at least 1. The DtN values themselves are
    compared with ``(0, 1, A x, 0)`` inside the DtN error.
    """
    out = []
    for tag, sol in special_solutions(p).items():
        errs = [
            special_solution_errors(sol, p, TorusGrid(p.n, m, 2.0), GradedYGrid(1.0, m, default_gamma(p)))
            for m in levels
        ]
        for k, label in ((0, "residual"), (1, "dtn")):
            o = _order(errs[-2][k], errs[-1][k])
            out.append(Check(f"special/{tag}/{label} order", o, f"finest {errs[-1][k]:.2e}; >= 1 or round-off", o >= 1))
    return out


def dtn_suite(p: FractionalParams, N: int = 128, M: int = 256, modes: int = 8, rel: float = 0.02) -> list[Check]:
    """Calibrated DtN of ``cos(k x)`` against ``|k|^(2s)`` for ``k = 2..modes`` (calibrated on k = 1)."""
    g = TorusGrid(1, N, 2 * math.pi)
    yg = default_ygrid(FractionalParams(p.s), g, M)
    worst = 0.0
    for k in range(2, modes + 1):
        sol = solve_extension(ScalarField(g, np.cos(k * g.x)), FractionalParams(p.s), yg)
        est = sol.fractional_laplacian.values
        worst = max(worst, float(np.abs(est - k ** (2 * p.s) * np.cos(k * g.x)).max()) / k ** (2 * p.s))
    return [Check(f"dtn/s={p.s} max relative error k=2..{modes}", worst, f"<= {rel}", worst <= rel)]


def expansion_suite(p: FractionalParams, seed: int = 3, window: tuple[float, float] = (1.7, 2.3)) -> list[Check]:
    g = TorusGrid(1, 128, 2 * math.pi)
    q = FractionalParams(p.s)
    f = smooth_data(g, 5, seed)
    fit = expansion_fit(solve_extension(f, q, default_ygrid(q, g, 256)))
    heights = math.pi * 2.0 ** -np.arange(3, 13)
    pfit = poisson_expansion_fit(f, q, heights)
    out = []
    for name, ft in (("solver", fit), ("poisson", pfit)):
        v = float("nan") if ft.slope is None else ft.slope
        out.append(Check(f"expansion/{name}/s={p.s} slope", v, f"in [{window[0]}, {window[1]}]", window[0] <= v <= window[1]))
    return out


# ---------------------------------------------------------------------------
# barriers


def barrier_suite(s: float = 0.25, h: float = 1 / 32) -> list[Check]:
    p = FractionalParams(s)
    out = []
    cases = [("sphere_boundary", al) for al in (0.25, 0.5, 0.75)] + [("flat_boundary", (1 - p.a) / 2)]
    for tag, al in cases:
        spec = make_barrier(tag, p, al, h=h)
        reps = [verify_supersolution(spec, hh) for hh in (h, h / 2)]
        ok = all(r.passed for r in reps) and math.isfinite(spec.C)
        out.append(Check(f"barrier/{tag}/alpha={al:g} C={spec.C:.4g}", max(r.max_value for r in reps),
                         "max operator <= tolerance at h and h/2", ok))
    cal = make_barrier("caloric_U", p)
    r1 = caloric_residuals(cal, 32)[1]
    r2 = caloric_residuals(cal, 64)[1]
    o = _order(r1, r2)
    out.append(Check("barrier/caloric_U interior residual order", o, ">= 1", o >= 1))
    bnd = caloric_residuals(cal, 64)[0]
    out.append(Check("barrier/caloric_U boundary residual", bnd, "<= 1e-8", bnd <= 1e-8))
    return out


def bfun_suite(s: float = 0.25, N: int = 128, M: int = 64) -> list[Check]:
    p = FractionalParams(s)
    B = compute_bfun(p, N=N, M=M)
    rep = check_bfun_properties(B)
    return [
        Check("bfun/boundary sup on (dB1)+", rep.boundary_sup, "<= 1e-3", rep.boundary_sup <= 1e-3),
        Check("bfun/Neumann datum relative error on inner half", rep.neumann_max_error, "<= 0.02", rep.neumann_max_error <= 0.02),
        Check(f"bfun/boundary decay exponent (s={s})", rep.decay_exponent, f"in [{s - 0.1:g}, {s + 0.1:g}]",
              abs(rep.decay_exponent - s) <= 0.1),
        Check("bfun/argmax at origin", float(rep.argmax_is_origin), "== 1", bool(rep.argmax_is_origin)),
    ]


# ---------------------------------------------------------------------------
# heat kernel


def heat_suite(s: float) -> list[Check]:
    p = FractionalParams(s)
    out = []
    g = TorusGrid(1, 4096, 2 * math.pi)
    f = smooth_data(g, 8, 11)
    two = heat_propagate(heat_propagate(f, 0.3, p), 0.4, p).values
    one = heat_propagate(f, 0.7, p).values
    rel = float(np.abs(two - one).max() / np.abs(one).max())
    out.append(Check(f"heat/s={s} semigroup relative", rel, "<= 1e-12", rel <= 1e-12))
    big = TorusGrid(1, 2**21, 4000.0)
    H = heat_profile(p, big)
    if s == 0.5:
        x, v = H.radial_samples()
        sel = x <= 20
        cauchy = 1 / (math.pi * (1 + x[sel] ** 2))
        err = float(np.max(np.abs(v[sel] - cauchy) / cauchy))
        out.append(Check("heat/s=0.5 Cauchy kernel relative", err, "<= 0.01", err <= 0.01))
    slope, _ = H.tail_fit(20.0, 80.0)
    target = -(1 + 2 * s)
    out.append(Check(f"heat/s={s} tail exponent", slope, f"within 0.15 of {target:g}", abs(slope - target) <= 0.15))
    ss = selfsimilar_check(p, 0.5, 1.0, TorusGrid(1, 2**14, 64 * math.pi))
    out.append(Check(f"heat/s={s} self-similarity", ss, "<= 1e-2", ss <= 1e-2))
    return out


# ---------------------------------------------------------------------------
# evolution and regularity


def perturbation_suite(s: float = 0.25, seeds: Iterable[int] = range(1, 6), deltas=(0.1, 0.05, 0.025)) -> list[Check]:
    """Drifted vs driftless runs from the same data: sup gap must not grow as the drift shrinks."""
    p = FractionalParams(s)
    g = TorusGrid(1, 256, 2 * math.pi)
    u0 = ScalarField(g, np.cos(g.x) + 0.2 * np.sin(3 * g.x))
    f = ScalarField(g, np.sin(2 * g.x))
    out = []
    for seed in seeds:
        b = DriftField.synthesize(g, [HolderSynthConfig(1 - 2 * s + p.alpha, 2, 6, seed)])
        gaps = [perturbation_experiment(u0, b, f, d, p) for d in deltas]
        mono = all(gaps[i + 1] <= gaps[i] for i in range(len(gaps) - 1))
        out.append(Check(f"perturbation/seed={seed} gaps {[round(x, 5) for x in gaps]}", gaps[-1],
                         "non-increasing as delta decreases", mono))
        zero = perturbation_experiment(u0, b, f, 0.0, p)
        out.append(Check(f"perturbation/seed={seed} delta=0", zero, "<= 1e-10", zero <= 1e-10))
    return out


def flatness_suite(s: float, seeds: Iterable[int] = range(1, 6), N: int = 512, slack: float = 0.2) -> list[Check]:
    out = []
    for seed in seeds:
        cfg = ExperimentConfig(s=s, alpha=s, N=N, seed=seed, delta=0.0)
        rep = driftless_flatness(cfg)
        v = float("nan") if rep.slope is None else rep.slope
        bound = 1 + 2 * s - slack
        out.append(Check(f"flatness/s={s}/seed={seed} slope", v, f">= {bound:g}", v >= bound))
    return out


def exponent_suite(cfg: ExperimentConfig) -> list[Check]:
    """Flatness exponent against ``1 + alpha``, and the paired sweep at drift exponent ``1 - 2s``."""
    r1 = theorem1_experiment(cfg)
    r2 = theorem2_experiment(cfg)
    return [
        Check(f"exponent/theorem1 s={cfg.s} alpha={cfg.alpha}", r1.measured,
              f"within {cfg.exponent_tol} of {r1.claimed:g}", r1.passed),
        Check("exponent/theorem2 at smallest delta", r2.measured, f">= {cfg.theorem2_floor}", r2.passed),
        Check("exponent/theorem2 below theorem1", r2.measured, f"< {r1.measured:.4g}", r2.measured < r1.measured),
        Check("exponent/theorem2 non-decreasing as delta shrinks", float(r2.extra["monotone"]), "== 1",
              bool(r2.extra["monotone"])),
    ]

"""Command-line runner: ``fracdrift <subcommand> [flags]``.

Exit status is 0 when every check of the run passes, 1 when a check
fails and 2 on a usage or configuration error. Outputs land in ``--out``;
``manifest.json`` is written last, through a rename, so a manifest on
disk always describes a finished run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .barriers import (
    caloric_residuals,
    check_bfun_properties,
    compute_bfun,
    make_barrier,
    sample_region,
    verify_supersolution,
)
from .config import ResolvedConfig, load_config
from .core import HolderSynthConfig, ScalarField, TorusGrid
from .errors import FracdriftError, InvalidArgument
from .evolution import DriftField, solve_ivp
from .extension import default_ygrid, expansion_fit, solve_extension
from .io import atomic_write, write_field
from .regularity import (
    ExperimentConfig,
    driftless_flatness,
    holder_estimate_experiment,
    smooth_data,
    theorem1_experiment,
    theorem2_experiment,
)
from .spectral import frac_laplacian
from .suites import Check, dtn_suite, expansion_suite, heat_suite, special_solution_suite

SUBCOMMANDS = ("extend", "evolve", "barriers", "flatness", "exponent", "validate")


class Run:
    """Output directory bookkeeping for one invocation."""

    def __init__(self, out: Path, plot: bool):
        self.out = out
        self.plot = plot
        self.outputs: list[str] = []
        self.checks: list[Check] = []
        out.mkdir(parents=True, exist_ok=True)
        stale = out / "manifest.json"
        if stale.exists():
            stale.unlink()

    def text(self, name: str, data: str) -> None:
        atomic_write(self.out / name, data)
        self.outputs.append(name)

    def json(self, name: str, obj) -> None:
        self.text(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def field(self, name: str, fld) -> None:
        write_field(self.out / name, fld)
        self.outputs.append(name)

    def csv(self, name: str, header: list[str], rows, logscale: bool = False) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        self.text(name, buf.getvalue())
        if self.plot:
            self.text(name[:-4] + ".gp", _gnuplot(name, header, logscale))

    def check(self, *checks: Check) -> None:
        self.checks.extend(checks)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _gnuplot(csv_name: str, header: list[str], logscale: bool) -> str:
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{header[0]}'",
    ]
    if logscale:
        lines.append("set logscale xy")
    series = ", ".join(f"'{csv_name}' using 1:{i} with linespoints" for i in range(2, len(header) + 1))
    lines.append(f"plot {series}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_extend(cfg: ResolvedConfig, run: Run) -> None:
    """Extend a seeded smooth trace; compare the calibrated DtN with the spectral operator."""
    p = cfg.params
    N = min(cfg["N"], 128) if cfg["quick"] else cfg["N"]
    M = min(cfg["M"], 64) if cfg["quick"] else cfg["M"]
    grid = TorusGrid(p.n, N, cfg["L"])
    f = smooth_data(grid, cfg["u0_modes"], cfg["seed"])
    sol = solve_extension(f, p, default_ygrid(p, grid, M, cfg["Y"]))
    run.field("trace.field", f)
    run.field("extension.field", sol.field)
    run.text("extension.sidecar.json", sol.sidecar_json())
    est = sol.fractional_laplacian.values
    ref = frac_laplacian(f, p).values
    if p.n == 1:
        run.csv("dtn.csv", ["x", "dtn", "spectral"], zip(grid.x, est, ref))
    rel = float(np.abs(est - ref).max() / max(np.abs(ref).max(), 1e-300))
    run.check(Check("extend/calibrated DtN vs spectral", rel, f"<= {cfg['dtn_rel']}", rel <= cfg["dtn_rel"]))
    fit = expansion_fit(sol)
    run.csv("expansion.csv", ["y", "residual"], zip(fit.band_edges, fit.residuals), logscale=True)
    slope = float("nan") if fit.slope is None else fit.slope
    run.check(Check("extend/expansion slope", slope, "in [1.7, 2.3]", 1.7 <= slope <= 2.3))


def cmd_evolve(cfg: ResolvedConfig, run: Run) -> None:
    """Evolve seeded smooth data under a synthesized drift; write the time series."""
    e = cfg.experiment()
    if cfg["quick"]:
        e = ExperimentConfig(**{**e.to_dict(), "deltas": e.deltas, "N": min(e.N, 256)})
    p = cfg.params
    grid = e.grid
    beta = min(1.0, 1 - 2 * p.s + p.alpha)
    synth = [HolderSynthConfig(beta, e.lam, e.levels, e.seed + 1000 * (i + 1)) for i in range(p.n)]
    b = DriftField.synthesize(grid, synth)
    b = b.scaled(e.delta / float(np.max(b.sup()))) if e.delta > 0 else b.scaled(0.0)
    u0 = smooth_data(grid, e.u0_modes, e.seed, e.u0_slope)
    f = None if e.forcing == 0 else ScalarField(grid, e.forcing * smooth_data(grid, 3, e.seed + 77).values)
    state, series = solve_ivp(u0, b, f, e.T, p, e.eps, t0=-e.T)
    run.text("series.csv", series.to_csv())
    if run.plot:
        run.text("series.gp", _gnuplot("series.csv", ["t", "sup", "mean", "energy"], False))
    run.field("u_initial.field", u0)
    run.field("u_final.field", state.u)
    run.json("drift.json", b.descriptor)
    fsup = 0.0 if f is None else float(np.abs(f.values).max())
    bound = float(np.abs(u0.values).max()) + e.T * fsup
    worst = float(series.sup.max())
    run.check(Check("evolve/maximum principle", worst, f"<= {bound:.6g} + 1e-12", worst <= bound + 1e-12))


def cmd_barriers(cfg: ResolvedConfig, run: Run) -> None:
    """Certify a barrier (--tag) and write its certificate."""
    p = cfg.params
    tag = cfg["tag"]
    h = cfg["h"]
    if tag in ("sphere_boundary", "flat_boundary"):
        alpha = cfg["alpha"]
        if alpha is None:
            alpha = 0.5 if tag == "sphere_boundary" else (1 - p.a) / 2
        spec = make_barrier(tag, p, alpha, h=h)
        reps = [verify_supersolution(spec, hh) for hh in (h, h / 2)]
        cert = spec.certificate(reps[-1])
        cert["verifications"] = [
            {"h": r.h, "max_operator_value": r.max_value, "count": r.count, "tolerance": r.tolerance, "pass": r.passed}
            for r in reps
        ]
        run.json(f"{tag}.cert.json", cert)
        pts = sample_region(spec, h)
        op = spec.operator(pts)
        run.csv(f"{tag}_operator.csv", [f"x{i + 1}" for i in range(p.n)] + ["y", "operator"],
                (list(pt) + [v] for pt, v in zip(pts, op)))
        for r in reps:
            run.check(Check(f"barriers/{tag} C={spec.C:.6g} at h={r.h:g}", r.max_value,
                            f"<= {r.tolerance:.3g}", r.passed))
    elif tag == "caloric_U":
        spec = make_barrier(tag, p, variant=cfg["variant"])
        Ms = (16, 32) if cfg["quick"] else (32, 64)
        res = [caloric_residuals(spec, M) for M in Ms]
        run.csv("caloric_U_residuals.csv", ["M", "boundary", "interior"], ((M, r[0], r[1]) for M, r in zip(Ms, res)))
        order = math.log2(res[0][1] / res[1][1]) if res[1][1] > 0 else math.inf
        run.json("caloric_U.cert.json", {**spec.certificate(), "M": list(Ms),
                                         "boundary_residual": [r[0] for r in res],
                                         "interior_residual": [r[1] for r in res], "interior_order": order})
        run.check(Check("barriers/caloric_U interior order", order, ">= 1", order >= 1))
        if spec.variant == "corrected":
            run.check(Check("barriers/caloric_U boundary residual", res[1][0], "<= 1e-8", res[1][0] <= 1e-8))
    elif tag == "bfun":
        N, M = (64, 32) if cfg["quick"] else (128, 64)
        B = compute_bfun(p, N=N, M=M)
        rep = check_bfun_properties(B)
        run.field("bfun.field", B.field)
        run.json("bfun.cert.json", {"tag": tag, "params": {"s": p.s, "a": p.a, "n": p.n}, **rep.to_dict()})
        xg = B.field.xgrid.x
        run.csv("bfun_trace.csv", ["x", "B"], zip(xg, B.field.values[0]))
        run.check(
            Check("barriers/bfun boundary sup", rep.boundary_sup, "<= 1e-3", rep.boundary_sup <= 1e-3),
            Check("barriers/bfun Neumann error", rep.neumann_max_error, "<= 0.02", rep.neumann_max_error <= 0.02),
            Check("barriers/bfun decay exponent", rep.decay_exponent, f"within 0.1 of {p.s}",
                  abs(rep.decay_exponent - p.s) <= 0.1),
            Check("barriers/bfun argmax at origin", float(rep.argmax_is_origin), "== 1", bool(rep.argmax_is_origin)),
        )
    else:
        raise InvalidArgument(f"unknown barrier tag {tag!r}")


def _flatness_job(args):
    e = ExperimentConfig(**args)
    return driftless_flatness(e)


def cmd_flatness(cfg: ResolvedConfig, run: Run) -> None:
    """Flatness decay of driftless solutions over dyadic scales."""
    e = cfg.experiment()
    nseeds = 1 if cfg["quick"] else cfg["seeds"]
    N = min(e.N, 256) if cfg["quick"] else e.N
    jobs = []
    for k in range(nseeds):
        d = {**e.to_dict(), "deltas": e.deltas, "seed": e.seed + k, "N": N}
        jobs.append(d)
    if cfg["jobs"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as ex:
            reps = list(ex.map(_flatness_job, jobs))
    else:
        reps = [_flatness_job(j) for j in jobs]
    bound = 1 + 2 * e.s - e.slope_slack
    summary = []
    for j, rep in zip(jobs, reps):
        seed = j["seed"]
        run.csv(f"flatness_seed{seed}.csv", ["scale", "deviation"], zip(rep.scales, rep.deviations), logscale=True)
        v = float("nan") if rep.slope is None else rep.slope
        summary.append({"seed": seed, **rep.to_dict()})
        run.check(Check(f"flatness/seed={seed} slope", v, f">= {bound:g}", v >= bound))
    run.json("flatness.json", summary)


def cmd_exponent(cfg: ResolvedConfig, run: Run) -> None:
    """Exponent experiment for --theorem 1, 2 or holder."""
    e = cfg.experiment()
    if cfg["quick"]:
        e = ExperimentConfig(**{**e.to_dict(), "deltas": e.deltas, "N": min(e.N, 256)})
    which = cfg["theorem"]
    if which == "1":
        rep = theorem1_experiment(e)
        run.check(Check("exponent/theorem1", rep.measured, f"within {e.exponent_tol} of {rep.claimed:g}", rep.passed))
    elif which == "2":
        rep = theorem2_experiment(e)
        run.check(Check("exponent/theorem2", rep.measured, f">= {e.theorem2_floor}", rep.passed))
    else:
        rep = holder_estimate_experiment(e)
        run.check(Check("exponent/holder", rep.measured, f"> {e.holder_floor}", rep.passed))
    run.text("exponent.json", rep.to_json())
    fl = rep.extra.get("flatness")
    if fl is None and "runs" in rep.extra:
        fl = rep.extra["runs"][repr(float(min(e.deltas)))]["flatness"]
    if fl is not None:
        run.csv("flatness.csv", ["scale", "deviation"], zip(fl["scales"], fl["deviations"]), logscale=True)


def cmd_validate(cfg: ResolvedConfig, run: Run) -> None:
    """Special-solution and semigroup suites (more without --quick)."""
    p = cfg.params
    checks = special_solution_suite(p) + heat_suite(p.s)[:1]
    if not cfg["quick"]:
        checks += dtn_suite(p) + expansion_suite(p, seed=cfg["seed"]) + heat_suite(p.s)[1:]
    run.check(*checks)
    run.csv("validate.csv", ["check", "value", "bound", "passed"],
            ((c.name, c.value, c.bound, c.passed) for c in checks))


COMMANDS = {
    "extend": cmd_extend,
    "evolve": cmd_evolve,
    "barriers": cmd_barriers,
    "flatness": cmd_flatness,
    "exponent": cmd_exponent,
    "validate": cmd_validate,
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps the subparser from overwriting flags given before the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="configuration file ([section] key = value)")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--plot", action="store_true", help="also write gnuplot scripts for every CSV")
    common.add_argument("--jobs", type=int, help="parallel experiment instances")
    common.add_argument("--quick", action="store_true", help="reduced resolution")
    common.add_argument("--seed", type=int)
    common.add_argument("--theorem", choices=["1", "2", "holder"])
    common.add_argument("--tag", choices=["sphere_boundary", "flat_boundary", "bfun", "caloric_U"])
    common.add_argument("--alpha", type=float)
    common.add_argument("--s", type=float)
    common.add_argument("--N", type=int)
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")
    parser = argparse.ArgumentParser(prog="fracdrift", description="Drift-fractional-diffusion lab", parents=[common])
    parser.add_argument("--version", action="version", version=f"fracdrift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=(COMMANDS[name].__doc__ or name).strip().split("\n")[0])
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    out = {}
    for key in ("jobs", "quick", "seed", "theorem", "tag", "alpha", "s", "N"):
        v = getattr(ns, key, None)
        if v is not None:
            out[key] = v
    for item in getattr(ns, "set", []):
        if "=" not in item:
            raise InvalidArgument(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)  # exits 2 with usage on error
    try:
        cfg = load_config(getattr(ns, "config", None), _overrides(ns))
    except (FracdriftError, OSError) as exc:
        print(f"fracdrift: error: {exc}", file=sys.stderr)
        return 2
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    out = Path(getattr(ns, "out", "out"))
    job = Run(out, getattr(ns, "plot", False))
    try:
        COMMANDS[ns.command](cfg, job)
    except InvalidArgument as exc:
        print(f"fracdrift: error: {exc}", file=sys.stderr)
        return 2
    passed = all(c.passed for c in job.checks)
    for c in job.checks:
        print(c.line())
    manifest = {
        "subcommand": ns.command,
        "config": cfg.as_table(),
        "seed": cfg["seed"],
        "version": __version__,
        "started": started,
        "wall_clock_seconds": round(time.perf_counter() - t0, 3),
        "outputs": sorted(job.outputs),
        "checks": [c.to_dict() for c in job.checks],
        "passed": passed,
    }
    missing = [name for name in job.outputs if not (out / name).exists()]
    if missing:
        print(f"fracdrift: error: outputs missing: {missing}", file=sys.stderr)
        return 1
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return 0 if passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

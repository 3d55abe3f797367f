"""Command-line driver.

    spiralspec {geometry,bound,horn,eigs,compare,multiarm} --config run.json --out outdir

Every subcommand writes ``report.json`` and ``*.dat`` tables into ``--out``.
On error the completed parts are still written, together with
``failure_manifest.json``.  Exit code: 0 when every gate passes, 1 when a
gate fails, 2 on a configuration or numerical error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .bound import (
    BoundParams,
    Mode,
    asymptotic_bound,
    evaluate,
    lower_bound_example,
    multi_arm_bound,
    sup_W,
)
from .config import RunConfig, finite_or_none
from .errors import ConfigError, SpiralError
from .fd import SpiralDomain, assemble, build_mask, extrapolate, inertia_count, moment, moment_with_budget, solve_region
from .geometry import GeometryCache, classify
from .horn import HornProfile, count_lower_estimate, weyl_horn_count
from .profiles import TWO_PI, Family, SpiralProfile
from .report import emit_plot_data, table, write_json

log = logging.getLogger("spiralspec")

COMMANDS = ("geometry", "bound", "horn", "eigs", "compare", "multiarm")

# source file -> module tag used in failure diagnostics
MODULE_TAGS = {
    "profiles": "spiral_geometry",
    "geometry": "spiral_geometry",
    "bound": "effective_bound",
    "horn": "horn_counting",
    "fd": "fd_eigensolver",
    "config": "cli_report",
    "cli": "cli_report",
    "report": "cli_report",
}


@dataclass
class ComparisonRow:
    Lambda: float
    sigma: float
    numerical_moment: float
    error_budget: float
    bound_total: float
    bound_pieces: dict
    ratio: float
    asymptotic_bound: float | None
    lower_bound_example: float | None

    @property
    def passes(self) -> bool:
        # ratio >= 1 against the moment plus its error budget
        return self.numerical_moment <= 0 or self.ratio >= 1.0

    def to_dict(self):
        return asdict(self)


class Run:
    """State shared by the pipelines of one invocation."""

    def __init__(self, cfg: RunConfig, threads: int = 1, seed: int = 0):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        self.seed = int(seed)
        self.report = {
            "version": __version__,
            "config": cfg.to_dict(),
            "seed": self.seed,
            "tables": {},
            "gates": {},
        }
        self._caches = {}

    def map(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))

    # -- shared pieces ------------------------------------------------------

    @property
    def profile(self) -> SpiralProfile:
        return SpiralProfile.from_dict(self.cfg["profile"])

    @property
    def gaps(self):
        off = self.cfg["arms"]["offsets"]
        return [float(b - a) for a, b in zip(off, off[1:] + [TWO_PI])]

    def cache(self, gap=TWO_PI) -> GeometryCache:
        key = round(gap, 14)
        if key not in self._caches:
            g = self.cfg["geometry"]
            prof = self.profile
            check = g["check_assumption"]
            if check is None:
                check = prof.family is not Family.ARCHIMEDEAN
            self._caches[key] = GeometryCache.build(
                prof, theta_max=g["theta_max"], margin=g["margin"], grid_tol=g["grid_tol"],
                gap=gap, check_assumption=check,
            )
        return self._caches[key]

    def params(self, sigma, lam):
        b = self.cfg["bound"]
        mode = b["mode"]
        if mode is None:
            mode = Mode.STANDARD if sigma >= 1.5 else Mode.SMALL_SIGMA
        return BoundParams(sigma, lam, b["threshold_variant"], mode)

    @property
    def mc(self):
        return {"mc_samples": self.cfg["geometry"]["area_samples"], "seed": self.seed}

    def gate(self, name, ok):
        self.report["gates"][name] = bool(ok)


# ---------------------------------------------------------------------------
# pipelines


def run_geometry(run: Run):
    cfg = run.cfg["geometry"]
    entries = []
    for j, gap in enumerate(run.gaps):
        cache = run.cache(gap)
        s = cache.sample_grid()
        n = cache.nodes
        area = cache.central_area(**run.mc)
        entries.append({
            "arm": j,
            "gap": gap,
            "s0": cache.s0,
            "theta0": cache.theta0,
            "s_max": cache.s_max,
            "n_nodes": len(s),
            "central_area": area.area,
            "central_area_stderr": area.stderr,
            "sup_W": sup_W(cache),
            "max_dgamma": float(np.max(n["dgamma_product"])),
        })
        suffix = "" if len(run.gaps) == 1 else f"_arm{j}"
        run.report["tables"]["geometry" + suffix] = table(
            ["s", "theta", "gamma", "d", "d_gamma"],
            zip(s, n["theta"], n["gamma"], n["d"], n["dgamma_product"]),
        )
        run.report["tables"]["dW" + suffix] = table(["s", "d", "W"], zip(s, n["d"], n["W"]))
        run.gate(f"geometry_arm{j}_area_stderr", area.stderr <= 0.01 * max(area.area, 1e-300) or area.area == 0)
    prof = run.profile
    run.report["geometry"] = {
        "profile": prof.to_dict() if prof.family is not Family.TABULATED else {"family": "tabulated"},
        "classification": classify(prof, theta_max=cfg["classify_theta_max"]).value,
        "arms": entries,
    }


def _bound_rows(run: Run, cache):
    b = run.cfg["bound"]
    jobs = [(sg, lam) for sg in b["sigma"] for lam in b["Lambda"]]
    sup_W(cache)  # fill the memo before fanning out
    cache.central_area(**run.mc)
    return run.map(lambda job: evaluate(cache, run.params(*job), **run.mc), jobs)


def _bound_table(reports):
    return table(
        ["Lambda", "sigma", "integral_term", "c1_term", "c2_term", "total"],
        [[r.Lambda, r.sigma, r.integral_term, r.c1_term, r.c2_term, r.total] for r in reports],
    )


def run_bound(run: Run):
    reports = _bound_rows(run, run.cache())
    run.report["bound"] = [r.to_dict() for r in reports]
    run.report["tables"]["bound"] = _bound_table(reports)
    run.gate("bound_terms_nonnegative", all(
        min(r.integral_term, r.c1_term, r.c2_term) >= 0 and np.isfinite(r.total) for r in reports
    ))


def run_multiarm(run: Run):
    off = run.cfg["arms"]["offsets"]
    caches = [run.cache(g) for g in run.gaps]
    b = run.cfg["bound"]
    rows, totals = [], []
    for sg in b["sigma"]:
        for lam in b["Lambda"]:
            p = run.params(sg, lam)
            rep = multi_arm_bound(caches, p, asymptotic=sg >= 1.5, **run.mc)
            rows.append(rep)
            totals.append([lam, sg, rep.total, np.nan if rep.asymptotic is None else rep.asymptotic])
    run.report["multiarm"] = {"offsets": off, "gaps": run.gaps, "results": [r.to_dict() for r in rows]}
    for j in range(len(caches)):
        run.report["tables"][f"bound_arm{j}"] = _bound_table([r.arms[j] for r in rows])
    run.report["tables"]["bound_total"] = table(["Lambda", "sigma", "total", "asymptotic"], totals)
    run.gate("multiarm_total_is_sum", all(
        abs(r.total - sum(a.total for a in r.arms)) <= 1e-12 * r.total for r in rows
    ))


def run_horn(run: Run):
    h = run.cfg["horn"]
    horn = HornProfile.from_dict({k: h[k] for k in ("kind", "scale", "rate", "length")})
    lams = h["lambda"]
    weyl = run.map(lambda lam: weyl_horn_count(horn, lam), lams)
    lower = [count_lower_estimate(horn, lam) for lam in lams]
    cols, rows = ["lambda", "weyl_count", "lower_estimate"], [list(t) for t in zip(lams, weyl, lower)]
    fd_counts = None
    if h["h"] is not None:
        A = assemble(build_mask(horn, h["h"]))
        fd_counts = [inertia_count(A, lam) for lam in lams]
        cols.append("fd_count")
        for r, c in zip(rows, fd_counts):
            r.append(c)
    run.report["horn"] = {
        "profile": horn.to_dict(),
        "lambda": lams,
        "weyl_count": weyl,
        "lower_estimate": lower,
        "fd_count": fd_counts,
    }
    run.report["tables"]["horn"] = table(cols, rows)
    run.gate("horn_lower_below_weyl", all(lo <= w for lo, w in zip(lower, weyl)))


def _spectra(run: Run):
    e = run.cfg["eigensolver"]
    cutoff = e["cutoff_factor"] * max(run.cfg["bound"]["Lambda"])
    region = SpiralDomain(run.profile, tuple(run.cfg["arms"]["offsets"]))
    results = run.map(lambda h: solve_region(region, h, cutoff, R_max=e["R_max"], seed=run.seed), e["h"])
    ext = None
    if e["extrapolate"] and len(results) >= 2:
        a, b = results[-2], results[-1]
        ext = extrapolate(a, b, n=min(len(a.eigenvalues), len(b.eigenvalues)))
        b.extrapolated = ext
    return results, ext


def _moments(run: Run, results, ext):
    out = []
    for sg in run.cfg["bound"]["sigma"]:
        for lam in run.cfg["bound"]["Lambda"]:
            if ext is not None:
                m, budget = moment_with_budget(ext, sg, lam)
            else:
                m, budget = moment(results[-1], sg, lam), 0.0
            out.append((lam, sg, m, budget))
    return out


def run_eigs(run: Run):
    results, ext = _spectra(run)
    run.report["eigs"] = {"results": [r.to_dict() for r in results]}
    n = min(len(r.eigenvalues) for r in results)
    cols = ["index"] + [f"lambda_h{k}" for k in range(len(results))]
    rows = [[i] + [r.eigenvalues[i] for r in results] for i in range(n)]
    if ext is not None:
        cols += ["extrapolated", "error"]
        for i, row in enumerate(rows):
            row += [ext.values[i], ext.errors[i]]
    run.report["tables"]["eigenvalues"] = table(cols, rows)
    mom = _moments(run, results, ext)
    run.report["tables"]["moment"] = table(["Lambda", "sigma", "moment", "error_budget"], mom)
    run.gate("eigs_inertia_consistent", all(len(r.eigenvalues) == r.inertia_count for r in results))
    return results, ext, mom


def run_compare(run: Run):
    results, ext, mom = run_eigs(run)
    cache = run.cache(run.gaps[0]) if len(run.gaps) == 1 else None
    if cache is None:
        raise ConfigError("compare runs on single-arm configs; use multiarm for several arms")
    reports = _bound_rows(run, cache)
    w = float(np.max(cache.nodes["dgamma_product"]))
    rows = []
    for (lam, sg, m, budget), rep in zip(mom, reports):
        asym = asymptotic_bound(cache, sg, lam, **run.mc) if sg >= 1.5 else None
        low = lower_bound_example(sg, lam, w) if lam > 1 and w < 1 else None
        denom = m + budget
        rows.append(ComparisonRow(
            Lambda=lam, sigma=sg, numerical_moment=m, error_budget=budget, bound_total=rep.total,
            bound_pieces={"integral_term": rep.integral_term, "c1_term": rep.c1_term, "c2_term": rep.c2_term},
            ratio=rep.total / denom if denom > 0 else float("inf"),
            asymptotic_bound=asym, lower_bound_example=low,
        ))
    run.report["bound"] = [r.to_dict() for r in reports]
    run.report["comparison"] = [r.to_dict() for r in rows]
    run.report["tables"]["bound"] = _bound_table(reports)
    run.report["tables"]["ratio"] = table(
        ["Lambda", "sigma", "ratio"], [[r.Lambda, r.sigma, finite_or_none(r.ratio)] for r in rows]
    )
    run.report["tables"]["compare"] = table(
        ["Lambda", "sigma", "moment", "error_budget", "bound_total", "ratio", "asymptotic", "lower_example"],
        [[r.Lambda, r.sigma, r.numerical_moment, r.error_budget, r.bound_total, finite_or_none(r.ratio),
          r.asymptotic_bound, r.lower_bound_example] for r in rows],
    )
    run.gate("compare_bound_dominates", all(r.passes for r in rows))


PIPELINES = {
    "geometry": (run_geometry,),
    "bound": (run_geometry, run_bound),
    "horn": (run_horn,),
    "eigs": (run_eigs,),
    "compare": (run_geometry, run_compare),
    "multiarm": (run_geometry, run_multiarm),
}


# ---------------------------------------------------------------------------
# entry point


def _module_tag(exc):
    tag = "cli_report"
    for frame in traceback.extract_tb(exc.__traceback__):
        path = Path(frame.filename)
        if path.parent.name == "spiralspec" and path.stem in MODULE_TAGS:
            tag = MODULE_TAGS[path.stem]
    return tag


def _fail(out: Path, command, exc, written, partial=None):
    manifest = {
        "command": command,
        "module": _module_tag(exc) if not isinstance(exc, ConfigError) else "cli_report",
        "error": type(exc).__name__,
        "message": str(exc),
        "outputs": sorted(p.name for p in written),
    }
    if partial is not None:
        manifest["completed"] = partial
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "failure_manifest.json", manifest)
    print(f"error [{manifest['module']}] {manifest['error']}: {exc}", file=sys.stderr)
    return 2


def execute(command: str, cfg: RunConfig, out, threads=1, seed=0) -> tuple[int, dict]:
    """Run one subcommand; returns ``(exit_code, report)``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(cfg, threads, seed)
    run.report["command"] = command
    done = []
    try:
        for step in PIPELINES[command]:
            step(run)
            done.append(step.__name__)
    except (SpiralError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        run.report["ok"] = False
        written = emit_plot_data(run.report, out)
        written.append(write_json(out / "report.json", run.report))
        return _fail(out, command, exc, written, done), run.report
    run.report["ok"] = all(run.report["gates"].values())
    emit_plot_data(run.report, out)
    write_json(out / "report.json", run.report)
    return (0 if run.report["ok"] else 1), run.report


def build_parser():
    p = argparse.ArgumentParser(prog="spiralspec", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON run configuration (defaults used if omitted)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
    except ConfigError as exc:
        return _fail(args.out, args.command, exc, [])
    code, report = execute(args.command, cfg, args.out, args.threads, args.seed)
    for name, ok in sorted(report["gates"].items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Benchmark sweep over graph-Laplacian problems, with JSON/CSV output and a CLI.

Example::

    rafeast-bench --sizes 500 1000 --seeds 3 --method standard:8:50 \\
        --method ra:2:2:warm --out results --emit-plots
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import fit_contraction
from .contour import SpectralInterval
from .errors import ConfigError, InsufficientTrace, LengthMismatch
from .feast import FeastConfig, feast_standard, ra_feast
from .oracle import ORACLE_MAX_N, ground_truth_in_interval, max_error_metric
from .problems import laplacian, m0_policy, random_geometric_graph
from .shifted import SolverConfig
from .warmstart import WarmstartConfig

__all__ = [
    "MethodSpec",
    "BenchmarkConfig",
    "BenchmarkReport",
    "parse_method",
    "run_benchmark",
    "emit_plot_data",
    "main",
]


@dataclass(frozen=True)
class MethodSpec:
    name: str
    n_c: int
    max_iter: int
    warm: bool = False
    solver_mode: str = "direct"
    solver_tolerance: float = 1e-12
    residual_tolerance: float = 1e-10


def parse_method(text: str) -> MethodSpec:
    """Parse ``NAME:NC:MAXITER[:warm]``."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "warm"):
        raise ConfigError(f"method must look like NAME:NC:MAXITER[:warm], got {text!r}")
    try:
        n_c, max_iter = int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad integers in method {text!r}") from exc
    return MethodSpec(parts[0], n_c, max_iter, warm=len(parts) == 4)


DEFAULT_METHODS = (
    MethodSpec("standard", 8, 50),
    MethodSpec("ra_nc2", 2, 2, warm=True),
    MethodSpec("ra_nc4", 4, 2, warm=True),
)


@dataclass
class BenchmarkConfig:
    sizes: list
    seeds: int = 3
    interval: SpectralInterval = field(default_factory=lambda: SpectralInterval(0.001, 5.0))
    m0: Optional[int] = None  # None: min(40, count + 5), needs the oracle
    methods: list = field(default_factory=lambda: list(DEFAULT_METHODS))
    baseline: Optional[str] = None  # defaults to the first non-warm method
    out_dir: Optional[Path] = None
    oracle: bool = True
    parallel_quadrature: bool = False
    warm_epsilon: float = 0.1

    def validate(self) -> None:
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if not self.sizes or any(n < 2 for n in self.sizes):
            raise ConfigError("sizes must be a non-empty list of n >= 2")
        if self.oracle and max(self.sizes) > ORACLE_MAX_N:
            raise ConfigError(f"oracle is limited to n <= {ORACLE_MAX_N}, got {max(self.sizes)}")
        if self.m0 is None and not self.oracle:
            raise ConfigError("m0 must be given when the oracle is off")
        if not self.methods:
            raise ConfigError("at least one method is required")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError("method names must be unique")
        if self.baseline is not None and self.baseline not in names:
            raise ConfigError(f"baseline {self.baseline!r} is not among the methods")

    @property
    def baseline_name(self) -> str:
        if self.baseline is not None:
            return self.baseline
        for m in self.methods:
            if not m.warm:
                return m.name
        return self.methods[0].name


@dataclass
class BenchmarkReport:
    config: dict
    runs: list  # one dict per (method, n, seed)
    summary: list  # one dict per (method, n)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def _fit(result):
    errs = [result.initial_subspace_error] + [t.subspace_error for t in result.trace]
    if any(e is None for e in errs):
        return None
    try:
        f = fit_contraction(errs)
    except InsufficientTrace:
        return None
    return {"rho": f.rho, "epsilon": f.epsilon, "floor": f.floor, "r_squared": f.r_squared}


def _run_one(A, method: MethodSpec, cfg: BenchmarkConfig, m0, seed, truth, vecs):
    solver = SolverConfig(mode=method.solver_mode, tolerance=method.solver_tolerance)
    fcfg = FeastConfig(
        interval=cfg.interval,
        m0=m0,
        n_c=method.n_c,
        max_iter=method.max_iter,
        solver=solver,
        residual_tolerance=method.residual_tolerance,
        seed=seed,
        parallel_quadrature=cfg.parallel_quadrature,
    )
    if method.warm:
        wcfg = WarmstartConfig(
            m0=m0, q=None, seed=seed, epsilon=cfg.warm_epsilon, transform="chebyshev"
        )
        res = ra_feast(A, fcfg, wcfg, reference_basis=vecs)
    else:
        res = feast_standard(A, fcfg, reference_basis=vecs)
    rec = {
        "eigenvalues": res.eigenvalues.tolist(),
        "n_found": int(res.eigenvalues.size),
        "iterations": res.iterations_used,
        "converged": bool(res.converged),
        "max_residual": float(res.residual_norms.max()) if res.residual_norms.size else None,
        "q": res.warmstart_info.q if res.warmstart_info else None,
        "time_phase1": res.time_phase1,
        "time_phase2": res.time_phase2,
        "time_factor": res.time_factor,
        "time_total": res.time_total,
        "fit": _fit(res),
    }
    if truth is not None:
        try:
            rec["max_error"] = max_error_metric(res.eigenvalues, truth)
        except LengthMismatch as exc:
            rec["max_error"] = None
            rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkReport:
    """Run every method on every (n, seed) problem; failures are recorded, not raised."""
    cfg.validate()
    runs = []
    for n in cfg.sizes:
        for seed in range(cfg.seeds):
            A = laplacian(random_geometric_graph(n, seed))
            truth = vecs = None
            count = None
            if cfg.oracle:
                truth, vecs, count = ground_truth_in_interval(A, cfg.interval)
            m0 = cfg.m0 if cfg.m0 is not None else m0_policy(count)
            if vecs is not None and vecs.shape[1] > m0:
                vecs = None  # subspace cannot hold the window; skip error traces
            for method in cfg.methods:
                base = {"method": method.name, "n": n, "seed": seed, "m0": m0, "n_true": count}
                try:
                    base.update(_run_one(A, method, cfg, m0, seed, truth, vecs))
                except Exception as exc:
                    base["error"] = f"{type(exc).__name__}: {exc}"
                    base["traceback"] = traceback.format_exc(limit=3)
                runs.append(base)
    _attach_speedups(runs, cfg.baseline_name)
    return BenchmarkReport(config=_config_dict(cfg), runs=runs, summary=_summarize(runs, cfg))


def _config_dict(cfg: BenchmarkConfig) -> dict:
    d = asdict(cfg)
    d["interval"] = [cfg.interval.lambda_min, cfg.interval.lambda_max]
    d["out_dir"] = None if cfg.out_dir is None else str(cfg.out_dir)
    d["baseline"] = cfg.baseline_name
    d["execution"] = "parallel-quadrature" if cfg.parallel_quadrature else "single-threaded"
    return d


def _attach_speedups(runs, baseline):
    base = {(r["n"], r["seed"]): r.get("time_total") for r in runs if r["method"] == baseline}
    for r in runs:
        b = base.get((r["n"], r["seed"]))
        t = r.get("time_total")
        r["speedup"] = b / t if (b and t) else None


def _stats(values):
    v = np.array([x for x in values if x is not None], dtype=np.float64)
    if v.size == 0:
        return None, None
    return float(v.mean()), float(v.std())


def _summarize(runs, cfg):
    out = []
    for m in cfg.methods:
        for n in cfg.sizes:
            rs = [r for r in runs if r["method"] == m.name and r["n"] == n]
            row = {"method": m.name, "n": n, "runs": len(rs), "failures": sum("error" in r for r in rs)}
            for key in ("time_total", "time_phase1", "time_phase2", "speedup", "iterations"):
                row[key + "_mean"], row[key + "_std"] = _stats(r.get(key) for r in rs)
            errs = [r.get("max_error") for r in rs if r.get("max_error") is not None]
            row["max_error_mean"] = float(np.mean(errs)) if errs else None
            row["max_error_max"] = float(np.max(errs)) if errs else None
            out.append(row)
    return out


def write_report(report: BenchmarkReport, out_dir) -> None:
    """report.json plus one eigenvalue list per run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    for r in report.runs:
        if "eigenvalues" in r:
            path = out / f"run_{r['method']}_{r['n']}_{r['seed']}.txt"
            path.write_text("".join(f"{x:.17g}\n" for x in r["eigenvalues"]))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return "" if x is None else repr(float(x))


def emit_plot_data(report: BenchmarkReport, out_dir) -> list:
    """Write panel_a.csv .. panel_d.csv; returns their paths.

    a: speedup vs n; b: total time vs n; c: phase split at the largest n;
    d: eigenvalue error vs n.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    S = report.summary
    paths = [out / f"panel_{c}.csv" for c in "abcd"]
    _write_csv(paths[0], ["method", "n", "speedup_mean", "speedup_std"],
               [[s["method"], s["n"], _fmt(s["speedup_mean"]), _fmt(s["speedup_std"])] for s in S])
    _write_csv(paths[1], ["method", "n", "time_total_mean", "time_total_std"],
               [[s["method"], s["n"], _fmt(s["time_total_mean"]), _fmt(s["time_total_std"])] for s in S])
    nmax = max(s["n"] for s in S)
    _write_csv(paths[2], ["method", "n", "phase1_mean", "phase2_mean", "total_mean"],
               [[s["method"], s["n"], _fmt(s["time_phase1_mean"]), _fmt(s["time_phase2_mean"]),
                 _fmt(s["time_total_mean"])] for s in S if s["n"] == nmax])
    _write_csv(paths[3], ["method", "n", "max_error_mean", "max_error_max"],
               [[s["method"], s["n"], _fmt(s["max_error_mean"]), _fmt(s["max_error_max"])] for s in S])
    return paths


def _print_summary(report: BenchmarkReport, stream=None):
    stream = sys.stdout if stream is None else stream
    hdr = f"{'method':<12}{'n':>7}{'time[s]':>10}{'phase1':>9}{'speedup':>9}{'max_err':>10}{'fail':>6}"
    print(hdr, file=stream)
    for s in report.summary:
        def f(x, spec):
            return format(x, spec) if x is not None else "-"
        print(
            f"{s['method']:<12}{s['n']:>7}{f(s['time_total_mean'], '10.3f')}"
            f"{f(s['time_phase1_mean'], '9.3f')}{f(s['speedup_mean'], '9.2f')}"
            f"{f(s['max_error_max'], '10.1e')}{s['failures']:>6}",
            file=stream,
        )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rafeast-bench", description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000])
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--interval", type=float, nargs=2, metavar=("MIN", "MAX"), default=[0.001, 5.0])
    p.add_argument("--m0", type=int, default=None)
    p.add_argument("--method", action="append", default=None, metavar="NAME:NC:MAXITER[:warm]")
    p.add_argument("--oracle", choices=["on", "off"], default="on")
    p.add_argument("--out", type=Path, default=Path("bench_out"))
    p.add_argument("--parallel-quadrature", choices=["on", "off"], default="off")
    p.add_argument("--emit-plots", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        methods = [parse_method(m) for m in args.method] if args.method else list(DEFAULT_METHODS)
        cfg = BenchmarkConfig(
            sizes=args.sizes,
            seeds=args.seeds,
            interval=SpectralInterval(*args.interval),
            m0=args.m0,
            methods=methods,
            out_dir=args.out,
            oracle=args.oracle == "on",
            parallel_quadrature=args.parallel_quadrature == "on",
        )
        cfg.validate()
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    report = run_benchmark(cfg)
    write_report(report, args.out)
    if args.emit_plots:
        emit_plot_data(report, args.out)
    _print_summary(report)
    print(f"wrote {args.out} in {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())

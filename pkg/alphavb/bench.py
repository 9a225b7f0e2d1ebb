"""
Repeated-simulation benchmark runner behind the fit/bench/sweep_alpha commands.

Repeat r of a spec draws its data with seed ``seed_base + r`` and, for
AlphaSVB, its solver stream with ``seed_base + SOLVER_SEED_OFFSET + r``, so
every (alpha, repeat) cell is a pure function of the spec. Cells may run on a
process pool; results are always ordered by (alpha, repeat).
"""

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path

import numpy as np

from .cavi import run_cavi
from .exceptions import AlphaRangeError, AlphaVBError, DomainError
from .metrics import METRIC_NAMES, evaluate
from .model_core import PriorSpec, RenyiConfig
from .simgen import SimConfig, generate, predefined_config
from .svb import SvbConfig, run_svb

logger = logging.getLogger(__name__)

METHODS = ("alphavb", "alphasvb")
SOLVER_SEED_OFFSET = 10 ** 6
LONG_COLUMNS = ("method", "alpha", "config", "repeat", "l2", "fdr", "tpr", "mspe", "wall_ms", "status")
AGGREGATE_COLUMNS = ("method", "alpha", "config", "metric", "mean", "sd", "repeats", "failed")
STATUS_OK = "ok"
STATUS_NOT_CONVERGED = "not_converged"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class SolverSettings:
    """Solver overrides shared by every fit; None means the library default."""

    lam: float = 1.0
    a0: float | None = None
    b0: float | None = None
    k_samples: int = SvbConfig.k_samples
    max_iters: int = SvbConfig.max_iters
    lr_mu: float = SvbConfig.lr_mu
    lr_sigma: float = SvbConfig.lr_sigma
    lr_gamma: float = SvbConfig.lr_gamma
    grad_clip: float = SvbConfig.grad_clip
    tol_entropy: float = RenyiConfig.tol_entropy
    max_sweeps: int = RenyiConfig.max_sweeps
    epsilon_abs: float = RenyiConfig.epsilon_abs
    gamma_threshold: float = 0.5
    estimate: str = "gm"

    def prior_for(self, p: int) -> PriorSpec:
        return PriorSpec.for_dimension(p, lam=self.lam, a0=self.a0, b0=self.b0)


@dataclass(frozen=True)
class BenchSpec:
    method: str
    alpha_grid: tuple
    repeats: int = 100
    seed_base: int = 1
    config_name: str | None = None
    n: int | None = None
    p: int | None = None
    s: int | None = None
    output_path: Path | None = None
    solver: SolverSettings = field(default_factory=SolverSettings)
    record_wall_time: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"domain: method must be one of {', '.join(METHODS)}")
        if int(self.repeats) < 1:
            raise DomainError("domain: repeats must be >= 1")
        if not self.alpha_grid:
            raise DomainError("domain: alpha grid must not be empty")
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        if self.method == "alphavb" and any(a <= 1 for a in self.alpha_grid):
            raise AlphaRangeError()
        if self.config_name is None and None in (self.n, self.p, self.s):
            raise DomainError("domain: give either a named config or all of n, p, s")

    @property
    def config_label(self) -> str:
        return self.config_name or f"n{self.n}-p{self.p}-s{self.s}"

    def sim_config(self, repeat: int) -> SimConfig:
        seed = self.seed_base + repeat
        if self.config_name is not None:
            return predefined_config(self.config_name, seed)
        return SimConfig(n=self.n, p=self.p, s=self.s, seed=seed)


@dataclass
class FitOutcome:
    method: str
    alpha: float
    params: object
    converged: bool
    diverged: bool
    wall_time_ms: float
    sweeps: int | None = None
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class AggregateRow:
    method: str
    alpha: float
    config: str
    metric: str
    mean: float
    sd: float
    repeats: int
    failed: int


def fit_instance(method, view, alpha, solver: SolverSettings, solver_seed=0) -> FitOutcome:
    prior = solver.prior_for(view.p)
    started = time.perf_counter()
    if method == "alphavb":
        cfg = RenyiConfig(
            alpha=alpha, epsilon_abs=solver.epsilon_abs, tol_entropy=solver.tol_entropy, max_sweeps=solver.max_sweeps
        )
        params, state = run_cavi(view, prior, cfg)
        return FitOutcome(
            method=method,
            alpha=alpha,
            params=params,
            converged=state.converged,
            diverged=False,
            wall_time_ms=(time.perf_counter() - started) * 1000.0,
            sweeps=state.sweep_count,
            trace=list(state.trace),
        )
    if method == "alphasvb":
        cfg = SvbConfig(
            alpha=alpha,
            k_samples=solver.k_samples,
            max_iters=solver.max_iters,
            lr_mu=solver.lr_mu,
            lr_sigma=solver.lr_sigma,
            lr_gamma=solver.lr_gamma,
            grad_clip=solver.grad_clip,
            seed=solver_seed,
        )
        params, trace = run_svb(view, prior, cfg)
        return FitOutcome(
            method=method,
            alpha=alpha,
            params=params,
            # No stopping rule: a full run without divergence counts as converged.
            converged=not trace.diverged,
            diverged=trace.diverged,
            wall_time_ms=(time.perf_counter() - started) * 1000.0,
            trace=list(trace.bounds),
        )
    raise DomainError(f"domain: unknown method {method!r}")


def run_repeat(spec: BenchSpec, alpha: float, repeat: int) -> dict:
    row = {"method": spec.method, "alpha": alpha, "config": spec.config_label, "repeat": repeat}
    try:
        instance = generate(spec.sim_config(repeat))
        outcome = fit_instance(
            spec.method, instance.train, alpha, spec.solver, solver_seed=spec.seed_base + SOLVER_SEED_OFFSET + repeat
        )
        if outcome.diverged:
            raise AlphaVBError("diverged")
        bundle = evaluate(
            outcome.params, instance, threshold=spec.solver.gamma_threshold, estimate=spec.solver.estimate
        )
    except (AlphaVBError, FloatingPointError) as exc:
        logger.warning("%s alpha=%g repeat %d failed: %s", spec.method, alpha, repeat, exc)
        row.update({name: None for name in METRIC_NAMES})
        row.update(wall_ms=None, status=STATUS_FAILED)
        return row

    row.update(bundle.as_row())
    row["wall_ms"] = outcome.wall_time_ms
    row["status"] = STATUS_OK if outcome.converged else STATUS_NOT_CONVERGED
    return row


def _run_cell(task):
    spec, alpha, repeat = task
    return run_repeat(spec, alpha, repeat)


def run_bench(spec: BenchSpec, jobs: int = 1) -> list:
    tasks = [(spec, alpha, r) for alpha in spec.alpha_grid for r in range(spec.repeats)]
    logger.info(
        "Benchmark %s on %s: %d alpha value(s) x %d repeat(s), jobs=%d",
        spec.method,
        spec.config_label,
        len(spec.alpha_grid),
        spec.repeats,
        jobs,
    )
    if jobs <= 1 or len(tasks) == 1:
        return [_run_cell(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map() yields in submission order, whatever finishes first
        return list(pool.map(_run_cell, tasks))


def aggregate(rows) -> list:
    out = []

    def key(row):
        return row["method"], row["alpha"], row["config"]

    for (method, alpha, config), group in groupby(rows, key=key):
        group = list(group)
        ok = [row for row in group if row["status"] != STATUS_FAILED]
        failed = len(group) - len(ok)
        for metric in METRIC_NAMES:
            values = np.array([row[metric] for row in ok], dtype=float)
            if values.size:
                mean = float(values.mean())
                sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
            else:
                mean = sd = math.nan
            out.append(
                AggregateRow(
                    method=method,
                    alpha=alpha,
                    config=config,
                    metric=metric,
                    mean=mean,
                    sd=sd,
                    repeats=len(group),
                    failed=failed,
                )
            )
    return out


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_long_csv(rows, path, record_wall_time=True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LONG_COLUMNS)
        for row in rows:
            values = dict(row)
            if not record_wall_time:
                values["wall_ms"] = None
            writer.writerow([_cell(values[column]) for column in LONG_COLUMNS])
    return path


def write_aggregate_csv(aggregates, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_COLUMNS)
        for agg in aggregates:
            writer.writerow([_cell(getattr(agg, column)) for column in AGGREGATE_COLUMNS])
    return path


def write_gnuplot(aggregates, path) -> Path:
    """One block per method (blank-line separated); x = alpha, mean/sd per metric."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lookup = {(a.method, a.alpha, a.metric): a for a in aggregates}
    methods = list(dict.fromkeys(a.method for a in aggregates))
    header = ["alpha"] + [f"{m}{suffix}" for m in METRIC_NAMES for suffix in ("", "_sd")]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for index, method in enumerate(methods):
            if index:
                fh.write("\n\n")
            fh.write(f"# method={method}\n")
            fh.write("# " + " ".join(header) + "\n")
            for alpha in sorted({a.alpha for a in aggregates if a.method == method}):
                cells = [repr(alpha)]
                for metric in METRIC_NAMES:
                    agg = lookup[(method, alpha, metric)]
                    cells += [repr(agg.mean), repr(agg.sd)]
                fh.write(" ".join(cells) + "\n")
    return path


def output_paths(long_path) -> dict:
    long_path = Path(long_path)
    return {
        "long": long_path,
        "aggregate": long_path.with_name(f"{long_path.stem}_aggregate.csv"),
        "gnuplot": long_path.with_suffix(".dat"),
    }


def run_and_write(spec: BenchSpec, jobs: int = 1, gnuplot: bool = False) -> dict:
    rows = run_bench(spec, jobs)
    aggregates = aggregate(rows)
    paths = output_paths(spec.output_path)
    write_long_csv(rows, paths["long"], record_wall_time=spec.record_wall_time)
    write_aggregate_csv(aggregates, paths["aggregate"])
    if gnuplot:
        write_gnuplot(aggregates, paths["gnuplot"])
    else:
        paths.pop("gnuplot")

    failed = sum(1 for row in rows if row["status"] == STATUS_FAILED)
    if failed:
        logger.warning("%d of %d repeat(s) failed and were left out of the aggregates", failed, len(rows))
    return {"rows": rows, "aggregates": aggregates, "paths": paths, "failed": failed}

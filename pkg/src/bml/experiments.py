"""Seeded parameter sweeps over the mixture grid, with CSV emission.

A sweep cell is one ``(alpha, d, n, r)`` combination; each of its trials
redraws the mean uniformly from the radius-r sphere, samples a fresh
training set, solves the max-margin problem (falling back to the
interpolator when the proliferation certificate makes them equal), and
evaluates the population risk exactly for Gaussian cells.  Everything is
a pure function of the base seed; trial failures are recorded per row and
never abort the sweep.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DegenerateGram,
    DomainError,
    InsufficientData,
    NotConverged,
    NotSeparable,
    ShapeError,
)
from .model import MixtureModel, polynomial_spectrum, read_document, sphere_mean
from .risk import exact_gaussian_log_risk, exact_gaussian_risk, monte_carlo_risk
from .sampling import sample_dataset
from .solvers import (
    gram_matrix,
    hard_margin_svm,
    min_norm_interpolator,
    sv_proliferation_predicate,
)
from .streams import DEFAULT_SEED, trial_seed

# Cells with more than this fraction of failed trials are flagged failed.
_CELL_FAILURE_FRACTION = 0.10

RECORD_CSV_HEADER = (
    "alpha,d,n,r,trial,risk,log_risk,predicate,solver,seed,ms"
)
AGGREGATE_CSV_HEADER = (
    "alpha,d,n,r,trials,failures,mean_risk,stderr_risk,log_mean_risk,"
    "equal_rate,failed"
)


@dataclass(frozen=True)
class SweepConfig:
    """Grid and execution parameters for one sweep."""

    alphas: tuple[float, ...]
    dims: tuple[int, ...]
    sizes: tuple[int, ...]
    radii: tuple[float, ...]
    entry_dist: str = "gaussian"
    trials: int = 100
    base_seed: int = DEFAULT_SEED
    svm_tol: float = 1e-10
    svm_max_iter: int = 100_000
    mc_samples: int = 100_000  # used only for non-Gaussian cells

    def __post_init__(self):
        for name in ("alphas", "dims", "sizes", "radii"):
            values = tuple(getattr(self, name))
            if not values:
                raise DomainError(f"grid dimension {name!r} must be non-empty")
            object.__setattr__(self, name, values)
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")

    def cells(self) -> list[tuple[float, int, int, float]]:
        return list(product(self.alphas, self.dims, self.sizes, self.radii))

    @staticmethod
    def from_dict(doc: dict) -> "SweepConfig":
        def grid(*names, required=True):
            for name in names:
                if name in doc:
                    v = doc[name]
                    return tuple(v) if isinstance(v, (list, tuple)) else (v,)
            if required:
                raise DomainError(f"sweep config is missing {names[0]!r}")
            return None

        return SweepConfig(
            alphas=tuple(float(a) for a in grid("alphas", "alpha")),
            dims=tuple(int(d) for d in grid("dims", "d")),
            sizes=tuple(int(n) for n in grid("sizes", "n")),
            radii=tuple(float(r) for r in grid("radii", "r")),
            entry_dist=doc.get("entry_dist", "gaussian"),
            trials=int(doc.get("trials", 100)),
            base_seed=int(doc.get("seed", doc.get("base_seed", DEFAULT_SEED))),
            svm_tol=float(doc.get("svm_tol", 1e-10)),
            svm_max_iter=int(doc.get("svm_max_iter", 100_000)),
            mc_samples=int(doc.get("mc_samples", 100_000)),
        )

    def to_dict(self) -> dict:
        return {
            "alphas": list(self.alphas),
            "dims": list(self.dims),
            "sizes": list(self.sizes),
            "radii": list(self.radii),
            "entry_dist": self.entry_dist,
            "trials": self.trials,
            "seed": self.base_seed,
            "svm_tol": self.svm_tol,
            "svm_max_iter": self.svm_max_iter,
            "mc_samples": self.mc_samples,
        }


def load_sweep_config(path: str | Path) -> SweepConfig:
    return SweepConfig.from_dict(read_document(path))


@dataclass(frozen=True)
class SweepRecord:
    """One (cell, trial) row."""

    alpha: float
    d: int
    n: int
    r: float
    trial: int
    mu_norm: float
    mu_sigma_sq: float
    risk: float  # nan when the trial failed
    log_risk: float
    predicate: str
    solver: str
    seed: int
    ms: float
    error: str | None = None


@dataclass(frozen=True)
class CellAggregate:
    alpha: float
    d: int
    n: int
    r: float
    trials: int
    failures: int
    mean_risk: float
    stderr_risk: float
    log_mean_risk: float  # log of the mean risk, safe against underflow
    equal_rate: float
    mean_mu_sigma_sq: float
    failed: bool


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    records: tuple[SweepRecord, ...]
    cells: tuple[CellAggregate, ...]

    def cell(self, alpha: float, d: int, n: int, r: float) -> CellAggregate:
        for c in self.cells:
            if (c.alpha, c.d, c.n, c.r) == (alpha, d, n, r):
                return c
        raise KeyError(f"no cell ({alpha}, {d}, {n}, {r}) in this sweep")


def cell_seed(base_seed: int, alpha: float, d: int, n: int, r: float) -> int:
    """Stable 64-bit seed for one cell, independent of grid order."""
    tag = f"{base_seed}|{float(alpha)!r}|{int(d)}|{int(n)}|{float(r)!r}"
    digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def run_trial(
    alpha: float,
    d: int,
    n: int,
    r: float,
    trial: int,
    config: SweepConfig,
) -> SweepRecord:
    """Sample, solve and score a single trial; failures become row state."""
    seed = trial_seed(cell_seed(config.base_seed, alpha, d, n, r), trial)
    cov = polynomial_spectrum(d, alpha)
    mean = sphere_mean(d, r, seed)
    model = MixtureModel(mean=mean, cov=cov, entry_dist=config.entry_dist)
    mu_sigma_sq = cov.sigma_norm(mean.vector) ** 2
    data = sample_dataset(model, n, seed, slim=True)

    start = time.perf_counter()
    predicate = ""
    solver = ""
    risk = log_risk = math.nan
    error = None
    try:
        G = gram_matrix(data)
        verdict = sv_proliferation_predicate(data, gram=G)
        predicate = verdict.verdict
        if verdict.verdict == "equal":
            clf = min_norm_interpolator(data, gram=G)
            solver = "interpolator"
        else:
            clf = hard_margin_svm(
                data, tol=config.svm_tol, max_iter=config.svm_max_iter, gram=G
            )
            solver = "svm"
        if config.entry_dist == "gaussian":
            risk = exact_gaussian_risk(clf, model)
            log_risk = exact_gaussian_log_risk(clf, model)
        else:
            est = monte_carlo_risk(clf, model, config.mc_samples, seed)
            risk = est.estimate
            log_risk = math.log(risk) if risk > 0 else -math.inf
    except (DegenerateGram, NotSeparable, NotConverged) as exc:
        error = type(exc).__name__
    ms = (time.perf_counter() - start) * 1e3
    return SweepRecord(
        alpha=alpha,
        d=d,
        n=n,
        r=r,
        trial=trial,
        mu_norm=mean.norm,
        mu_sigma_sq=mu_sigma_sq,
        risk=risk,
        log_risk=log_risk,
        predicate=predicate or "error",
        solver=solver or f"failed:{error}",
        seed=seed,
        ms=ms,
        error=error,
    )


def _aggregate(cell: tuple, rows: list[SweepRecord]) -> CellAggregate:
    alpha, d, n, r = cell
    ok = [row for row in rows if row.error is None]
    failures = len(rows) - len(ok)
    if ok:
        risks = np.array([row.risk for row in ok])
        log_risks = np.array([row.log_risk for row in ok])
        mean_risk = float(np.mean(risks))
        stderr = (
            float(np.std(risks, ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0
        )
        log_mean = float(logsumexp(log_risks) - math.log(len(ok)))
        equal_rate = sum(row.predicate == "equal" for row in ok) / len(ok)
        mean_msq = float(np.mean([row.mu_sigma_sq for row in ok]))
    else:
        mean_risk = stderr = log_mean = equal_rate = mean_msq = math.nan
    return CellAggregate(
        alpha=alpha,
        d=d,
        n=n,
        r=r,
        trials=len(rows),
        failures=failures,
        mean_risk=mean_risk,
        stderr_risk=stderr,
        log_mean_risk=log_mean,
        equal_rate=equal_rate,
        mean_mu_sigma_sq=mean_msq,
        failed=failures > _CELL_FAILURE_FRACTION * len(rows),
    )


def thread_count() -> int:
    """Worker count: ``BML_THREADS`` if set, else the logical core count."""
    raw = os.environ.get("BML_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise DomainError(f"BML_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def run_sweep(config: SweepConfig, threads: int | None = None) -> SweepResult:
    """Run every (cell, trial) pair and aggregate per cell.

    Trials are independent and may run on a thread pool; records are
    merged by (cell, trial) key, so the output is bit-identical for any
    worker count.
    """
    workers = thread_count() if threads is None else max(1, threads)
    cells = config.cells()
    jobs = [
        (idx, trial, cell)
        for idx, cell in enumerate(cells)
        for trial in range(config.trials)
    ]

    def run(job):
        idx, trial, (alpha, d, n, r) = job
        return (idx, trial), run_trial(alpha, d, n, r, trial, config)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            keyed = dict(pool.map(run, jobs))
    else:
        keyed = dict(map(run, jobs))

    records: list[SweepRecord] = []
    aggregates: list[CellAggregate] = []
    for idx, cell in enumerate(cells):
        rows = [keyed[(idx, trial)] for trial in range(config.trials)]
        records.extend(rows)
        aggregates.append(_aggregate(cell, rows))
    return SweepResult(config=config, records=tuple(records), cells=tuple(aggregates))


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    power: int


def log_risk_regression(
    result: SweepResult | list[CellAggregate],
    alpha: float,
    d: int,
    n: int,
    power: int = 2,
) -> RegressionFit:
    """Least-squares fit of ``-log(mean risk)`` against ``|mu|_2^power``.

    Uses the per-cell log of the mean risk, one point per radius.  The
    log path keeps cells far below the plain-float floor usable; points
    are dropped only when their log-mean-risk is not finite.  Fewer than
    three surviving radii raise ``InsufficientData``.
    """
    cells = result.cells if isinstance(result, SweepResult) else result
    pts = [
        (c.r**power, -c.log_mean_risk)
        for c in cells
        if c.alpha == alpha
        and c.d == d
        and c.n == n
        and not c.failed
        and np.isfinite(c.log_mean_risk)
    ]
    radii = {x for x, _ in pts}
    if len(radii) < 3:
        raise InsufficientData(
            f"need >= 3 usable radii for the fit, got {len(radii)}"
        )
    x = np.array([p[0] for p in pts])
    yv = np.array([p[1] for p in pts])
    slope, intercept = np.polyfit(x, yv, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((yv - fitted) ** 2))
    ss_tot = float(np.sum((yv - np.mean(yv)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        n_points=len(pts),
        power=power,
    )


@dataclass(frozen=True)
class DimensionSpread:
    """Risk-curve agreement across dimensions at a fixed decay exponent."""

    alpha: float
    n: int
    radii: tuple[float, ...]
    dims: tuple[int, ...]
    means: dict  # (r, d) -> mean risk
    stderrs: dict  # (r, d) -> standard error
    spreads: dict  # r -> max-min gap across dims
    max_spread: float


def dimension_free_check(
    result: SweepResult | list[CellAggregate],
    alpha: float,
    d_list: list[int],
    n: int,
) -> DimensionSpread:
    """Pointwise spread of the mean-risk curves across dimensions.

    All dimensions must share the same radius grid and sample size; a
    mismatch raises ``ShapeError``.
    """
    cells = result.cells if isinstance(result, SweepResult) else result
    by_d: dict[int, dict[float, CellAggregate]] = {}
    for c in cells:
        if c.alpha == alpha and c.n == n and c.d in d_list:
            by_d.setdefault(c.d, {})[c.r] = c
    missing = [d for d in d_list if d not in by_d]
    if missing:
        raise ShapeError(f"no cells for dimensions {missing}")
    grids = {d: tuple(sorted(by_d[d])) for d in d_list}
    base = grids[d_list[0]]
    if any(grids[d] != base for d in d_list):
        raise ShapeError(f"radius grids differ across dimensions: {grids}")

    means = {(r, d): by_d[d][r].mean_risk for r in base for d in d_list}
    stderrs = {(r, d): by_d[d][r].stderr_risk for r in base for d in d_list}
    spreads = {
        r: max(means[(r, d)] for d in d_list) - min(means[(r, d)] for d in d_list)
        for r in base
    }
    return DimensionSpread(
        alpha=alpha,
        n=n,
        radii=base,
        dims=tuple(d_list),
        means=means,
        stderrs=stderrs,
        spreads=spreads,
        max_spread=max(spreads.values()) if spreads else 0.0,
    )


# --- CSV and plot-script emission -------------------------------------------


def records_to_csv(records, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_CSV_HEADER.split(","))
        for rec in records:
            writer.writerow(
                [
                    repr(float(rec.alpha)),
                    rec.d,
                    rec.n,
                    repr(float(rec.r)),
                    rec.trial,
                    repr(float(rec.risk)),
                    repr(float(rec.log_risk)),
                    rec.predicate,
                    rec.solver,
                    rec.seed,
                    repr(float(rec.ms)),
                ]
            )


def aggregate_to_csv(cells, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_CSV_HEADER.split(","))
        for c in cells:
            writer.writerow(
                [
                    repr(float(c.alpha)),
                    c.d,
                    c.n,
                    repr(float(c.r)),
                    c.trials,
                    c.failures,
                    repr(float(c.mean_risk)),
                    repr(float(c.stderr_risk)),
                    repr(float(c.log_mean_risk)),
                    repr(float(c.equal_rate)),
                    int(c.failed),
                ]
            )


def write_plot_script(
    aggregate_csv: str | Path, out_path: str | Path, config: SweepConfig
) -> None:
    """Emit a gnuplot script referencing the aggregate CSV.

    The script is plain text for the user to run; this package never
    executes it.
    """
    aggregate_csv = Path(aggregate_csv)
    lines = [
        "# gnuplot script: risk curves per decay exponent",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'mean norm r'",
        "set ylabel 'mean risk'",
        "set grid",
    ]
    for alpha in config.alphas:
        for d in config.dims:
            for n in config.sizes:
                title = f"alpha={alpha} d={d} n={n}"
                cond = f"$1 == {alpha} && $2 == {d} && $3 == {n}"
                lines.append(
                    f"plot '{aggregate_csv.name}' using 4:({cond} ? $7 : 1/0) "
                    f"with linespoints title '{title}'"
                )
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")

"""Seeded Monte Carlo experiments, CSV reports and runtime scaling.

Every trial draws its own seed from ``(master_seed, n, c_index, trial)``
through a fixed 64-bit mixer, so a report depends only on its configuration
and never on the worker schedule.  Per-trial outcomes are sorted by trial
index before aggregation.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import analytic
from .core import SampleParams, sample_matrix, shred
from .reconstruct import (
    ReconstructConfig,
    Tag,
    detect_duplicate_lines,
    detect_isolated_ones,
    reconstruct,
    verify_witness,
)

REGIMES = ("weak", "strong", "roundtrip")
CSV_HEADER = ("regime", "n", "c", "p", "trials", "frac_observed", "frac_predicted", "unique", "nonrecon", "ambiguous", "mean_ms")

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def trial_seed(master_seed: int, n: int, c_index: int, trial: int) -> int:
    x = splitmix64(master_seed & _MASK)
    for v in (n, c_index, trial):
        x = splitmix64(x ^ splitmix64(v & _MASK))
    return x


@dataclass(frozen=True)
class ExperimentConfig:
    regime: str
    n_values: tuple[int, ...]
    c_values: tuple[float, ...]
    trials: int
    master_seed: int = 0
    jobs: int = 1
    out: Path | None = None
    # roundtrip only: use p = p_scale * ln(n) / n instead of the weak formula
    p_scale: float | None = None
    measure_time: bool = True

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.n_values or not self.c_values:
            raise ValueError("need at least one n and one c")
        if min(self.n_values) < 3:
            raise ValueError("all n must be at least 3")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if not 0 <= self.master_seed <= _MASK:
            raise ValueError("master_seed must fit in 64 bits")
        if self.p_scale is not None:
            if self.regime != "roundtrip":
                raise ValueError("p_scale only applies to the roundtrip regime")
            if self.p_scale <= 0:
                raise ValueError("p_scale must be positive")


def cell_density(config: ExperimentConfig, n: int, c: float) -> tuple[float, float]:
    """Sampling density and predicted limiting fraction for one cell."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", analytic.ClampWarning)
        if config.regime == "strong":
            return analytic.p_strong(n, c), analytic.limit_strong_reconstructible(c)
        if config.p_scale is None:
            return analytic.p_weak(n, c), analytic.limit_weak_reconstructible(c)
    p = min(config.p_scale * math.log(n) / n, analytic.P_MAX)
    # offset at which the weak formula gives this density
    c_eff = 2 * n * p - math.log(n) - math.log(math.log(n))
    return p, analytic.limit_weak_reconstructible(c_eff)


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    success: bool
    tag: str | None
    isolated_ones: int
    witness_ok: bool | None
    ms: float


@dataclass
class CellRecord:
    regime: str
    n: int
    c: float
    p: float
    trials: int
    frac_observed: float
    frac_predicted: float
    unique: int
    nonrecon: int
    ambiguous: int
    mean_ms: float
    # not part of the CSV
    median_ms: float = 0.0
    obstructed: int = 0
    witnesses_checked: int = 0
    witness_failures: int = 0

    def csv_row(self) -> list[str]:
        return [
            self.regime,
            str(self.n),
            repr(self.c),
            repr(self.p),
            str(self.trials),
            repr(self.frac_observed),
            repr(self.frac_predicted),
            str(self.unique),
            str(self.nonrecon),
            str(self.ambiguous),
            repr(self.mean_ms),
        ]


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[CellRecord] = field(default_factory=list)

    def record(self, n: int, c: float) -> CellRecord:
        for r in self.records:
            if r.n == n and r.c == c:
                return r
        raise KeyError((n, c))


def run_trial(regime: str, n: int, p: float, seed: int, trial: int, measure_time: bool = True) -> TrialOutcome:
    m = sample_matrix(SampleParams(n, p, seed))
    inst = shred(m)
    t0 = time.perf_counter()
    if regime == "strong":
        dup = detect_duplicate_lines(inst)
        ms = (time.perf_counter() - t0) * 1e3
        success = not (dup["duplicate_rows"] or dup["duplicate_cols"])
        return TrialOutcome(trial, success, None, 0, None, ms if measure_time else 0.0)
    result = reconstruct(inst)
    ms = (time.perf_counter() - t0) * 1e3
    witness_ok = None
    if result.tag is Tag.NONRECONSTRUCTIBLE:
        witness_ok = verify_witness(inst, result.witness)
    if regime == "weak":
        success = result.tag is Tag.UNIQUE
    else:
        success = result.tag is Tag.UNIQUE and result.matrix == m
    iso = len(detect_isolated_ones(m))
    return TrialOutcome(trial, success, result.tag.value, iso, witness_ok, ms if measure_time else 0.0)


def _run_batch(args) -> list[TrialOutcome]:
    regime, n, p, seeds, measure_time = args
    return [run_trial(regime, n, p, s, t, measure_time) for t, s in seeds]


def _aggregate(config: ExperimentConfig, n: int, c: float, p: float, predicted: float, outcomes) -> CellRecord:
    outcomes = sorted(outcomes, key=lambda o: o.trial)
    tags = [o.tag for o in outcomes]
    times = [o.ms for o in outcomes]
    checked = [o.witness_ok for o in outcomes if o.witness_ok is not None]
    return CellRecord(
        regime=config.regime,
        n=n,
        c=c,
        p=p,
        trials=len(outcomes),
        frac_observed=sum(o.success for o in outcomes) / len(outcomes),
        frac_predicted=predicted,
        unique=tags.count(Tag.UNIQUE.value),
        nonrecon=tags.count(Tag.NONRECONSTRUCTIBLE.value),
        ambiguous=tags.count(Tag.AMBIGUOUS.value),
        mean_ms=math.fsum(times) / len(times),
        median_ms=statistics.median(times),
        obstructed=sum(o.isolated_ones >= 2 for o in outcomes),
        witnesses_checked=len(checked),
        witness_failures=checked.count(False),
    )


def run_experiment(config: ExperimentConfig, progress: Callable[[str], None] | None = None) -> ExperimentReport:
    cells = []
    tasks = []
    for n in config.n_values:
        for ci, c in enumerate(config.c_values):
            p, predicted = cell_density(config, n, c)
            seeds = [(t, trial_seed(config.master_seed, n, ci, t)) for t in range(config.trials)]
            cells.append((n, c, p, predicted))
            # a few batches per cell keeps workers busy without huge pickles
            size = max(1, math.ceil(config.trials / (4 * config.jobs)))
            for start in range(0, config.trials, size):
                tasks.append((len(cells) - 1, (config.regime, n, p, seeds[start : start + size], config.measure_time)))

    results: list[list[TrialOutcome]] = [[] for _ in cells]
    if config.jobs == 1:
        for idx, args in tasks:
            results[idx].extend(_run_batch(args))
            if progress:
                progress(f"n={cells[idx][0]} c={cells[idx][1]}: {len(results[idx])}/{config.trials}")
    else:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [(idx, pool.submit(_run_batch, args)) for idx, args in tasks]
            for idx, fut in futures:
                results[idx].extend(fut.result())

    report = ExperimentReport(config)
    for (n, c, p, predicted), outcomes in zip(cells, results):
        report.records.append(_aggregate(config, n, c, p, predicted, outcomes))
    if config.out is not None:
        write_csv(report, config.out)
    return report


def write_csv(report: ExperimentReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in report.records:
            w.writerow(r.csv_row())


def read_csv(path) -> list[CellRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        out = []
        for row in reader:
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"malformed CSV row {row}")
            regime, n, c, p, trials, fo, fp, u, nr, amb, ms = row
            out.append(CellRecord(regime, int(n), float(c), float(p), int(trials), float(fo), float(fp), int(u), int(nr), int(amb), float(ms)))
        return out


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class ScalingRow:
    n: int
    mean_s: float
    ratio: float | None  # time(n) / time(previous n)
    flagged: bool


def ln_density(n: int) -> float:
    return math.log(n) / n


def bench_scaling(
    n_values: Sequence[int],
    p_rule: Callable[[int], float] = ln_density,
    seeds: Sequence[int] = (0, 1, 2),
    max_ratio: float = 5.0,
) -> list[ScalingRow]:
    """Mean reconstruct time per n; sampling is excluded from the timing."""
    n_values = list(n_values)
    if len(n_values) < 2:
        raise ValueError("need at least two values of n")
    for a, b in zip(n_values, n_values[1:]):
        if b != 2 * a:
            raise ValueError(f"consecutive n values must double, got {a} then {b}")
    if not seeds:
        raise ValueError("need at least one seed")
    rows: list[ScalingRow] = []
    for n in n_values:
        p = p_rule(n)
        times = []
        for s in seeds:
            inst = shred(sample_matrix(SampleParams(n, p, s)))
            t0 = time.perf_counter()
            reconstruct(inst, ReconstructConfig())
            times.append(time.perf_counter() - t0)
        mean = math.fsum(times) / len(times)
        ratio = mean / rows[-1].mean_s if rows else None
        rows.append(ScalingRow(n, mean, ratio, ratio is not None and ratio > max_ratio))
    return rows

"""Experiment analyses over run traces and random-pipeline evaluations.

Three pipelines: rank correlation of pipeline rankings across sample-size
fractions, per-minute average ranks of competing methods (with a tie
threshold), and time-to-equivalence between two methods' best-so-far curves.
Analyses are pure functions of their inputs: re-running them never
re-evaluates pipelines.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .data import Dataset, stratified_sample
from .evaluate import EvaluationCache, evaluate
from .metrics import spearman_rho
from .pipeline import Individual, OperatorRegistry
from .rng import RngStream
from .trace import RunTrace, best_value_at
from .variation import _random_tree

__all__ = [
    "CorrelationEntry",
    "CorrelationResult",
    "RankSeries",
    "EquivalenceResult",
    "correlation_experiment",
    "rank_over_time",
    "time_to_equivalence",
    "tie_ranks",
    "load_traces",
    "write_correlation_csv",
    "write_rank_csv",
    "write_equivalence_csv",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


# ---------------------------------------------------------------------------
# correlation across sample sizes


@dataclass(frozen=True)
class CorrelationEntry:
    fraction: float
    rho: float
    p: float
    n_pipelines: int  # pairs surviving pairwise failure exclusion


@dataclass(frozen=True)
class CorrelationResult:
    dataset: str
    entries: Tuple[CorrelationEntry, ...]  # descending fraction

    def entry(self, fraction: float) -> CorrelationEntry:
        for e in self.entries:
            if math.isclose(e.fraction, fraction):
                return e
        raise KeyError(fraction)


def _mean_auroc_scores(
    dataset: Dataset,
    pipelines: Sequence[Individual],
    fraction: float,
    repeats: int,
    folds: int,
    stream: RngStream,
    registry: OperatorRegistry,
    cache: EvaluationCache,
) -> List[Optional[float]]:
    """Mean AUROC per pipeline over `repeats` subset draws x k-fold CV;
    None marks a pipeline that failed on any draw."""
    s = max(dataset.n_classes * folds, int(round(fraction * dataset.n)))
    s = min(s, dataset.n)
    totals = [0.0] * len(pipelines)
    dead = [False] * len(pipelines)
    for r in range(repeats):
        subset = stratified_sample(dataset, s, stream.child(f"sub.f{fraction}.r{r}"))
        fold_stream = stream.child(f"folds.f{fraction}.r{r}")
        for j, ind in enumerate(pipelines):
            if dead[j]:
                continue
            result = evaluate(ind, subset, folds, None, fold_stream, registry, cache)
            if result.ok:
                totals[j] += result.auroc
            else:
                dead[j] = True
    return [None if dead[j] else totals[j] / repeats for j in range(len(pipelines))]


def correlation_experiment(
    datasets: Sequence[Dataset],
    n_pipelines: int,
    repeats: int,
    folds: int,
    fractions: Sequence[float],
    rng: RngStream,
    registry: Optional[OperatorRegistry] = None,
) -> List[CorrelationResult]:
    """Spearman correlation between pipeline rankings on data fractions and on
    the full data. Pipelines are drawn once per dataset; failures are excluded
    pairwise from both rankings. Fraction 1.0 reuses the full-data scores."""
    if registry is None:
        from .operators import DEFAULT_REGISTRY

        registry = DEFAULT_REGISTRY
    ordered = sorted(fractions, reverse=True)
    results = []
    for dataset in datasets:
        stream = rng.child(f"ds.{dataset.name}")
        gen = stream.child("pipelines").generator()
        pipelines = [Individual(_random_tree(gen, registry)) for _ in range(n_pipelines)]
        cache = EvaluationCache()
        full = _mean_auroc_scores(
            dataset, pipelines, 1.0, repeats, folds, stream, registry, cache
        )
        entries = []
        for fraction in ordered:
            if not 0.0 < fraction <= 1.0:
                raise ValueError(f"fraction {fraction} outside (0, 1]")
            if math.isclose(fraction, 1.0):
                part = full
            else:
                part = _mean_auroc_scores(
                    dataset, pipelines, fraction, repeats, folds, stream, registry, cache
                )
            paired = [(a, b) for a, b in zip(part, full) if a is not None and b is not None]
            if len(paired) < 3:
                raise ValueError(
                    f"{dataset.name}: only {len(paired)} pipelines survived at "
                    f"fraction {fraction}; need >= 3 for a correlation"
                )
            xs, ys = zip(*paired)
            rho, p = spearman_rho(xs, ys)
            entries.append(CorrelationEntry(fraction, rho, p, len(paired)))
        results.append(CorrelationResult(dataset.name, tuple(entries)))
    return results


# ---------------------------------------------------------------------------
# rank over time


@dataclass(frozen=True)
class RankSeries:
    """Average rank per method at each time point (lower rank is better)."""

    times_min: Tuple[float, ...]
    methods: Tuple[str, ...]
    avg_ranks: Tuple[Tuple[float, ...], ...]  # [time][method]


def tie_ranks(values: Sequence[float], tie_threshold: float) -> List[float]:
    """Ranks 1..m (1 = best = largest value), averaging within tie groups.

    Tie groups are connected components of |a - b| < threshold, i.e. maximal
    descending runs with consecutive gaps below the threshold.
    """
    m = len(values)
    order = sorted(range(m), key=lambda i: (-values[i], i))
    ranks = [0.0] * m
    start = 0
    while start < m:
        stop = start + 1
        while stop < m and values[order[stop - 1]] - values[order[stop]] < tie_threshold:
            stop += 1
        avg = (start + 1 + stop) / 2.0  # mean of 1-based positions start+1..stop
        for j in range(start, stop):
            ranks[order[j]] = avg
        start = stop
    return ranks


def rank_over_time(
    traces: Dict[Tuple[str, str, int], RunTrace],
    tie_threshold: float = 0.1,
    interval_secs: float = 60.0,
) -> RankSeries:
    """Average rank of each method across the (dataset, seed) grid at every
    interval boundary, ranking best-so-far AUROC with near-ties averaged.
    A method with no successful evaluation yet counts as 0.0."""
    methods = tuple(sorted({key[0] for key in traces}))
    cells = sorted({(key[1], key[2]) for key in traces})
    if len(methods) < 2:
        raise ValueError("rank_over_time needs at least two methods")
    axes = set()
    curves = {}
    horizon = 0.0
    for dataset, seed in cells:
        for method in methods:
            key = (method, dataset, seed)
            if key not in traces:
                raise ValueError(f"missing trace for method={method} dataset={dataset} seed={seed}")
            trace = traces[key]
            axes.add(trace.time_axis)
            curves[key] = trace.best_so_far("auroc")
            horizon = max(horizon, trace.duration_secs())
    if len(axes) > 1:
        raise ValueError("cannot mix wall-clock and generation-mode traces in one ranking")
    n_points = max(1, math.ceil(horizon / interval_secs))
    times = [interval_secs * (j + 1) for j in range(n_points)]
    rows = []
    for t in times:
        sums = [0.0] * len(methods)
        for cell in cells:
            values = [
                best_value_at(curves[(method, cell[0], cell[1])], t) for method in methods
            ]
            for i, r in enumerate(tie_ranks(values, tie_threshold)):
                sums[i] += r
        rows.append(tuple(s / len(cells) for s in sums))
    return RankSeries(tuple(t / 60.0 for t in times), methods, tuple(rows))


# ---------------------------------------------------------------------------
# time to equivalence


@dataclass(frozen=True)
class EquivalenceResult:
    dataset: str
    seed: int
    winner: str
    t_min: float  # when the winner first matched the loser's final best
    delta_t_min: float  # loser's own attainment time minus t_min
    loser_auroc_at_t: float
    orientation: int  # +1 when the winner is the first argument


def time_to_equivalence(trace_a: RunTrace, trace_b: RunTrace) -> EquivalenceResult:
    """How much sooner the eventually-better method reached the other method's
    final best-so-far AUROC."""
    if trace_a.time_axis != trace_b.time_axis:
        raise ValueError("cannot compare wall-clock and generation-mode traces")
    curve_a = trace_a.best_so_far("auroc")
    curve_b = trace_b.best_so_far("auroc")
    if not curve_a or not curve_b:
        raise ValueError("both traces need at least one successful evaluation")
    final_a, final_b = curve_a[-1][1], curve_b[-1][1]
    attain_a, attain_b = curve_a[-1][0], curve_b[-1][0]
    if final_a > final_b or (final_a == final_b and attain_a <= attain_b):
        winner_trace, winner_curve = trace_a, curve_a
        loser_trace, loser_curve = trace_b, curve_b
        loser_final, loser_attain = final_b, attain_b
        orientation = 1
    else:
        winner_trace, winner_curve = trace_b, curve_b
        loser_trace, loser_curve = trace_a, curve_a
        loser_final, loser_attain = final_a, attain_a
        orientation = -1
    t = next(when for when, value in winner_curve if value >= loser_final)
    meta_a, meta_b = winner_trace.meta, loser_trace.meta
    if meta_a.get("dataset") != meta_b.get("dataset") or meta_a.get("seed") != meta_b.get("seed"):
        raise ValueError("traces compare different (dataset, seed) cells")
    return EquivalenceResult(
        dataset=meta_a.get("dataset", ""),
        seed=meta_a.get("seed", 0),
        winner=meta_a.get("method", "a" if orientation == 1 else "b"),
        t_min=t / 60.0,
        delta_t_min=(loser_attain - t) / 60.0,
        loser_auroc_at_t=best_value_at(loser_curve, t),
        orientation=orientation,
    )


# ---------------------------------------------------------------------------
# trace IO and CSV emitters


def load_traces(paths: Iterable[str]) -> Dict[Tuple[str, str, int], RunTrace]:
    traces: Dict[Tuple[str, str, int], RunTrace] = {}
    for path in paths:
        trace = RunTrace.from_jsonl(path)
        key = (trace.meta["method"], trace.meta["dataset"], trace.meta["seed"])
        if key in traces:
            raise ValueError(f"duplicate trace for {key} in {path}")
        traces[key] = trace
    return traces


def write_correlation_csv(results: Sequence[CorrelationResult], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "fraction", "rho", "p"])
        for result in results:
            for e in result.entries:
                writer.writerow([result.dataset, _fmt(e.fraction), _fmt(e.rho), _fmt(e.p)])


def write_rank_csv(series: RankSeries, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_min", "method", "avg_rank"])
        for t, row in zip(series.times_min, series.avg_ranks):
            for method, rank in zip(series.methods, row):
                writer.writerow([_fmt(t), method, _fmt(rank)])


def write_equivalence_csv(results: Sequence[EquivalenceResult], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "seed", "winner", "t_min", "delta_t_min", "loser_auroc_at_t"])
        for r in results:
            writer.writerow(
                [
                    r.dataset,
                    r.seed,
                    r.winner,
                    _fmt(r.t_min),
                    _fmt(r.delta_t_min),
                    _fmt(r.loser_auroc_at_t),
                ]
            )

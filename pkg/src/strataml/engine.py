"""The layered evolutionary search loop and its baselines.

Layers hold segregated populations evaluated on stratified subsets of
growing size; every `g` generations each layer passes its best `k`
individuals up one layer (fitness cleared, since scores from different
sample sizes are not comparable) and the bottom layer is reseeded randomly. Higher
layers run only part of the time, layers that can no longer feed the top are
shut down in generation-budget mode, and per-individual evaluation time
shrinks quadratically with the sample fraction.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from .data import Dataset, SubsetView, stratified_allocation, stratified_sample
from .evaluate import EvalResult, EvaluationCache, evaluate
from .pipeline import Individual, OperatorRegistry, Status, canonical_form
from .rng import RngStream
from .selection import selection, top
from .trace import RunTrace
from .variation import VariationRates, new_population, var_or

__all__ = [
    "ConfigError",
    "NoViablePipelineError",
    "RunConfig",
    "LayerState",
    "layer_sample_sizes",
    "layer_active",
    "layer_timeout",
    "shutdown_check",
    "transfer_step",
    "layered_ea",
    "single_layer_baseline",
    "random_search_baseline",
    "summarize",
]


class ConfigError(ValueError):
    pass


class NoViablePipelineError(RuntimeError):
    """The budget ran out before any pipeline evaluated successfully."""


def layer_sample_sizes(n: int, m: int, n_classes: Optional[int] = None) -> List[int]:
    """Halving ladder [floor(N/2^(M-1)), ..., floor(N/2), N]."""
    if m < 1:
        raise ConfigError("need at least one layer")
    sizes = [n // (2 ** (m - 1 - j)) for j in range(m)]
    floor_classes = n_classes if n_classes is not None else 1
    if sizes[0] < floor_classes:
        raise ConfigError(
            f"N={n} too small: the lowest of {m} layers holds {sizes[0]} rows, "
            f"fewer than {floor_classes} classes"
        )
    return sizes


def layer_active(l: int, i: int, g: int, m: int) -> bool:
    """Literal activation predicate: layer l runs generation i iff
    (i mod g) < 2^(M-l+1); higher layers idle most of each g-window."""
    if not 1 <= l <= m:
        raise ValueError(f"layer {l} out of range 1..{m}")
    if i < 1:
        raise ValueError("generations are 1-based")
    return (i % g) < 2 ** (m - l + 1)


def layer_timeout(t: Optional[float], s: int, n: int) -> Optional[float]:
    """Per-individual evaluation budget: quadratic in the sample fraction, so
    a layer with half the data gets a fourth of the time."""
    if t is None:
        return None
    if not 0 < s <= n:
        raise ValueError("sample size must lie in (0, N]")
    return t * (s / n) ** 2


def shutdown_check(l: int, generations_remaining: int, g: int, m: int) -> bool:
    """True when layer l's individuals can no longer reach the top layer
    within the remaining generations (generation-budget mode only)."""
    return generations_remaining < (m - l) * g


@dataclass
class RunConfig:
    """Search parameters; sample_sizes is the ascending per-layer ladder S."""

    sample_sizes: Tuple[int, ...]
    g: int = 2
    population_size: int = 30
    transfer_count: int = 15
    folds: int = 3
    eval_timeout: Optional[float] = None
    rates: VariationRates = field(default_factory=VariationRates)
    seed: int = 0
    budget_generations: Optional[int] = None
    budget_seconds: Optional[float] = None
    workers: int = 1
    method: str = ""

    @classmethod
    def for_dataset(cls, dataset: Dataset, layers: int = 4, **kwargs) -> "RunConfig":
        sizes = layer_sample_sizes(dataset.n, layers, dataset.n_classes)
        return cls(sample_sizes=tuple(sizes), **kwargs)

    @property
    def layers(self) -> int:
        return len(self.sample_sizes)

    def label(self) -> str:
        if self.method:
            return self.method
        if self.layers == 1:
            return "baseline"
        return f"layered-g{self.g}"

    def validate(self, dataset: Dataset) -> None:
        m = self.layers
        sizes = self.sample_sizes
        if m < 1:
            raise ConfigError("need at least one layer")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError("sample sizes must be strictly ascending")
        if sizes[-1] != dataset.n:
            raise ConfigError(f"top layer must use all {dataset.n} rows, got {sizes[-1]}")
        if self.g < 1:
            raise ConfigError("transfer interval g must be >= 1")
        if not 1 <= self.transfer_count <= self.population_size:
            raise ConfigError("transfer count k must satisfy 1 <= k <= P")
        if self.folds < 2:
            raise ConfigError("need at least 2 CV folds")
        if (self.budget_generations is None) == (self.budget_seconds is None):
            raise ConfigError("set exactly one of budget_generations / budget_seconds")
        if self.budget_generations is not None:
            if self.budget_generations < 1:
                raise ConfigError("generation budget must be >= 1")
            if m > 1 and self.budget_generations < (m - 1) * self.g:
                raise ConfigError(
                    f"G={self.budget_generations} < (M-1)*g={(m - 1) * self.g}: "
                    "the top layer could never be reached"
                )
        if self.budget_seconds is not None and self.budget_seconds <= 0:
            raise ConfigError("wall-clock budget must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        counts = dataset.class_counts
        alloc = stratified_allocation(counts, sizes[0])
        if min(alloc) < self.folds:
            raise ConfigError(
                f"lowest layer of {sizes[0]} rows cannot give every class {self.folds} fold members"
            )

    def to_json(self) -> str:
        doc = {
            "sample_sizes": list(self.sample_sizes),
            "g": self.g,
            "population_size": self.population_size,
            "transfer_count": self.transfer_count,
            "folds": self.folds,
            "eval_timeout": self.eval_timeout,
            "crossover_prob": self.rates.crossover_prob,
            "mutation_prob": self.rates.mutation_prob,
            "seed": self.seed,
            "budget_generations": self.budget_generations,
            "budget_seconds": self.budget_seconds,
            "workers": self.workers,
            "method": self.method,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        doc = json.loads(text)
        rates = VariationRates(
            doc.pop("crossover_prob", 0.1), doc.pop("mutation_prob", 0.9)
        )
        doc["sample_sizes"] = tuple(doc["sample_sizes"])
        return cls(rates=rates, **doc)


@dataclass
class LayerState:
    """One layer: population, subset, activity/shutdown flags, eval budget."""

    index: int  # 1-based; higher index = more data
    sample_size: int
    timeout: Optional[float]
    population: List[Individual] = field(default_factory=list)
    subset: Optional[SubsetView] = None
    fold_stream: Optional[RngStream] = None
    shutdown: bool = False
    fresh: bool = True  # evaluate the population as-is on the next activation


def transfer_step(
    layers: List[LayerState],
    p: int,
    k: int,
    rng: RngStream,
    registry: OperatorRegistry,
    trace: Optional[RunTrace] = None,
    generation: int = 0,
) -> None:
    """One transfer epoch, processed from layer M-1 down to 1: the next layer
    receives Top(k) as unevaluated copies (the source keeps its members until
    its own next selection), then the bottom layer is reseeded. Shut-down and
    empty sources transfer nothing; with a single layer this is a no-op."""
    m = len(layers)
    if m < 2:
        return
    for idx in range(m - 2, -1, -1):
        src, dst = layers[idx], layers[idx + 1]
        if src.shutdown or not src.population:
            continue
        movers = top(src.population, min(k, len(src.population)))
        dst.population = dst.population + [ind.cloned_unevaluated() for ind in movers]
        dst.fresh = True
        if trace is not None:
            trace.record_transfer(generation, src.index, dst.index, len(movers))
    layers[0].population = new_population(p, rng.child("reseed"), registry)
    layers[0].fresh = True
    if trace is not None:
        trace.record_reseed(generation, p)


class _BudgetExhausted(Exception):
    pass


class _Run:
    def __init__(self, cfg: RunConfig, dataset: Dataset, registry: OperatorRegistry):
        cfg.validate(dataset)
        self.cfg = cfg
        self.dataset = dataset
        self.registry = registry
        self.m = cfg.layers
        self.stream = RngStream(cfg.seed)
        self.cache = EvaluationCache()
        self.generation_mode = cfg.budget_generations is not None
        self.trace = RunTrace(self._meta(), deterministic_times=self.generation_mode)
        self.started = time.perf_counter()
        self.layers = [
            LayerState(
                index=j + 1,
                sample_size=s,
                timeout=layer_timeout(cfg.eval_timeout, s, dataset.n),
            )
            for j, s in enumerate(cfg.sample_sizes)
        ]
        # per-layer best successful evaluation, by (score desc, length asc)
        self.archive: dict[int, tuple[Individual, EvalResult]] = {}

    def _meta(self) -> dict:
        cfg = self.cfg
        return {
            "type": "meta",
            "method": cfg.label(),
            "dataset": self.dataset.name,
            "seed": cfg.seed,
            "mode": "generations" if self.generation_mode else "seconds",
            "budget": cfg.budget_generations if self.generation_mode else cfg.budget_seconds,
            "layers": self.m,
            "g": cfg.g,
            "pop": cfg.population_size,
            "k": cfg.transfer_count,
            "folds": cfg.folds,
            "timeout_secs": cfg.eval_timeout,
            "sample_sizes": list(cfg.sample_sizes),
        }

    def elapsed(self) -> float:
        return time.perf_counter() - self.started

    def _remaining_budget(self) -> Optional[float]:
        if self.generation_mode:
            return None
        return self.cfg.budget_seconds - self.elapsed()

    def _redraw_subsets(self, epoch: int) -> None:
        for layer in self.layers:
            sub_stream = self.stream.child(f"subset.l{layer.index}.e{epoch}")
            layer.subset = stratified_sample(self.dataset, layer.sample_size, sub_stream)
            layer.fold_stream = self.stream.child(f"folds.l{layer.index}.e{epoch}")

    def _evaluate_batch(
        self, layer: LayerState, individuals: List[Individual], generation: int
    ) -> List[Individual]:
        """Evaluate in submission order; returns the successful individuals with
        fitness set. Raises _BudgetExhausted once the wall budget is gone."""
        survivors: List[Individual] = []

        def run_one(ind: Individual) -> EvalResult:
            timeout = layer.timeout
            remaining = self._remaining_budget()
            if remaining is not None:
                timeout = remaining if timeout is None else min(timeout, remaining)
            return evaluate(
                ind,
                layer.subset,
                self.cfg.folds,
                timeout,
                layer.fold_stream,
                self.registry,
                self.cache,
            )

        def record(ind: Individual, result: EvalResult) -> None:
            self.trace.record_eval(
                generation,
                layer.index,
                layer.sample_size,
                canonical_form(ind.tree),
                result,
                self.cfg.seed,
                self.elapsed(),
            )
            if result.ok:
                done = ind.evaluated(result.score, result.length)
                survivors.append(done)
                held = self.archive.get(layer.index)
                key = (-result.score, result.length)
                if held is None or key < (-held[1].score, held[1].length):
                    self.archive[layer.index] = (done, result)

        exhausted = False
        if self.cfg.workers > 1 and len(individuals) > 1:
            from concurrent.futures import ThreadPoolExecutor

            remaining = self._remaining_budget()
            if remaining is not None and remaining <= 0:
                raise _BudgetExhausted()
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
                futures = [(ind, pool.submit(run_one, ind)) for ind in individuals]
                for ind, future in futures:
                    record(ind, future.result())
        else:
            for ind in individuals:
                remaining = self._remaining_budget()
                if remaining is not None and remaining <= 0:
                    exhausted = True
                    break
                record(ind, run_one(ind))
        if exhausted:
            raise _BudgetExhausted()
        return survivors

    def _progress_layer(self, layer: LayerState, generation: int) -> None:
        cfg = self.cfg
        if layer.fresh:
            pending = [ind for ind in layer.population if ind.status is Status.UNEVALUATED]
            kept = [ind for ind in layer.population if ind.status is Status.EVALUATED]
            pool = kept + self._evaluate_batch(layer, pending, generation)
            layer.fresh = False
        else:
            offspring = var_or(
                layer.population,
                cfg.population_size,
                cfg.rates,
                self.stream.child(f"varor.g{generation}.l{layer.index}"),
                self.registry,
            )
            pool = layer.population + self._evaluate_batch(layer, offspring, generation)
        layer.population = selection(pool, cfg.population_size) if pool else []

    def run(self) -> Tuple[Individual, RunTrace]:
        cfg = self.cfg
        transfers = self.m > 1
        self._redraw_subsets(0)
        self.layers[0].population = new_population(
            cfg.population_size, self.stream.child("init"), self.registry
        )
        i = 0
        try:
            while True:
                i += 1
                if self.generation_mode and i > cfg.budget_generations:
                    break
                remaining = self._remaining_budget()
                if remaining is not None and remaining <= 0:
                    break
                if transfers and self.generation_mode:
                    for layer in self.layers:
                        if not layer.shutdown and shutdown_check(
                            layer.index, cfg.budget_generations - i, cfg.g, self.m
                        ):
                            layer.shutdown = True
                            self.trace.record_shutdown(i, layer.index)
                for layer in self.layers:
                    if layer.shutdown or not layer.population:
                        continue
                    if transfers and not layer_active(layer.index, i, cfg.g, self.m):
                        continue
                    self._progress_layer(layer, i)
                if transfers and i % cfg.g == 0:
                    epoch = i // cfg.g
                    transfer_step(
                        self.layers,
                        cfg.population_size,
                        cfg.transfer_count,
                        self.stream.child(f"epoch.{epoch}"),
                        self.registry,
                        trace=self.trace,
                        generation=i,
                    )
                    self._redraw_subsets(epoch)
        except _BudgetExhausted:
            pass
        return self._best(), self.trace

    def _best(self) -> Individual:
        for layer in reversed(self.layers):
            evaluated = [ind for ind in layer.population if ind.status is Status.EVALUATED]
            if evaluated:
                return top(evaluated, 1)[0]
        for index in sorted(self.archive, reverse=True):
            return self.archive[index][0]
        raise NoViablePipelineError("budget exhausted before any successful evaluation")


def layered_ea(
    config: RunConfig, dataset: Dataset, registry: Optional[OperatorRegistry] = None
) -> Tuple[Individual, RunTrace]:
    """Run the layered search; returns the best individual of the highest
    non-empty layer plus the full run trace."""
    if registry is None:
        from .operators import DEFAULT_REGISTRY

        registry = DEFAULT_REGISTRY
    return _Run(config, dataset, registry).run()


def single_layer_baseline(
    config: RunConfig, dataset: Dataset, registry: Optional[OperatorRegistry] = None
) -> Tuple[Individual, RunTrace]:
    """Classic single-population search: full-data evaluation, no layer
    machinery; equals layered_ea with M=1 on identical seeds."""
    cfg = replace(
        config,
        sample_sizes=(dataset.n,),
        transfer_count=min(config.transfer_count, config.population_size),
        method=config.method or "baseline",
    )
    return layered_ea(cfg, dataset, registry)


def random_search_baseline(
    config: RunConfig, dataset: Dataset, registry: Optional[OperatorRegistry] = None
) -> Tuple[Individual, RunTrace]:
    """Draw and evaluate random pipelines on the full dataset under the same
    budget; one 'generation' is a batch of P draws."""
    if registry is None:
        from .operators import DEFAULT_REGISTRY

        registry = DEFAULT_REGISTRY
    cfg = replace(config, sample_sizes=(dataset.n,), method=config.method or "random")
    runner = _Run(cfg, dataset, registry)
    layer = runner.layers[0]
    runner._redraw_subsets(0)
    draw_gen = runner.stream.child("draws").generator()
    from .variation import _random_tree

    batch = 0
    try:
        while True:
            batch += 1
            if runner.generation_mode and batch > cfg.budget_generations:
                break
            remaining = runner._remaining_budget()
            if remaining is not None and remaining <= 0:
                break
            draws = [
                Individual(_random_tree(draw_gen, registry))
                for _ in range(cfg.population_size)
            ]
            survivors = runner._evaluate_batch(layer, draws, batch)
            layer.population = selection(
                layer.population + survivors, cfg.population_size
            ) if (layer.population or survivors) else []
    except _BudgetExhausted:
        pass
    return runner._best(), runner.trace


def summarize(best: Individual, trace: RunTrace, wall_seconds: float) -> dict:
    """Run summary document: best pipeline, its metrics, and totals."""
    text = canonical_form(best.tree)
    evals = trace.evaluations()
    auroc = None
    for record in reversed(evals):
        if record["outcome"] == "ok" and record["pipeline"] == text:
            auroc = record["auroc"]
            break
    return {
        "best_pipeline": text,
        "score": best.fitness[0] if best.fitness else None,
        "auroc": auroc,
        "length": best.fitness[1] if best.fitness else None,
        "total_evaluations": len(evals),
        "wall_seconds": wall_seconds,
        "method": trace.meta.get("method"),
        "dataset": trace.meta.get("dataset"),
        "seed": trace.meta.get("seed"),
    }

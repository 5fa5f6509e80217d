import json

import numpy as np
import pytest

from strataml.data import Dataset
from strataml.datagen import make_blobs
from strataml.engine import (
    ConfigError,
    RunConfig,
    LayerState,
    layer_active,
    layer_sample_sizes,
    layer_timeout,
    layered_ea,
    random_search_baseline,
    shutdown_check,
    single_layer_baseline,
    summarize,
    transfer_step,
)
from strataml.operators import DEFAULT_REGISTRY
from strataml.pipeline import Status
from strataml.rng import RngStream
from strataml.selection import top
from strataml.variation import new_population


@pytest.fixture(scope="module")
def desk_dataset():
    return make_blobs(
        400, 6, 2, RngStream(404, "engine-data"), cluster_std=2.0, center_scale=3.0
    )


def desk_config(dataset, **kwargs):
    defaults = dict(
        layers=4,
        g=2,
        population_size=8,
        transfer_count=4,
        folds=3,
        seed=11,
        budget_generations=8,
    )
    defaults.update(kwargs)
    layers = defaults.pop("layers")
    return RunConfig.for_dataset(dataset, layers=layers, **defaults)


# --- parameter helpers -------------------------------------------------------


def test_layer_sample_sizes_million_rows():
    assert layer_sample_sizes(1_000_000, 4) == [125_000, 250_000, 500_000, 1_000_000]


def test_layer_sample_sizes_single_layer():
    assert layer_sample_sizes(123, 1) == [123]


def test_layer_sample_sizes_floor_halving():
    assert layer_sample_sizes(100, 3) == [25, 50, 100]


def test_layer_sample_sizes_too_small():
    with pytest.raises(ConfigError):
        layer_sample_sizes(16, 4, n_classes=5)


def test_layer_active_toggle_pattern():
    # M=4, g=12: layers run (12, 8, 4, 2) of every 12 generations
    for layer, expected in ((1, 12), (2, 8), (3, 4), (4, 2)):
        active = [i for i in range(1, 13) if layer_active(layer, i, 12, 4)]
        assert len(active) == expected
    assert [i % 12 for i in range(1, 25) if layer_active(4, i, 12, 4)] == [1, 0, 1, 0]


def test_layer_active_single_layer_g2():
    assert all(layer_active(1, i, 2, 1) for i in range(1, 50))


def test_layer_active_bottom_layer_always_on():
    assert all(layer_active(1, i, 12, 4) for i in range(1, 100))


def test_layer_timeout_values():
    assert layer_timeout(600.0, 100, 100) == 600.0
    assert layer_timeout(600.0, 50, 100) == 150.0
    assert layer_timeout(600.0, 25, 100) == 37.5
    assert layer_timeout(600.0, 100, 800) == 600.0 * (1 / 8) ** 2
    assert layer_timeout(None, 50, 100) is None


def test_shutdown_check_boundaries():
    assert shutdown_check(1, 47, 16, 4) is True
    assert shutdown_check(1, 48, 16, 4) is False
    assert shutdown_check(4, 0, 16, 4) is False  # top layer never shuts down


# --- transfer_step -----------------------------------------------------------


def evaluated_layer(index, sample_size, count, registry, seed=0):
    pop = new_population(count, RngStream(seed, f"layer{index}"), registry)
    pop = [ind.evaluated(0.5 + 0.01 * i, 1) for i, ind in enumerate(pop)]
    return LayerState(index=index, sample_size=sample_size, timeout=None, population=pop)


def test_transfer_step_moves_top_k(registry):
    src = evaluated_layer(1, 50, 30, registry)
    dst = LayerState(index=2, sample_size=100, timeout=None)
    transfer_step([src, dst], 30, 15, RngStream(1, "t"), registry)
    assert len(dst.population) == 15
    assert all(ind.status is Status.UNEVALUATED for ind in dst.population)
    assert dst.fresh
    # the source was reseeded with 30 fresh random individuals
    assert len(src.population) == 30
    assert all(ind.status is Status.UNEVALUATED for ind in src.population)


def test_transfer_step_copies_best_by_top_order(registry):
    src = evaluated_layer(1, 50, 10, registry)
    dst = LayerState(index=2, sample_size=100, timeout=None)
    expected = [ind.tree for ind in top(src.population, 3)]
    transfer_step([src, dst], 10, 3, RngStream(2, "t"), registry)
    assert [ind.tree for ind in dst.population] == expected


def test_transfer_step_small_source(registry):
    src = evaluated_layer(1, 50, 7, registry)
    dst = LayerState(index=2, sample_size=100, timeout=None)
    transfer_step([src, dst], 30, 15, RngStream(3, "t"), registry)
    assert len(dst.population) == 7


def test_transfer_step_empty_source(registry):
    src = LayerState(index=1, sample_size=50, timeout=None)
    dst = LayerState(index=2, sample_size=100, timeout=None)
    transfer_step([src, dst], 10, 5, RngStream(4, "t"), registry)
    assert dst.population == []
    assert len(src.population) == 10  # bottom layer still reseeded


def test_transfer_step_single_layer_noop(registry):
    only = evaluated_layer(1, 100, 6, registry)
    before = list(only.population)
    transfer_step([only], 6, 3, RngStream(5, "t"), registry)
    assert only.population == before


# --- layered_ea hand-simulated trace ------------------------------------------


def test_layered_ea_matches_hand_simulation(desk_dataset):
    """M=4, g=2, G=8, P=4: transfer epochs at {2,4,6,8}; the cascade reaches the
    top layer after generation 6; layer l shuts down once G - i < (4-l)*2."""
    cfg = desk_config(desk_dataset, population_size=4, transfer_count=2)
    best, trace = layered_ea(cfg, desk_dataset)

    shutdowns = {(r["layer"], r["generation"]) for r in trace.events("shutdown")}
    assert shutdowns == {(1, 3), (2, 5), (3, 7)}

    transfers = [(r["generation"], r["from_layer"], r["to_layer"]) for r in trace.events("transfer")]
    assert transfers == [(2, 1, 2), (4, 2, 3), (6, 3, 4)]

    reseeds = [r["generation"] for r in trace.events("reseed")]
    assert reseeds == [2, 4, 6, 8]  # one transfer epoch every g generations

    evals = trace.evaluations()
    by_layer_gens = {}
    for r in evals:
        by_layer_gens.setdefault(r["layer"], set()).add(r["generation"])
    assert by_layer_gens[1] == {1, 2}
    assert by_layer_gens[2] == {3, 4}
    assert by_layer_gens[3] == {5, 6}
    assert by_layer_gens[4] == {7, 8}

    # no evaluations after a layer's shutdown event
    for layer, gen in shutdowns:
        assert all(r["generation"] < gen for r in evals if r["layer"] == layer)

    # the winner's fitness appears as a top-layer evaluation record
    score, length = best.fitness
    assert any(
        r["layer"] == 4
        and r["outcome"] == "ok"
        and r["score"] == score
        and r["length"] == length
        and r["sample_size"] == desk_dataset.n
        for r in evals
    )


def test_layered_ea_single_layer_equals_baseline(desk_dataset, tmp_path):
    cfg = RunConfig(
        sample_sizes=(desk_dataset.n,),
        g=16,  # any g: a single layer never toggles or transfers
        population_size=6,
        transfer_count=3,
        folds=3,
        seed=5,
        budget_generations=5,
        method="baseline",
    )
    best_a, trace_a = layered_ea(cfg, desk_dataset)
    best_b, trace_b = single_layer_baseline(cfg, desk_dataset)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    trace_a.to_jsonl(str(a))
    trace_b.to_jsonl(str(b))
    assert a.read_bytes() == b.read_bytes()
    assert best_a.fitness == best_b.fitness


def test_generation_mode_traces_are_reproducible(desk_dataset, tmp_path):
    cfg = desk_config(desk_dataset)
    paths = []
    for name in ("first", "second"):
        _, trace = layered_ea(cfg, desk_dataset)
        path = tmp_path / f"{name}.jsonl"
        trace.to_jsonl(str(path))
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_thread_fanout_does_not_change_the_trace(desk_dataset, tmp_path):
    serial = desk_config(desk_dataset, workers=1)
    threaded = desk_config(desk_dataset, workers=3)
    _, trace_a = layered_ea(serial, desk_dataset)
    _, trace_b = layered_ea(threaded, desk_dataset)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    trace_a.to_jsonl(str(a))
    trace_b.to_jsonl(str(b))
    assert a.read_bytes() == b.read_bytes()


def test_best_so_far_is_monotone(desk_dataset):
    _, trace = layered_ea(desk_config(desk_dataset), desk_dataset)
    for metric in ("score", "auroc"):
        curve = trace.best_so_far(metric)
        values = [v for _, v in curve]
        assert values == sorted(values)


def test_selection_inputs_share_one_layer(desk_dataset):
    # every evaluation record carries its layer; populations never mix layers,
    # so per (generation, layer) all records agree on sample_size
    _, trace = layered_ea(desk_config(desk_dataset), desk_dataset)
    sizes = {}
    for r in trace.evaluations():
        key = (r["generation"], r["layer"])
        sizes.setdefault(key, set()).add(r["sample_size"])
    assert all(len(s) == 1 for s in sizes.values())


def test_layer_evaluation_count_bound(desk_dataset):
    # per g-generation window, layer l evaluates at most min(2^(M-l+1), g) * P
    cfg = desk_config(desk_dataset, budget_generations=12, g=3, population_size=6, transfer_count=3)
    _, trace = layered_ea(cfg, desk_dataset)
    m, g, p = 4, 3, 6
    window_counts = {}
    for r in trace.evaluations():
        window = (r["generation"] - 1) // g
        key = (r["layer"], window)
        window_counts[key] = window_counts.get(key, 0) + 1
    for (layer, _), count in window_counts.items():
        assert count <= min(2 ** (m - layer + 1), g) * p


def test_baseline_best_so_far_non_decreasing(desk_dataset):
    cfg = desk_config(desk_dataset, layers=1, population_size=10, budget_generations=6)
    best, trace = single_layer_baseline(cfg, desk_dataset)
    curve = trace.best_so_far("score")
    assert curve and curve[-1][1] == best.fitness[0]


def test_baseline_reaches_perfect_score_quickly(two_blob_dataset):
    cfg = RunConfig(
        sample_sizes=(two_blob_dataset.n,),
        population_size=20,
        transfer_count=10,
        folds=3,
        seed=2,
        budget_generations=5,
    )
    best, _ = single_layer_baseline(cfg, two_blob_dataset)
    assert best.fitness[0] == 1.0


def test_random_search_exact_record_count(desk_dataset):
    cfg = desk_config(desk_dataset, layers=1, population_size=9, budget_generations=1)
    _, trace = random_search_baseline(cfg, desk_dataset)
    assert len(trace.evaluations()) == 9


def test_random_search_deterministic(desk_dataset, tmp_path):
    cfg = desk_config(desk_dataset, layers=1, population_size=6, budget_generations=2)
    _, t1 = random_search_baseline(cfg, desk_dataset)
    _, t2 = random_search_baseline(cfg, desk_dataset)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    t1.to_jsonl(str(a))
    t2.to_jsonl(str(b))
    assert a.read_bytes() == b.read_bytes()


def test_random_search_finds_separable_blobs(two_blob_dataset):
    cfg = RunConfig(
        sample_sizes=(two_blob_dataset.n,),
        population_size=25,
        transfer_count=12,
        folds=3,
        seed=3,
        budget_generations=2,
    )
    best, trace = random_search_baseline(cfg, two_blob_dataset)
    curve = trace.best_so_far("auroc")
    assert curve[-1][1] == 1.0  # a Gaussian NB draw is near-certain in 50 tries


def test_wall_clock_mode_records_elapsed(desk_dataset):
    cfg = desk_config(desk_dataset, budget_generations=None, budget_seconds=3.0)
    best, trace = layered_ea(cfg, desk_dataset)
    evals = trace.evaluations()
    assert evals
    assert all(r["elapsed_ms"] is not None for r in evals)
    assert trace.events("shutdown") == []  # shutdown is generation-mode only
    assert best.fitness is not None


def test_no_viable_pipeline_error(desk_dataset):
    from strataml.engine import NoViablePipelineError
    from strataml.pipeline import OperatorKind, OperatorRegistry, OperatorSpec

    class AlwaysFails:
        def fit(self, X, y, n_classes, cancel=None):
            raise RuntimeError("broken estimator")

        def predict_proba(self, X, cancel=None):
            raise RuntimeError("unreachable")

    registry = OperatorRegistry(
        [OperatorSpec("Broken", OperatorKind.CLASSIFIER, (), factory=lambda p: AlwaysFails())]
    )
    cfg = desk_config(desk_dataset, layers=1, population_size=4, budget_generations=2)
    with pytest.raises(NoViablePipelineError):
        layered_ea(cfg, desk_dataset, registry)


def test_config_validation_errors(desk_dataset):
    with pytest.raises(ConfigError, match="never be reached"):
        desk_config(desk_dataset, budget_generations=5).validate(desk_dataset)
    with pytest.raises(ConfigError, match="exactly one"):
        desk_config(desk_dataset, budget_seconds=5.0).validate(desk_dataset)
    with pytest.raises(ConfigError, match="k must"):
        desk_config(desk_dataset, transfer_count=99).validate(desk_dataset)
    with pytest.raises(ConfigError, match="ascending"):
        RunConfig(
            sample_sizes=(100, 100, desk_dataset.n),
            budget_generations=10,
            population_size=4,
            transfer_count=2,
        ).validate(desk_dataset)
    with pytest.raises(ConfigError, match="top layer"):
        RunConfig(
            sample_sizes=(10, 50),
            budget_generations=10,
            population_size=4,
            transfer_count=2,
        ).validate(desk_dataset)


def test_config_json_round_trip(desk_dataset):
    cfg = desk_config(desk_dataset, eval_timeout=12.5)
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg


def test_summarize_schema(desk_dataset):
    cfg = desk_config(desk_dataset)
    best, trace = layered_ea(cfg, desk_dataset)
    summary = summarize(best, trace, wall_seconds=1.5)
    assert set(summary) >= {
        "best_pipeline",
        "score",
        "auroc",
        "length",
        "total_evaluations",
        "wall_seconds",
    }
    assert summary["score"] == best.fitness[0]
    assert summary["auroc"] is not None
    assert summary["total_evaluations"] == len(trace.evaluations())


def test_generation_mode_hides_wall_times(desk_dataset):
    _, trace = layered_ea(desk_config(desk_dataset), desk_dataset)
    for r in trace.evaluations():
        assert r["wall_time_ms"] is None and r["elapsed_ms"] is None
        assert r["seq"] >= 1

import math
from collections import Counter

import numpy as np
import pytest

from strataml.pipeline import (
    HyperparamSpec,
    Individual,
    OperatorKind,
    OperatorRegistry,
    OperatorSpec,
    PipelineTree,
    Status,
    canonical_form,
    default_node,
    pipeline_length,
    validate_tree,
)
from strataml.rng import RngStream
from strataml.variation import (
    VariationRates,
    _draw_branch,
    crossover,
    mutate,
    new_population,
    random_tree,
    var_or,
)

from conftest import make_individuals


def tiny_registry(classifiers, preprocessors=()):
    ops = []
    for name, params in classifiers:
        ops.append(OperatorSpec(name, OperatorKind.CLASSIFIER, params))
    for name, params in preprocessors:
        ops.append(OperatorSpec(name, OperatorKind.PREPROCESSOR, params))
    return OperatorRegistry(ops)


def hp(name, domain):
    return HyperparamSpec(name, tuple(domain), domain[0])


# --- random_tree / new_population ----------------------------------------


def test_random_tree_forced_outcome():
    reg = tiny_registry([("OnlyClf", ())])
    tree = random_tree(RngStream(1), reg)
    assert tree.classifier.name == "OnlyClf"
    assert tree.preprocessors == ()


def test_random_tree_deterministic_per_stream(registry):
    rng = RngStream(42, "fixed")
    assert random_tree(rng, registry) == random_tree(rng, registry)


def test_random_tree_classifier_uniformity(registry):
    draws = 10_000
    rng = RngStream(7, "uniformity")
    counts = Counter(
        random_tree(rng.child(str(i)), registry).classifier.name for i in range(draws)
    )
    k = len(registry.classifiers)
    p = 1.0 / k
    se = math.sqrt(p * (1 - p) / draws)
    for op in registry.classifiers:
        assert abs(counts[op.name] / draws - p) < 5 * se


def test_random_trees_always_validate(registry):
    rng = RngStream(11, "validate")
    gen = rng.generator()
    for _ in range(10_000):
        from strataml.variation import _random_tree

        assert validate_tree(_random_tree(gen, registry), registry) == []


def test_new_population_sizes(registry):
    assert len(new_population(1, RngStream(0), registry)) == 1
    pop = new_population(30, RngStream(0), registry)
    assert len(pop) == 30
    assert all(ind.status is Status.UNEVALUATED for ind in pop)


def test_new_population_replay(registry):
    a = new_population(20, RngStream(5, "pop"), registry)
    b = new_population(20, RngStream(5, "pop"), registry)
    assert [ind.tree for ind in a] == [ind.tree for ind in b]


# --- mutate ----------------------------------------------------------------


def test_mutate_insert_forced():
    reg = tiny_registry([("Clf", ())], [("Pre", ())])
    tree = PipelineTree(classifier=default_node(reg.get("Clf")))
    for seed in range(20):
        out = mutate(tree, RngStream(seed), reg)
        assert pipeline_length(out) == 2


def test_mutate_never_inserts_at_cap(registry):
    chain = tuple(default_node(registry.get("StandardScaler")) for _ in range(6))
    tree = PipelineTree(classifier=default_node(registry.get("GaussianNB")), preprocessors=chain)
    assert pipeline_length(tree) == 7
    for seed in range(200):
        out = mutate(tree, RngStream(seed, "cap"), registry)
        assert pipeline_length(out) <= 7
        assert validate_tree(out, registry) == []


def test_mutate_point_changes_value():
    reg = tiny_registry([("Clf", (hp("alpha", (0.1, 0.2, 0.3)),))])
    tree = PipelineTree(classifier=default_node(reg.get("Clf")))
    for seed in range(50):
        out = mutate(tree, RngStream(seed, "point"), reg)
        assert out.classifier.name == "Clf"
        assert out.preprocessors == ()
        assert out.classifier.value_of("alpha") != 0.1


def test_mutate_changes_canonical_form(registry):
    # every registry domain is multi-valued, so mutation must change the text
    rng = RngStream(3, "change")
    for i in range(500):
        tree = random_tree(rng.child(f"t{i}"), registry)
        out = mutate(tree, rng.child(f"m{i}"), registry)
        assert canonical_form(out) != canonical_form(tree)


def test_mutate_leaves_input_unmodified(registry, fig_tree):
    before = canonical_form(fig_tree)
    mutate(fig_tree, RngStream(9), registry)
    assert canonical_form(fig_tree) == before


def test_mutate_closure(registry):
    rng = RngStream(13, "closure")
    for i in range(500):
        tree = random_tree(rng.child(f"t{i}"), registry)
        assert validate_tree(mutate(tree, rng.child(f"m{i}"), registry), registry) == []


# --- crossover --------------------------------------------------------------


def test_crossover_identical_trees(registry, fig_tree):
    for seed in range(20):
        result = crossover(fig_tree, fig_tree, RngStream(seed), registry)
        assert result is not None
        assert result[0] == fig_tree and result[1] == fig_tree


def test_crossover_disjoint_operators(registry):
    a = PipelineTree(classifier=default_node(registry.get("GaussianNB")))
    b = PipelineTree(classifier=default_node(registry.get("DecisionTree")))
    assert crossover(a, b, RngStream(0), registry) is None


def test_crossover_shared_root_swaps_chains(registry):
    clf = default_node(registry.get("DecisionTree"))
    a = PipelineTree(classifier=clf, preprocessors=(default_node(registry.get("StandardScaler")),))
    b = PipelineTree(classifier=clf, preprocessors=(default_node(registry.get("Binarizer")),))
    swapped = 0
    for seed in range(40):
        result = crossover(a, b, RngStream(seed, "root"), registry)
        assert result is not None
        ca, cb = result
        assert validate_tree(ca, registry) == [] and validate_tree(cb, registry) == []
        if ca.preprocessors and ca.preprocessors[0].name == "Binarizer":
            assert cb.preprocessors[0].name == "StandardScaler"
            swapped += 1
    assert swapped > 0  # the chain-swap mode fires


def test_crossover_respects_length_cap(registry):
    clf = default_node(registry.get("GaussianNB"))
    long_chain = tuple(default_node(registry.get("StandardScaler")) for _ in range(6))
    a = PipelineTree(classifier=clf, preprocessors=long_chain)
    b = PipelineTree(classifier=clf, preprocessors=long_chain)
    for seed in range(50):
        result = crossover(a, b, RngStream(seed, "cap"), registry)
        if result is None:
            continue
        for child in result:
            assert validate_tree(child, registry) == []


def test_crossover_deterministic(registry):
    rng = RngStream(21, "det")
    a = random_tree(rng.child("a"), registry)
    b = random_tree(rng.child("b"), registry)
    r1 = crossover(a, b, RngStream(77, "x"), registry)
    r2 = crossover(a, b, RngStream(77, "x"), registry)
    assert r1 == r2


# --- var_or ------------------------------------------------------------------


def evaluated_population(registry, n, seed=0):
    rng = RngStream(seed, "parents")
    pop = []
    for i in range(n):
        tree = random_tree(rng.child(str(i)), registry)
        pop.append(Individual(tree, (0.5 + 0.001 * i, pipeline_length(tree)), Status.EVALUATED))
    return pop


def test_var_or_all_mutation(registry):
    pop = evaluated_population(registry, 1)
    offspring = var_or(pop, 20, VariationRates(0.0, 1.0), RngStream(1), registry)
    parent_text = canonical_form(pop[0].tree)
    assert len(offspring) == 20
    for child in offspring:
        assert child.status is Status.UNEVALUATED
        assert canonical_form(child.tree) != parent_text


def test_var_or_all_clones(registry):
    pop = evaluated_population(registry, 6)
    offspring = var_or(pop, 30, VariationRates(0.0, 0.0), RngStream(2), registry)
    parents = {canonical_form(ind.tree) for ind in pop}
    assert len(offspring) == 30
    assert {canonical_form(c.tree) for c in offspring} <= parents


def test_var_or_branch_frequencies():
    rates = VariationRates(0.1, 0.9)
    gen = RngStream(4, "branches").generator()
    counts = Counter(_draw_branch(gen, rates) for _ in range(10_000))
    assert counts["clone"] == 0
    for branch, p in (("crossover", 0.1), ("mutation", 0.9)):
        se = math.sqrt(p * (1 - p) / 10_000)
        assert abs(counts[branch] / 10_000 - p) < 5 * se


def test_var_or_exact_count_and_closure(registry):
    pop = evaluated_population(registry, 10)
    offspring = var_or(pop, 30, VariationRates(0.1, 0.9), RngStream(8), registry)
    assert len(offspring) == 30
    for child in offspring:
        assert validate_tree(child.tree, registry) == []
        assert child.status is Status.UNEVALUATED


def test_var_or_rejects_unevaluated_parents(registry):
    pop = new_population(3, RngStream(0), registry)
    with pytest.raises(ValueError):
        var_or(pop, 5, VariationRates(), RngStream(1), registry)


def test_var_or_rejects_empty_pool(registry):
    with pytest.raises(ValueError):
        var_or([], 5, VariationRates(), RngStream(1), registry)


def test_var_or_parents_untouched(registry):
    pop = evaluated_population(registry, 5)
    snapshot = [(ind.tree, ind.fitness, ind.status) for ind in pop]
    var_or(pop, 30, VariationRates(0.2, 0.7), RngStream(3), registry)
    assert [(ind.tree, ind.fitness, ind.status) for ind in pop] == snapshot


def test_var_or_deterministic(registry):
    pop = evaluated_population(registry, 8)
    a = var_or(pop, 25, VariationRates(0.1, 0.9), RngStream(6, "v"), registry)
    b = var_or(pop, 25, VariationRates(0.1, 0.9), RngStream(6, "v"), registry)
    assert [canonical_form(x.tree) for x in a] == [canonical_form(x.tree) for x in b]


def test_variation_rates_validation():
    with pytest.raises(ValueError):
        VariationRates(0.6, 0.6)
    with pytest.raises(ValueError):
        VariationRates(-0.1, 0.5)

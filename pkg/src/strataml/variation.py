"""Random pipeline generation, mutation, crossover and offspring production.

All operators are pure functions over immutable trees plus an explicit
labeled RNG stream: identical (inputs, stream) always reproduces identical
outputs, and every produced tree satisfies the pipeline invariants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .pipeline import (
    MAX_PIPELINE_LENGTH,
    Individual,
    OperatorKind,
    OperatorRegistry,
    OperatorSpec,
    PipelineTree,
    PrimitiveNode,
    Status,
)
from .rng import RngStream

__all__ = [
    "VariationRates",
    "random_tree",
    "new_population",
    "mutate",
    "crossover",
    "var_or",
]

# Fresh random chains stay short; mutation can still grow them to the cap.
MAX_INITIAL_CHAIN = 3


@dataclass(frozen=True)
class VariationRates:
    """Per-offspring branch probabilities; the remainder is the clone branch."""

    crossover_prob: float = 0.1
    mutation_prob: float = 0.9

    def __post_init__(self):
        if not (0.0 <= self.crossover_prob <= 1.0 and 0.0 <= self.mutation_prob <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.crossover_prob + self.mutation_prob > 1.0 + 1e-12:
            raise ValueError("crossover_prob + mutation_prob must be <= 1")


def _choice(gen: np.random.Generator, seq: Sequence):
    return seq[int(gen.integers(len(seq)))]


def _random_node(gen: np.random.Generator, op: OperatorSpec) -> PrimitiveNode:
    return PrimitiveNode(
        op.name, tuple((hp.name, _choice(gen, hp.domain)) for hp in op.hyperparams)
    )


def _random_tree(gen: np.random.Generator, registry: OperatorRegistry) -> PipelineTree:
    classifier = _random_node(gen, _choice(gen, registry.classifiers))
    chain_len = 0
    if registry.preprocessors:
        chain_len = int(gen.integers(MAX_INITIAL_CHAIN + 1))
    chain = tuple(
        _random_node(gen, _choice(gen, registry.preprocessors)) for _ in range(chain_len)
    )
    return PipelineTree(classifier=classifier, preprocessors=chain)


def random_tree(rng: RngStream, registry: OperatorRegistry) -> PipelineTree:
    """Uniform random pipeline: classifier uniform over the registry, chain
    length uniform in [0, 3], every hyperparameter uniform over its domain."""
    if not registry.classifiers:
        raise ValueError("registry has no classifiers")
    return _random_tree(rng.generator(), registry)


def new_population(p: int, rng: RngStream, registry: OperatorRegistry) -> List[Individual]:
    """Exactly p unevaluated random individuals (duplicates permitted)."""
    if p < 1:
        raise ValueError("population size must be >= 1")
    gen = rng.generator()
    return [Individual(_random_tree(gen, registry)) for _ in range(p)]


# ---------------------------------------------------------------------------
# mutation


def _point_targets(tree: PipelineTree, registry: OperatorRegistry) -> list[tuple[int, str]]:
    """(primitive index, param name) slots, preferring multi-valued domains so a
    point mutation can always change the canonical form when possible."""
    prims = tree.primitives()
    multi, single = [], []
    for i, node in enumerate(prims):
        op = registry.get(node.name)
        for hp in op.hyperparams:
            (multi if len(hp.domain) > 1 else single).append((i, hp.name))
    return multi if multi else single


def _replace_targets(tree: PipelineTree, registry: OperatorRegistry) -> list[int]:
    prims = tree.primitives()
    targets = []
    for i, node in enumerate(prims):
        kind = registry.get(node.name).kind
        pool = registry.classifiers if kind is OperatorKind.CLASSIFIER else registry.preprocessors
        if any(op.name != node.name for op in pool):
            targets.append(i)
    return targets


def _set_primitive(tree: PipelineTree, index: int, node: PrimitiveNode) -> PipelineTree:
    prims = list(tree.primitives())
    prims[index] = node
    return PipelineTree(classifier=prims[-1], preprocessors=tuple(prims[:-1]))


def _mutate(
    gen: np.random.Generator,
    tree: PipelineTree,
    registry: OperatorRegistry,
    max_length: int,
) -> PipelineTree:
    applicable = []
    point_slots = _point_targets(tree, registry)
    if point_slots:
        applicable.append("point")
    if len(tree.primitives()) < max_length and registry.preprocessors:
        applicable.append("insert")
    if tree.preprocessors:
        applicable.append("shrink")
    replace_slots = _replace_targets(tree, registry)
    if replace_slots:
        applicable.append("replace")
    if not applicable:
        return tree

    kind = _choice(gen, applicable)
    if kind == "point":
        idx, param = _choice(gen, point_slots)
        node = tree.primitives()[idx]
        domain = registry.get(node.name).hyperparam(param).domain
        current = node.value_of(param)
        candidates = [v for v in domain if v != current] or list(domain)
        return _set_primitive(tree, idx, node.with_value(param, _choice(gen, candidates)))
    if kind == "insert":
        new_pre = _random_node(gen, _choice(gen, registry.preprocessors))
        pos = int(gen.integers(len(tree.preprocessors) + 1))
        chain = tree.preprocessors[:pos] + (new_pre,) + tree.preprocessors[pos:]
        return PipelineTree(classifier=tree.classifier, preprocessors=chain)
    if kind == "shrink":
        pos = int(gen.integers(len(tree.preprocessors)))
        chain = tree.preprocessors[:pos] + tree.preprocessors[pos + 1 :]
        return PipelineTree(classifier=tree.classifier, preprocessors=chain)
    # replace: swap one primitive for a different operator of the same kind
    idx = _choice(gen, replace_slots)
    node = tree.primitives()[idx]
    kind_ = registry.get(node.name).kind
    pool = registry.classifiers if kind_ is OperatorKind.CLASSIFIER else registry.preprocessors
    replacement = _choice(gen, [op for op in pool if op.name != node.name])
    return _set_primitive(tree, idx, _random_node(gen, replacement))


def mutate(
    tree: PipelineTree,
    rng: RngStream,
    registry: OperatorRegistry,
    max_length: int = MAX_PIPELINE_LENGTH,
) -> PipelineTree:
    """One uniformly chosen applicable mutation out of {point, insert, shrink,
    replace}; the input tree is never modified."""
    return _mutate(rng.generator(), tree, registry, max_length)


# ---------------------------------------------------------------------------
# crossover


def _occurrences(tree: PipelineTree, name: str) -> list[int]:
    return [i for i, node in enumerate(tree.primitives()) if node.name == name]


def _swap_chains(
    a: PipelineTree, b: PipelineTree, ia: int, ib: int
) -> Tuple[PipelineTree, PipelineTree]:
    """Exchange the data-input chains feeding primitive `ia` of a and `ib` of b."""
    prims_a, prims_b = list(a.primitives()), list(b.primitives())
    new_a = b.preprocessors[:ib] + tuple(prims_a[ia:])
    new_b = a.preprocessors[:ia] + tuple(prims_b[ib:])
    ta = PipelineTree(classifier=new_a[-1], preprocessors=new_a[:-1])
    tb = PipelineTree(classifier=new_b[-1], preprocessors=new_b[:-1])
    return ta, tb


def _crossover(
    gen: np.random.Generator,
    a: PipelineTree,
    b: PipelineTree,
    registry: OperatorRegistry,
    max_length: int,
) -> Optional[Tuple[PipelineTree, PipelineTree]]:
    names_a = {n.name for n in a.primitives()}
    shared = sorted(names_a & {n.name for n in b.primitives()})
    if not shared:
        return None
    len_a, len_b = len(a.primitives()), len(b.primitives())

    def pair_modes(op: OperatorSpec, ia: int, ib: int) -> list[str]:
        modes = []
        if (ib + (len_a - ia)) <= max_length and (ia + (len_b - ib)) <= max_length:
            modes.append("chain")
        if op.hyperparams:
            modes.append("terminal")
        return modes

    viable: dict[str, list[tuple[int, int]]] = {}
    for name in shared:
        op = registry.get(name)
        pairs = [
            (ia, ib)
            for ia in _occurrences(a, name)
            for ib in _occurrences(b, name)
            if pair_modes(op, ia, ib)
        ]
        if pairs:
            viable[name] = pairs
    if not viable:
        return None
    name = _choice(gen, sorted(viable))
    op = registry.get(name)
    ia, ib = _choice(gen, viable[name])
    if _choice(gen, pair_modes(op, ia, ib)) == "chain":
        return _swap_chains(a, b, ia, ib)
    param = _choice(gen, [hp.name for hp in op.hyperparams])
    node_a = a.primitives()[ia]
    node_b = b.primitives()[ib]
    ta = _set_primitive(a, ia, node_a.with_value(param, node_b.value_of(param)))
    tb = _set_primitive(b, ib, node_b.with_value(param, node_a.value_of(param)))
    return ta, tb


def crossover(
    a: PipelineTree,
    b: PipelineTree,
    rng: RngStream,
    registry: OperatorRegistry,
    max_length: int = MAX_PIPELINE_LENGTH,
) -> Optional[Tuple[PipelineTree, PipelineTree]]:
    """One-point crossover at a primitive name shared by both parents.

    A uniformly chosen shared name (then occurrence pair) exchanges either the
    data chains feeding the two occurrences or the value of one corresponding
    hyperparameter terminal, chosen uniformly among the options that keep both
    children under the length cap. Returns None (the no-op signal) when the
    parents share no primitive or no option stays valid.
    """
    return _crossover(rng.generator(), a, b, registry, max_length)


# ---------------------------------------------------------------------------
# offspring


def _draw_branch(gen: np.random.Generator, rates: VariationRates) -> str:
    r = float(gen.random())
    if r < rates.crossover_prob:
        return "crossover"
    if r < rates.crossover_prob + rates.mutation_prob:
        return "mutation"
    return "clone"


def var_or(
    population: Sequence[Individual],
    n: int,
    rates: VariationRates,
    rng: RngStream,
    registry: OperatorRegistry,
    max_length: int = MAX_PIPELINE_LENGTH,
) -> List[Individual]:
    """Produce exactly n unevaluated offspring: crossover of two uniform
    parents (first child kept; a no-op crossover degrades to a clone),
    mutation of one uniform parent, or an unchanged clone."""
    if not population:
        raise ValueError("var_or needs a non-empty parent pool")
    for ind in population:
        if ind.status is not Status.EVALUATED:
            raise ValueError("var_or parents must all be evaluated")
    gen = rng.generator()
    offspring: List[Individual] = []
    for _ in range(n):
        branch = _draw_branch(gen, rates)
        if branch == "crossover":
            pa = _choice(gen, population)
            pb = _choice(gen, population)
            crossed = _crossover(gen, pa.tree, pb.tree, registry, max_length)
            tree = crossed[0] if crossed is not None else pa.tree
            offspring.append(Individual(tree))
        elif branch == "mutation":
            parent = _choice(gen, population)
            offspring.append(Individual(_mutate(gen, parent.tree, registry, max_length)))
        else:
            offspring.append(_choice(gen, population).cloned_unevaluated())
    return offspring

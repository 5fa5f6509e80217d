"""Typed tree representation of machine-learning pipelines.

A pipeline is a linear chain of preprocessor primitives feeding a single
classifier root; every primitive carries one terminal per declared
hyperparameter. Trees serialize to a canonical prefix text form such as

    BernoulliNB(StandardScaler(INPUT), alpha=1.0, binarize=0.5)

which round-trips through :func:`parse_pipeline`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Tuple, Union

__all__ = [
    "MAX_PIPELINE_LENGTH",
    "INPUT_TOKEN",
    "OperatorKind",
    "HyperparamSpec",
    "OperatorSpec",
    "OperatorRegistry",
    "PrimitiveNode",
    "PipelineTree",
    "Fitness",
    "Status",
    "Individual",
    "PipelineError",
    "PipelineParseError",
    "UnknownOperatorError",
    "HyperparamDomainError",
    "StructureError",
    "pipeline_length",
    "canonical_form",
    "parse_pipeline",
    "validate_tree",
    "default_node",
]

# Length cap in primitives (preprocessors + classifier). Long pipelines are
# costly to evaluate and hard to interpret; 7 bounds both.
MAX_PIPELINE_LENGTH = 7

INPUT_TOKEN = "INPUT"

HyperparamValue = Union[int, float, str]


class PipelineError(ValueError):
    """Base class for pipeline grammar/registry errors."""


class PipelineParseError(PipelineError):
    pass


class UnknownOperatorError(PipelineError):
    pass


class HyperparamDomainError(PipelineError):
    pass


class StructureError(PipelineError):
    pass


class OperatorKind(Enum):
    PREPROCESSOR = "preprocessor"
    CLASSIFIER = "classifier"


@dataclass(frozen=True)
class HyperparamSpec:
    """One hyperparameter slot: a finite, non-empty value domain plus a default."""

    name: str
    domain: Tuple[HyperparamValue, ...]
    default: HyperparamValue

    def __post_init__(self):
        if not self.domain:
            raise ValueError(f"hyperparameter {self.name!r} has an empty domain")
        if not any(self.default == v for v in self.domain):
            raise ValueError(f"default for {self.name!r} not in its domain")


@dataclass(frozen=True)
class OperatorSpec:
    """A registered primitive operator (one data input, fixed hyperparameter slots)."""

    name: str
    kind: OperatorKind
    hyperparams: Tuple[HyperparamSpec, ...] = ()
    factory: Optional[object] = field(default=None, compare=False, repr=False)
    input_arity: int = 1

    def hyperparam(self, name: str) -> HyperparamSpec:
        for hp in self.hyperparams:
            if hp.name == name:
                return hp
        raise KeyError(name)


class OperatorRegistry:
    """Immutable name -> OperatorSpec mapping split by kind."""

    def __init__(self, operators: Iterable[OperatorSpec]):
        ops = tuple(operators)
        names = [op.name for op in ops]
        if len(set(names)) != len(names):
            raise ValueError("duplicate operator names in registry")
        self._by_name = {op.name: op for op in ops}
        self._preprocessors = tuple(op for op in ops if op.kind is OperatorKind.PREPROCESSOR)
        self._classifiers = tuple(op for op in ops if op.kind is OperatorKind.CLASSIFIER)

    @property
    def preprocessors(self) -> Tuple[OperatorSpec, ...]:
        return self._preprocessors

    @property
    def classifiers(self) -> Tuple[OperatorSpec, ...]:
        return self._classifiers

    def get(self, name: str) -> OperatorSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownOperatorError(f"unknown operator {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self._by_name.values())


@dataclass(frozen=True)
class PrimitiveNode:
    """A primitive occurrence: operator name plus its terminal values in declaration order."""

    name: str
    hyperparams: Tuple[Tuple[str, HyperparamValue], ...] = ()

    def value_of(self, param: str) -> HyperparamValue:
        for key, val in self.hyperparams:
            if key == param:
                return val
        raise KeyError(param)

    def with_value(self, param: str, value: HyperparamValue) -> "PrimitiveNode":
        return PrimitiveNode(
            self.name,
            tuple((k, value if k == param else v) for k, v in self.hyperparams),
        )


@dataclass(frozen=True)
class PipelineTree:
    """Linear pipeline: ``preprocessors[0]`` is applied to the raw input first,
    the classifier consumes the last preprocessor's output (Fig-style chain).

    Construction does not validate; :func:`validate_tree` reports violations
    as data so that genetic operators and parsers can share one gate.
    """

    classifier: Optional[PrimitiveNode]
    preprocessors: Tuple[PrimitiveNode, ...] = ()

    def primitives(self) -> Tuple[PrimitiveNode, ...]:
        """All primitive nodes in application order (classifier last)."""
        if self.classifier is None:
            return self.preprocessors
        return self.preprocessors + (self.classifier,)


Fitness = Tuple[float, int]  # (score to maximize, length to minimize)


class Status(Enum):
    UNEVALUATED = "unevaluated"
    EVALUATED = "evaluated"
    FAILED = "failed"


@dataclass(frozen=True)
class Individual:
    """A pipeline plus its evaluation state. Immutable: evaluation produces a
    new Individual rather than mutating the parent."""

    tree: PipelineTree
    fitness: Optional[Fitness] = None
    status: Status = Status.UNEVALUATED

    def evaluated(self, score: float, length: int) -> "Individual":
        return Individual(self.tree, (float(score), int(length)), Status.EVALUATED)

    def failed(self) -> "Individual":
        return Individual(self.tree, None, Status.FAILED)

    def cloned_unevaluated(self) -> "Individual":
        return Individual(self.tree, None, Status.UNEVALUATED)


def pipeline_length(tree: PipelineTree) -> int:
    """Number of primitive nodes (hyperparameter/input terminals not counted)."""
    return len(tree.primitives())


def _format_value(value: HyperparamValue) -> str:
    if isinstance(value, bool):
        raise PipelineError("boolean hyperparameter values are not part of the grammar")
    if isinstance(value, (int, float)):
        return repr(value)
    return str(value)


def canonical_form(tree: PipelineTree) -> str:
    """Deterministic prefix-notation text; equal trees iff equal text."""
    expr = INPUT_TOKEN
    for node in tree.primitives():
        args = [expr] + [f"{k}={_format_value(v)}" for k, v in node.hyperparams]
        expr = f"{node.name}({', '.join(args)})"
    return expr


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<punct>[(),=]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            if text[pos:].strip() == "":
                break
            raise PipelineParseError(f"unexpected character {text[pos]!r} at position {pos}")
        if match.lastgroup == "num":
            raw = match.group("num")
            is_int = re.fullmatch(r"[-+]?\d+", raw) is not None
            tokens.append(("num", int(raw) if is_int else float(raw)))
        elif match.lastgroup == "ident":
            tokens.append(("ident", match.group("ident")))
        else:
            tokens.append(("punct", match.group("punct")))
        pos = match.end()
    tokens.append(("end", None))
    return tokens


def _snap_to_domain(op: OperatorSpec, param: str, value: HyperparamValue) -> HyperparamValue:
    try:
        spec = op.hyperparam(param)
    except KeyError:
        raise HyperparamDomainError(f"{op.name} has no hyperparameter {param!r}") from None
    for member in spec.domain:
        if type(member) is str or type(value) is str:
            if member == value:
                return member
        elif member == value:  # numeric: 1 == 1.0, keep the domain's own object
            return member
    raise HyperparamDomainError(f"value {value!r} outside the domain of {op.name}.{param}")


def parse_pipeline(text: str, registry: OperatorRegistry) -> PipelineTree:
    """Parse canonical pipeline text into a tree satisfying all invariants.

    Raises PipelineParseError / UnknownOperatorError / HyperparamDomainError /
    StructureError on malformed input.
    """
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos]

    def take(kind, value=None):
        nonlocal pos
        tok = tokens[pos]
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise PipelineParseError(f"expected {value or kind}, got {tok[1]!r}")
        pos += 1
        return tok[1]

    def parse_call():
        name = take("ident")
        if name == INPUT_TOKEN:
            return []
        op = registry.get(name)
        take("punct", "(")
        kind, val = peek()
        if kind != "ident":
            raise PipelineParseError(f"expected data input in {name}, got {val!r}")
        chain = parse_call()
        params = {}
        while peek() == ("punct", ","):
            take("punct", ",")
            pname = take("ident")
            take("punct", "=")
            kind, raw = peek()
            if kind not in ("num", "ident"):
                raise PipelineParseError(f"expected hyperparameter value, got {raw!r}")
            take(kind)
            if pname in params:
                raise PipelineParseError(f"duplicate hyperparameter {pname!r} in {name}")
            params[pname] = _snap_to_domain(op, pname, raw)
        take("punct", ")")
        missing = [hp.name for hp in op.hyperparams if hp.name not in params]
        if missing:
            raise HyperparamDomainError(f"{name} missing hyperparameters {missing}")
        node = PrimitiveNode(name, tuple((hp.name, params[hp.name]) for hp in op.hyperparams))
        return chain + [node]

    nodes = parse_call()
    take("end")
    if not nodes:
        raise StructureError("pipeline has no primitives")
    *chain, root = nodes
    root_op = registry.get(root.name)
    if root_op.kind is not OperatorKind.CLASSIFIER:
        raise StructureError(f"root primitive {root.name} is not a classifier")
    for node in chain:
        if registry.get(node.name).kind is not OperatorKind.PREPROCESSOR:
            raise StructureError(f"classifier {node.name} in non-root position")
    return PipelineTree(classifier=root, preprocessors=tuple(chain))


def validate_tree(
    tree: PipelineTree,
    registry: OperatorRegistry,
    max_length: int = MAX_PIPELINE_LENGTH,
) -> list[str]:
    """Check every tree invariant; returns a list of violation descriptions
    (empty iff the tree is valid). Violations are data, not exceptions."""
    violations: list[str] = []
    prims = tree.primitives()
    if not prims:
        violations.append("empty pipeline: no primitive nodes")
        return violations
    if tree.classifier is None:
        violations.append("missing root classifier")
        return violations
    if len(prims) > max_length:
        violations.append(f"length cap: {len(prims)} primitives exceeds {max_length}")

    def check_node(node: PrimitiveNode, expect: OperatorKind, where: str):
        if node.name not in registry:
            violations.append(f"{where}: unknown operator {node.name!r}")
            return
        op = registry.get(node.name)
        if op.kind is not expect:
            violations.append(f"{where}: {node.name} is a {op.kind.value}, expected {expect.value}")
        declared = [hp.name for hp in op.hyperparams]
        present = [k for k, _ in node.hyperparams]
        if present != declared:
            violations.append(
                f"{where}: hyperparameters {present} do not match declaration {declared}"
            )
            return
        for key, val in node.hyperparams:
            spec = op.hyperparam(key)
            if not any(
                (member == val if not (type(member) is str or type(val) is str) else member == val)
                for member in spec.domain
            ):
                violations.append(f"{where}: {node.name}.{key}={val!r} outside domain")

    check_node(tree.classifier, OperatorKind.CLASSIFIER, "root")
    for i, node in enumerate(tree.preprocessors):
        check_node(node, OperatorKind.PREPROCESSOR, f"chain[{i}]")
    return violations


def default_node(op: OperatorSpec) -> PrimitiveNode:
    """Primitive with every hyperparameter at its registry default."""
    return PrimitiveNode(op.name, tuple((hp.name, hp.default) for hp in op.hyperparams))

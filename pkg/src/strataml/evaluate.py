"""Cross-validated pipeline evaluation with cooperative timeouts and memoization.

An evaluation fits the preprocessor chain and classifier per fold (training
statistics come from the training fold only), scores accuracy and AUROC on
the held-out fold, and records one of three outcomes: ok, failed (any
fit/predict error) or timed_out. Failed and timed-out pipelines carry no
fitness and are excluded from parenthood by the caller.

Repeated evaluation of the same (canonical form, subset identity, fold count)
returns the memoized result; the cache is safe for concurrent use.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .data import SubsetView, kfold_plan
from .metrics import accuracy, auroc
from .operators import DEFAULT_REGISTRY, make_estimator
from .pipeline import Individual, OperatorRegistry, canonical_form, pipeline_length
from .rng import RngStream

__all__ = ["EvalOutcome", "EvalResult", "EvaluationCache", "EvaluationTimeout", "evaluate"]


class EvalOutcome(Enum):
    OK = "ok"
    FAILED = "failed"
    TIMED_OUT = "timed_out"


class EvaluationTimeout(Exception):
    """Raised inside fitters when the cooperative deadline has passed."""


@dataclass(frozen=True)
class EvalResult:
    score: Optional[float]  # mean CV accuracy
    length: int
    auroc: Optional[float]
    wall_time: float
    outcome: EvalOutcome
    detail: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.outcome is EvalOutcome.OK


class EvaluationCache:
    """Thread-safe memo keyed by (canonical form, subset token, folds)."""

    def __init__(self):
        self._store: dict = {}
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            return self._store.get(key)

    def put(self, key, value: EvalResult):
        with self._lock:
            self._store.setdefault(key, value)

    def __len__(self) -> int:
        with self._lock:
            return len(self._store)


def _deadline_checker(timeout_secs: Optional[float]):
    if timeout_secs is None:
        return None
    deadline = time.perf_counter() + timeout_secs

    def cancel():
        if time.perf_counter() > deadline:
            raise EvaluationTimeout()

    return cancel


def evaluate(
    individual: Individual,
    subset: SubsetView,
    folds: int,
    timeout_secs: Optional[float],
    rng: RngStream,
    registry: OperatorRegistry = DEFAULT_REGISTRY,
    cache: Optional[EvaluationCache] = None,
) -> EvalResult:
    """Score one pipeline on a stratified subset with `folds`-fold CV.

    Deterministic given (tree, subset, folds, rng); the rng only shapes the
    fold plan, so every pipeline evaluated with the same stream competes on
    identical folds.
    """
    tree = individual.tree
    text = canonical_form(tree)
    key = (text, subset.token, folds)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit

    length = pipeline_length(tree)
    cancel = _deadline_checker(timeout_secs)
    started = time.perf_counter()
    outcome = EvalOutcome.OK
    detail = None
    accs: list[float] = []
    aucs: list[float] = []
    try:
        X, y = subset.materialize()
        n_classes = subset.source.n_classes
        plan = kfold_plan(subset, folds, rng)
        for train_idx, test_idx in plan:
            if cancel is not None:
                cancel()
            x_train, y_train = X[train_idx], y[train_idx]
            x_test, y_test = X[test_idx], y[test_idx]
            for node in tree.preprocessors:
                step = make_estimator(node, registry).fit(x_train, cancel=cancel)
                x_train = step.transform(x_train)
                x_test = step.transform(x_test)
            clf = make_estimator(tree.classifier, registry)
            clf.fit(x_train, y_train, n_classes, cancel=cancel)
            proba = clf.predict_proba(x_test, cancel=cancel)
            pred = np.argmax(proba, axis=1)
            accs.append(accuracy(pred, y_test))
            aucs.append(auroc(proba, y_test))
    except EvaluationTimeout:
        outcome = EvalOutcome.TIMED_OUT
    except Exception as exc:  # any fit/predict error marks the pipeline failed
        outcome = EvalOutcome.FAILED
        detail = f"{type(exc).__name__}: {exc}"

    wall = time.perf_counter() - started
    if outcome is EvalOutcome.OK:
        result = EvalResult(
            score=float(np.mean(accs)),
            length=length,
            auroc=float(np.mean(aucs)),
            wall_time=wall,
            outcome=outcome,
        )
    else:
        result = EvalResult(
            score=None, length=length, auroc=None, wall_time=wall, outcome=outcome, detail=detail
        )
    if cache is not None:
        cache.put(key, result)
    return result

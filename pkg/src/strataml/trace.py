"""Append-only run traces and their JSON-lines serialization.

A trace holds one record per evaluation plus transfer/reseed/shutdown events.
Wall-budget runs time-stamp records with measured milliseconds; generation-
budget runs are contractually byte-reproducible, so their serialized time
fields are null and analyses fall back to the deterministic evaluation
ordinal (`seq`, one evaluation = one virtual second).
"""

from __future__ import annotations

import json
from typing import Iterable, List, Optional, Tuple

from .evaluate import EvalResult

__all__ = ["RunTrace", "best_value_at"]

EVAL_FIELDS = (
    "generation",
    "layer",
    "pipeline",
    "score",
    "auroc",
    "length",
    "wall_time_ms",
    "outcome",
    "seed",
)


class RunTrace:
    """Ordered evaluation/event records for one search run."""

    def __init__(self, meta: dict, deterministic_times: bool):
        self.meta = dict(meta)
        self.meta.setdefault("type", "meta")
        self.deterministic_times = deterministic_times
        self.records: List[dict] = []
        self._seq = 0

    # -- writers ------------------------------------------------------------

    def record_eval(
        self,
        generation: int,
        layer: int,
        sample_size: int,
        pipeline: str,
        result: EvalResult,
        seed: int,
        elapsed_secs: float,
    ) -> None:
        self._seq += 1
        hide = self.deterministic_times
        self.records.append(
            {
                "type": "eval",
                "seq": self._seq,
                "generation": generation,
                "layer": layer,
                "sample_size": sample_size,
                "pipeline": pipeline,
                "score": result.score,
                "auroc": result.auroc,
                "length": result.length,
                "wall_time_ms": None if hide else round(result.wall_time * 1000.0, 3),
                "elapsed_ms": None if hide else round(elapsed_secs * 1000.0, 3),
                "outcome": result.outcome.value,
                "seed": seed,
            }
        )

    def record_transfer(self, generation: int, from_layer: int, to_layer: int, count: int) -> None:
        self.records.append(
            {
                "type": "transfer",
                "generation": generation,
                "from_layer": from_layer,
                "to_layer": to_layer,
                "count": count,
            }
        )

    def record_reseed(self, generation: int, count: int) -> None:
        self.records.append(
            {"type": "reseed", "generation": generation, "layer": 1, "count": count}
        )

    def record_shutdown(self, generation: int, layer: int) -> None:
        self.records.append({"type": "shutdown", "generation": generation, "layer": layer})

    # -- readers ------------------------------------------------------------

    def evaluations(self, outcome: Optional[str] = None) -> List[dict]:
        rows = [r for r in self.records if r["type"] == "eval"]
        if outcome is not None:
            rows = [r for r in rows if r["outcome"] == outcome]
        return rows

    def events(self, kind: str) -> List[dict]:
        return [r for r in self.records if r["type"] == kind]

    @property
    def time_axis(self) -> str:
        """'wall' when records carry measured elapsed times, else 'steps'."""
        return "steps" if self.deterministic_times else "wall"

    def record_time_secs(self, record: dict) -> float:
        if self.time_axis == "wall":
            return record["elapsed_ms"] / 1000.0
        return float(record["seq"])

    def duration_secs(self) -> float:
        rows = self.evaluations()
        if not rows:
            return 0.0
        return self.record_time_secs(rows[-1])

    def top_layer(self) -> int:
        layers = self.meta.get("layers")
        if layers is not None:
            return int(layers)
        return max((r["layer"] for r in self.evaluations()), default=1)

    def best_so_far(self, metric: str = "auroc", scope: str = "any") -> List[Tuple[float, float]]:
        """Running-maximum step curve [(t_seconds, best metric)] over successful
        evaluations; non-decreasing by construction.

        scope="any" (the default) is the internal-score reading used by the
        anytime analyses: the best evaluation seen so far on any layer.
        scope="top" restricts to top-layer records, whose scores come from the
        full data; use it when comparing final pipeline quality.
        """
        if scope == "top":
            layer: Optional[int] = self.top_layer()
        elif scope == "any":
            layer = None
        else:
            raise ValueError(f"unknown scope {scope!r}")
        curve: List[Tuple[float, float]] = []
        best = None
        for record in self.evaluations(outcome="ok"):
            if layer is not None and record["layer"] != layer:
                continue
            value = record[metric]
            if best is None or value > best:
                best = value
                curve.append((self.record_time_secs(record), best))
        return curve

    # -- serialization -------------------------------------------------------

    def to_jsonl(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps(self.meta) + "\n")
            for record in self.records:
                fh.write(json.dumps(record) + "\n")

    @classmethod
    def from_jsonl(cls, path: str) -> "RunTrace":
        with open(path) as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines or lines[0].get("type") != "meta":
            raise ValueError(f"{path}: first line must be the meta record")
        meta = lines[0]
        trace = cls(meta, deterministic_times=meta.get("mode") == "generations")
        trace.records = lines[1:]
        trace._seq = sum(1 for r in trace.records if r["type"] == "eval")
        return trace


def best_value_at(curve: Iterable[Tuple[float, float]], t: float, default: float = 0.0) -> float:
    """Value of a best-so-far step curve at time t (default before any point)."""
    value = default
    for when, best in curve:
        if when > t:
            break
        value = best
    return value

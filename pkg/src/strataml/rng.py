"""Labeled, reproducible random-number streams.

A stream is identified by (seed, label); equal identities always produce
equal draw sequences, independent of how many other streams were used in
between. Child streams are derived by extending the label, which lets the
search engine hand out independent substreams per generation/layer/purpose
and stay deterministic even when work is memoized or runs concurrently.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream"]


def _label_key(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class RngStream:
    """Immutable handle for a named random stream.

    ``generator()`` returns a fresh ``numpy.random.Generator`` seeded from
    (seed, label); calling it twice yields two generators that produce the
    same sequence.
    """

    seed: int
    label: str = "root"

    def child(self, suffix: str) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{suffix}")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, _label_key(self.label)])
        )

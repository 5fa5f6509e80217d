"""Kernel backend selection.

The compiled extension (`strataml.kernels._fast`) is preferred when it
imported successfully; otherwise the numpy fallback (`kernels.pure`) is used.
Set STRATAML_BACKEND=pure or =compiled to force one (forcing `compiled`
raises if the extension is unavailable).
"""

from __future__ import annotations

import os

from . import pure

_impl = pure

_requested = os.environ.get("STRATAML_BACKEND", "").strip().lower()
if _requested not in ("", "pure", "compiled"):
    raise ValueError(f"STRATAML_BACKEND must be 'pure' or 'compiled', got {_requested!r}")
if _requested != "pure":
    try:
        from . import _fast

        _impl = _fast
    except ImportError:
        if _requested == "compiled":
            raise


def backend_name() -> str:
    return _impl.NAME


def get_backend(name: str):
    """Return a specific backend module (for benchmarks and parity tests)."""
    if name == "pure":
        return pure
    if name == "compiled":
        from . import _fast

        return _fast
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    names = ["pure"]
    try:
        get_backend("compiled")
        names.append("compiled")
    except ImportError:
        pass
    return names


def use_backend(name: str) -> str:
    """Switch the active backend; returns the previous backend's name."""
    global _impl
    previous = _impl.NAME
    _impl = get_backend(name)
    return previous


def scan_split(sorted_values, sorted_labels, n_classes):
    return _impl.scan_split(sorted_values, sorted_labels, n_classes)


def knn_block(train_x, train_y, train_sq, test_block, k, n_classes, distance_weighted):
    return _impl.knn_block(train_x, train_y, train_sq, test_block, k, n_classes, distance_weighted)

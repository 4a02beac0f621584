"""Shipped example experiment configs."""

from pathlib import Path

__all__ = ["example_path", "EXAMPLES"]

EXAMPLES = ("surrogate", "smoke")


def example_path(name: str) -> Path:
    """Filesystem path of a shipped config (``surrogate`` or ``smoke``)."""
    if name not in EXAMPLES:
        raise KeyError(f"unknown example config {name!r}; available: {EXAMPLES}")
    return Path(__file__).resolve().parent / f"{name}.json"

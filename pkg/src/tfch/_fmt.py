"""Shared CSV formatting: 17 significant digits, byte-stable output."""

from __future__ import annotations

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    return FLOAT_FMT % float(x)


def open_out(target):
    """Return (file object, needs_close) for a path or an open file."""
    if hasattr(target, "write"):
        return target, False
    return open(target, "w", newline=""), True

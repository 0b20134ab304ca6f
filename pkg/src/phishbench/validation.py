"""Small argument-checking helpers used across estimators and pipeline ops."""

from __future__ import annotations

from typing import Any

from .errors import DimensionMismatchError


def check_range(name: str, value: float, lo: float | None = None, hi: float | None = None,
                lo_open: bool = False, hi_open: bool = False) -> float:
    """Validate a numeric argument against an (optionally open) interval."""
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ValueError(f"{name}={value!r} out of range ({'>' if lo_open else '>='} {lo})")
    if hi is not None and (value >= hi if hi_open else value > hi):
        raise ValueError(f"{name}={value!r} out of range ({'<' if hi_open else '<='} {hi})")
    return value


def check_positive_int(name: str, value: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return value


def check_same_dim(a: Any, b: Any) -> int:
    """Both objects must expose a matching ``dim`` attribute."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return a.dim


def check_fitted(estimator: Any, attr: str) -> None:
    if getattr(estimator, attr, None) is None:
        raise ValueError(f"{type(estimator).__name__} is not fitted (missing {attr})")

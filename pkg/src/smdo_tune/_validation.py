"""Input checking helpers shared by the modules and the estimator."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """A scenario, plant or optimizer setting violates its invariants."""


def check_finite(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name}: expected a number, got {value!r}") from None
    if not math.isfinite(value):
        raise ConfigurationError(f"{name}: must be finite, got {value!r}")
    return value


def check_positive(value, name: str) -> float:
    value = check_finite(value, name)
    if value <= 0:
        raise ConfigurationError(f"{name}: must be > 0, got {value!r}")
    return value


def check_coefficients(values: Iterable, name: str) -> tuple[float, ...]:
    """Return a non-empty tuple of finite floats."""
    if isinstance(values, (str, bytes)):
        raise ConfigurationError(f"{name}: expected a list of numbers")
    try:
        items = list(values)
    except TypeError:
        raise ConfigurationError(f"{name}: expected a list of numbers") from None
    if not items:
        raise ConfigurationError(f"{name}: must not be empty")
    return tuple(check_finite(v, f"{name}[{i}]") for i, v in enumerate(items))


def check_signal(values, name: str = "input") -> np.ndarray:
    """1-D float array with every sample finite."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name}: expected a 1-D sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"{name}: non-finite sample at index {bad}")
    return arr


def steps_in_horizon(horizon: float, dt: float) -> int:
    """Number of steps N with N * dt == horizon; raises if not an integer multiple."""
    horizon = check_positive(horizon, "horizon")
    dt = check_positive(dt, "dt")
    n = round(horizon / dt)
    if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigurationError(
            f"horizon {horizon} is not a positive integer multiple of dt {dt}"
        )
    return n


def check_bounds(bounds: Sequence, name: str) -> tuple[float, float]:
    if len(bounds) != 2:
        raise ConfigurationError(f"{name}: expected [low, high]")
    lo = check_finite(bounds[0], f"{name}[0]")
    hi = check_finite(bounds[1], f"{name}[1]")
    if lo > hi:
        raise ConfigurationError(f"{name}: low {lo} exceeds high {hi}")
    return lo, hi

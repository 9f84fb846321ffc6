"""Error integrals, the weighted two-loop cost and the relative J index."""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ._validation import ConfigurationError
from .simulation import SimulationTrace

if TYPE_CHECKING:
    from .scenarios import Scenario

__all__ = [
    "MetricKind",
    "WeightMode",
    "CostSpec",
    "Evaluation",
    "DegenerateBaselineError",
    "metric",
    "loop_metrics",
    "combine",
    "evaluate",
    "j_index",
]


class MetricKind(str, enum.Enum):
    ISE = "ISE"
    IAE = "IAE"
    ITAE = "ITAE"
    MSE = "MSE"


class WeightMode(str, enum.Enum):
    FIXED = "fixed"
    RANDOM = "per-iteration-random"


class DegenerateBaselineError(ValueError):
    pass


@dataclass(frozen=True)
class CostSpec:
    metrics: tuple[MetricKind, ...] = (MetricKind.ITAE, MetricKind.ITAE)
    weights: tuple[float, ...] = (0.5, 0.5)
    weight_mode: WeightMode = WeightMode.FIXED

    def __post_init__(self):
        try:
            metrics = tuple(MetricKind(m) for m in self.metrics)
            mode = WeightMode(self.weight_mode)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        weights = tuple(float(w) for w in self.weights)
        if not metrics:
            raise ConfigurationError("cost needs at least one metric")
        if len(weights) != len(metrics):
            raise ConfigurationError("cost weights and metrics must have equal length")
        for w in weights:
            if not 0.0 <= w <= 1.0:
                raise ConfigurationError(f"cost weights must lie in [0, 1], got {w}")
        object.__setattr__(self, "metrics", metrics)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "weight_mode", mode)

    def to_dict(self) -> dict:
        return {
            "metrics": [m.value for m in self.metrics],
            "weights": list(self.weights),
            "weight_mode": self.weight_mode.value,
        }


def metric(e, t, kind: MetricKind | str, dt: float | None = None) -> float:
    """Left-point rectangle integral of the error signal.

    ``dt`` defaults to the spacing of ``t``. MSE is the plain mean of ``e**2``
    over the samples and ignores both ``t`` and ``dt``.
    """
    kind = MetricKind(kind)
    e = np.asarray(e, dtype=float)
    t = np.asarray(t, dtype=float)
    if e.size == 0:
        raise ValueError("metric of an empty error sequence")
    if e.shape != t.shape:
        raise ValueError(f"error and time lengths differ: {e.shape} vs {t.shape}")
    if kind is MetricKind.MSE:
        return float(np.mean(e * e))
    if dt is None:
        if t.size < 2:
            raise ValueError("dt is required for a single-sample sequence")
        dt = float(t[1] - t[0])
    if kind is MetricKind.ISE:
        return float(np.sum(e * e) * dt)
    if kind is MetricKind.IAE:
        return float(np.sum(np.abs(e)) * dt)
    return float(np.sum(t * np.abs(e)) * dt)


def loop_metrics(trace: SimulationTrace, kinds: Sequence[MetricKind]) -> list[float]:
    if trace.diverged:
        return [math.inf] * trace.n_loops
    return [metric(trace.e[i], trace.t, kinds[i], trace.dt) for i in range(trace.n_loops)]


def combine(e1: float, e2: float, w1: float, w2: float) -> float:
    """Weighted sum ``w1*e1 + w2*e2``; a zero weight drops its term entirely."""
    return (w1 * e1 if w1 else 0.0) + (w2 * e2 if w2 else 0.0)


def _weighted(costs: Sequence[float], weights: Sequence[float]) -> float:
    if len(costs) == 1:
        return weights[0] * costs[0] if weights[0] else 0.0
    return combine(costs[0], costs[1], weights[0], weights[1])


@dataclass(frozen=True, eq=False)
class Evaluation:
    cost: float
    loop_costs: tuple[float, ...]
    trace: SimulationTrace
    diverged: bool


def evaluate(
    scenario: "Scenario",
    gains: Sequence,
    weights: Sequence[float] | None = None,
    *,
    ci: bool | None = None,
) -> Evaluation:
    """Simulate ``scenario`` with per-loop ``(kp, ki)`` gains and score it.

    A diverged simulation scores ``inf`` instead of raising so that the
    optimizer can simply reject the candidate.
    """
    weights = scenario.cost.weights if weights is None else tuple(weights)
    trace = scenario.simulate(gains, ci=ci)
    costs = loop_metrics(trace, scenario.cost.metrics)
    cost = math.inf if trace.diverged else _weighted(costs, weights)
    return Evaluation(cost, tuple(costs), trace, trace.diverged)


def j_index(
    candidate: SimulationTrace,
    baseline: SimulationTrace,
    weights: Sequence[float],
    kinds: Sequence[MetricKind],
) -> float:
    """Weighted mean of per-loop metric ratios candidate / baseline.

    Values below 1 mean the candidate beats the baseline.
    """
    if candidate.n_loops != baseline.n_loops:
        raise ValueError("candidate and baseline traces have different loop counts")
    if baseline.diverged:
        raise DegenerateBaselineError("degenerate baseline: baseline simulation diverged")
    if any(w < 0 for w in weights) or not math.isclose(math.fsum(weights), 1.0):
        raise ValueError(f"loop weights must be >= 0 and sum to 1, got {list(weights)}")
    base = loop_metrics(baseline, kinds)
    cand = loop_metrics(candidate, kinds)
    total = 0.0
    for w, c, b in zip(weights, cand, base):
        if b == 0.0:
            raise DegenerateBaselineError("degenerate baseline: baseline metric is zero")
        if w:
            total += w * (c / b)
    return total

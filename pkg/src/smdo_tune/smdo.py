"""Stochastic multi-parameter divergence optimization (SMDO).

Each iteration visits the parameters one at a time. A component is first
nudged forward by ``step * xi`` with ``xi ~ U[0, 1]``; if that does not
strictly lower the cost, a fresh ``xi`` is drawn and the component is nudged
backward instead. Only strict improvements are kept, so under fixed cost
weights the incumbent cost never increases.

The objective is any callable ``objective(values, weights) -> float``. In the
per-iteration-random weight mode new weights are drawn at the start of each
iteration and the incumbent is re-scored under them before any test.
"""

from __future__ import annotations

import enum
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ._validation import ConfigurationError, check_finite
from .objective import WeightMode

__all__ = [
    "Outcome",
    "ParameterVector",
    "OptimizerConfig",
    "OptimizerState",
    "Move",
    "IterationRecord",
    "OptimizeResult",
    "forward_test",
    "backward_test",
    "iterate",
    "run",
    "minimize",
]

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray, "tuple[float, ...]"], float]


class Outcome(str, enum.Enum):
    FORWARD = "accepted-forward"
    BACKWARD = "accepted-backward"
    REJECTED = "rejected"


@dataclass
class ParameterVector:
    """Current values with per-component step scales and box bounds."""

    values: np.ndarray
    steps: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        self.steps = np.array(self.steps, dtype=float)
        self.lower = np.array(self.lower, dtype=float)
        self.upper = np.array(self.upper, dtype=float)
        n = self.values.shape
        if len(n) != 1 or n[0] == 0:
            raise ConfigurationError("parameter vector must be a non-empty 1-D array")
        for name in ("steps", "lower", "upper"):
            if getattr(self, name).shape != n:
                raise ConfigurationError(f"{name} length differs from values length")
        if not np.all(np.isfinite(self.values)) or not np.all(np.isfinite(self.steps)):
            raise ConfigurationError("parameter values and steps must be finite")
        if np.any(self.steps <= 0):
            raise ConfigurationError("step scales must be > 0")
        if np.any(self.lower > self.upper):
            raise ConfigurationError("lower bound exceeds upper bound")
        if np.any(self.values < self.lower) or np.any(self.values > self.upper):
            raise ConfigurationError("initial values lie outside their bounds")

    def __len__(self) -> int:
        return self.values.shape[0]

    def moved(self, component: int, delta: float) -> np.ndarray:
        """Copy of the values with one component shifted and clamped to its bounds."""
        out = self.values.copy()
        out[component] = min(max(out[component] + delta, self.lower[component]), self.upper[component])
        return out

    @classmethod
    def within(cls, lower, upper, *, values=None, steps=None) -> "ParameterVector":
        """Midpoint start and a tenth of the box width as step, unless given."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if values is None:
            values = (lower + upper) / 2.0
        if steps is None:
            steps = (upper - lower) / 10.0
        return cls(values, steps, lower, upper)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 100
    target_cost: float | None = None
    seed: int | None = 0
    step_decay: float = 1.0
    weight_mode: WeightMode = WeightMode.FIXED
    step_scales: tuple[float, ...] | None = None

    def __post_init__(self):
        if isinstance(self.max_iterations, bool) or int(self.max_iterations) != self.max_iterations:
            raise ConfigurationError("max_iterations must be an integer")
        object.__setattr__(self, "max_iterations", int(self.max_iterations))
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        decay = check_finite(self.step_decay, "step_decay")
        if not 0.0 < decay <= 1.0:
            raise ConfigurationError(f"step_decay must lie in (0, 1], got {decay}")
        object.__setattr__(self, "step_decay", decay)
        if self.target_cost is not None:
            target = float(self.target_cost)
            if math.isnan(target):
                raise ConfigurationError("target_cost must not be NaN")
            object.__setattr__(self, "target_cost", target)
        if self.seed is not None:
            if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
                raise ConfigurationError("seed must be a non-negative integer")
            object.__setattr__(self, "seed", int(self.seed))
        try:
            object.__setattr__(self, "weight_mode", WeightMode(self.weight_mode))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if self.step_scales is not None:
            scales = tuple(check_finite(s, "step_scales") for s in self.step_scales)
            if any(s <= 0 for s in scales):
                raise ConfigurationError("step_scales must be > 0")
            object.__setattr__(self, "step_scales", scales)

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "target_cost": self.target_cost,
            "seed": self.seed,
            "step_decay": self.step_decay,
            "step_scales": None if self.step_scales is None else list(self.step_scales),
        }


@dataclass(frozen=True)
class Move:
    """One accepted divergence step, kept so it can be re-checked later."""

    component: int
    outcome: Outcome
    xi: float
    before: tuple[float, ...]
    after: tuple[float, ...]
    cost_before: float
    cost_after: float


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    outcomes: tuple[Outcome, ...]
    xis: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]
    cost_start: float
    cost: float
    values: tuple[float, ...]
    moves: tuple[Move, ...]


@dataclass
class OptimizerState:
    params: ParameterVector
    cost: float
    weights: tuple[float, ...]
    iteration: int = 0
    history: list[IterationRecord] = field(default_factory=list)
    n_evaluations: int = 0
    n_diverged: int = 0
    initial_cost: float = math.nan
    initial_weights: tuple[float, ...] = ()

    @classmethod
    def start(cls, params: ParameterVector, objective: Objective, weights=(1.0,)) -> "OptimizerState":
        state = cls(params, math.inf, tuple(float(w) for w in weights))
        state.cost = state.initial_cost = state.score(params.values, objective)
        state.initial_weights = state.weights
        return state

    def score(self, values: np.ndarray, objective: Objective) -> float:
        """Objective value with NaN and arithmetic failures mapped to ``inf``."""
        self.n_evaluations += 1
        try:
            cost = float(objective(values, self.weights))
        except (ArithmeticError, ValueError) as exc:
            log.debug("objective failed at %s: %s", values, exc)
            cost = math.inf
        if not cost < math.inf:
            self.n_diverged += 1
            return math.inf
        return cost


def _divergence_test(state, component, xi, objective, sign) -> Move | None:
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi must lie in [0, 1], got {xi}")
    params = state.params
    candidate = params.moved(component, sign * params.steps[component] * xi)
    cost = state.score(candidate, objective)
    if not cost < state.cost:
        return None
    move = Move(
        component,
        Outcome.FORWARD if sign > 0 else Outcome.BACKWARD,
        xi,
        tuple(params.values.tolist()),
        tuple(candidate.tolist()),
        state.cost,
        cost,
    )
    params.values = candidate
    state.cost = cost
    return move


def forward_test(state: OptimizerState, component: int, xi: float, objective: Objective) -> Move | None:
    """Try ``p_v + step_v * xi``; keep it only on a strict cost decrease.

    Returns the accepted move, or ``None`` with ``state`` untouched.
    """
    return _divergence_test(state, component, xi, objective, +1.0)


def backward_test(state: OptimizerState, component: int, xi: float, objective: Objective) -> Move | None:
    """Mirror of :func:`forward_test` with ``p_v - step_v * xi``."""
    return _divergence_test(state, component, xi, objective, -1.0)


def iterate(
    state: OptimizerState,
    objective: Objective,
    rng,
    *,
    weight_mode: WeightMode | str = WeightMode.FIXED,
    step_decay: float = 1.0,
) -> IterationRecord:
    """Run one sweep over every component and append its record to the history.

    ``rng`` only needs a ``random()`` method returning floats in ``[0, 1]``.
    """
    if WeightMode(weight_mode) is WeightMode.RANDOM:
        state.weights = tuple(float(rng.random()) for _ in state.weights)
        state.cost = state.score(state.params.values, objective)
    cost_start = state.cost
    outcomes, xis, moves = [], [], []
    for v in range(len(state.params)):
        xi_f = float(rng.random())
        move = forward_test(state, v, xi_f, objective)
        if move is not None:
            outcomes.append(Outcome.FORWARD)
            xis.append((xi_f,))
            moves.append(move)
            continue
        xi_b = float(rng.random())
        move = backward_test(state, v, xi_b, objective)
        xis.append((xi_f, xi_b))
        if move is None:
            outcomes.append(Outcome.REJECTED)
        else:
            outcomes.append(Outcome.BACKWARD)
            moves.append(move)
    if step_decay != 1.0:
        state.params.steps = state.params.steps * step_decay
    state.iteration += 1
    record = IterationRecord(
        iteration=state.iteration,
        outcomes=tuple(outcomes),
        xis=tuple(xis),
        weights=state.weights,
        cost_start=cost_start,
        cost=state.cost,
        values=tuple(state.params.values.tolist()),
        moves=tuple(moves),
    )
    state.history.append(record)
    return record


def _target_reached(state: OptimizerState, target: float | None) -> bool:
    return target is not None and state.cost < target


def run(
    params: ParameterVector,
    objective: Objective,
    config: OptimizerConfig,
    *,
    weights: Sequence[float] = (1.0,),
    rng=None,
) -> OptimizerState:
    """Evaluate the start point, then iterate until the budget or the target cost.

    Under fixed weights the final incumbent is also the best point seen, since
    only strict improvements are ever accepted.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = OptimizerState.start(params, objective, weights)
    while state.iteration < config.max_iterations and not _target_reached(state, config.target_cost):
        iterate(
            state,
            objective,
            rng,
            weight_mode=config.weight_mode,
            step_decay=config.step_decay,
        )
        log.debug("iteration %d cost %.6g", state.iteration, state.cost)
    return state


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    x: np.ndarray
    cost: float
    n_iter: int
    n_evaluations: int
    history: list[IterationRecord]
    target_reached: bool


def minimize(
    func: Callable[[np.ndarray], float],
    x0,
    steps,
    bounds,
    *,
    max_iterations: int = 100,
    target_cost: float | None = None,
    step_decay: float = 1.0,
    seed: int | None = 0,
    rng=None,
) -> OptimizeResult:
    """Minimize a plain ``func(x)`` inside the box ``bounds = [(lo, hi), ...]``."""
    bounds = np.asarray(bounds, dtype=float)
    params = ParameterVector(x0, steps, bounds[:, 0], bounds[:, 1])
    config = OptimizerConfig(
        max_iterations=max_iterations,
        target_cost=target_cost,
        seed=seed,
        step_decay=step_decay,
    )
    state = run(params, lambda x, _w: func(x), config, rng=rng)
    return OptimizeResult(
        x=state.params.values.copy(),
        cost=state.cost,
        n_iter=state.iteration,
        n_evaluations=state.n_evaluations,
        history=state.history,
        target_reached=_target_reached(state, config.target_cost),
    )

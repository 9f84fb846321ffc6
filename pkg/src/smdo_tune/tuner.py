"""Estimator-style front end for tuning the PI loops of a scenario."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigurationError
from .objective import Evaluation, evaluate, loop_metrics
from .scenarios import Scenario, split_gains
from .simulation import SimulationTrace
from .smdo import OptimizerConfig, run

__all__ = ["SmdoTuner", "check_scenario"]


def check_scenario(scenario) -> Scenario:
    if not isinstance(scenario, Scenario):
        raise TypeError(f"expected a Scenario, got {type(scenario).__name__}")
    return scenario


class SmdoTuner(BaseEstimator):
    """Tune every ``(kp, ki)`` pair of a scenario by SMDO.

    Parameters left as ``None`` fall back to the scenario's own settings.

    Parameters
    ----------
    max_iter : int, optional
        Iteration budget.
    target_cost : float, optional
        Stop as soon as the incumbent cost drops below this value.
    step_decay : float, optional
        Factor in (0, 1] applied to every step scale after each iteration.
    step_scales : sequence of float, optional
        Initial step per parameter, in ``[kp1, ki1, kp2, ki2, ...]`` order.
    weights : sequence of float, optional
        Loop weights of the cost; ignored in the random weight mode.
    weight_mode : {"fixed", "per-iteration-random"}, optional
    ci : bool, optional
        Force the conditional-integration gate on or off in every loop.
    random_state : int, optional
        Seed of the optimizer's random stream.

    Attributes
    ----------
    gains_ : list of PiGains
    cost_ : float
        Incumbent cost under the weights of the last iteration.
    initial_cost_ : float
        Cost of the starting gains under the scenario weights.
    history_ : list of IterationRecord
    n_iter_ : int
    n_evaluations_ : int
    n_diverged_ : int
        Candidates whose simulation blew up.
    target_reached_ : bool
    """

    def __init__(
        self,
        max_iter=None,
        target_cost=None,
        step_decay=None,
        step_scales=None,
        weights=None,
        weight_mode=None,
        ci=None,
        random_state=None,
    ):
        self.max_iter = max_iter
        self.target_cost = target_cost
        self.step_decay = step_decay
        self.step_scales = step_scales
        self.weights = weights
        self.weight_mode = weight_mode
        self.ci = ci
        self.random_state = random_state

    def _resolve_config(self, scenario: Scenario) -> OptimizerConfig:
        overrides = {
            "max_iterations": self.max_iter,
            "target_cost": self.target_cost,
            "step_decay": self.step_decay,
            "step_scales": None if self.step_scales is None else tuple(self.step_scales),
            "weight_mode": self.weight_mode,
            "seed": self.random_state,
        }
        base = replace(scenario.optimizer, weight_mode=scenario.cost.weight_mode)
        return replace(base, **{k: v for k, v in overrides.items() if v is not None})

    def fit(self, scenario: Scenario, y=None):
        scenario = check_scenario(scenario)
        config = self._resolve_config(scenario)
        if config.step_scales is not None and len(config.step_scales) != 2 * scenario.n_loops:
            raise ConfigurationError(f"step_scales: expected {2 * scenario.n_loops} entries")
        scenario = replace(scenario, optimizer=config)
        if self.weights is not None:
            scenario = replace(scenario, cost=replace(scenario.cost, weights=tuple(self.weights)))
        ci = self.ci

        def objective(values, weights):
            return evaluate(scenario, values, weights, ci=ci).cost

        state = run(scenario.parameter_vector(), objective, config, weights=scenario.cost.weights)
        self.scenario_ = scenario
        self.gains_ = split_gains(state.params.values, scenario.n_loops)
        self.cost_ = state.cost
        self.initial_cost_ = state.initial_cost
        self.initial_weights_ = state.initial_weights
        self.weights_ = state.weights
        self.history_ = state.history
        self.n_iter_ = state.iteration
        self.n_evaluations_ = state.n_evaluations
        self.n_diverged_ = state.n_diverged
        self.target_reached_ = config.target_cost is not None and state.cost < config.target_cost
        return self

    @property
    def gains_vector_(self) -> np.ndarray:
        check_is_fitted(self, "gains_")
        return np.array([g for pair in self.gains_ for g in pair])

    def evaluate(self, scenario: Scenario | None = None) -> Evaluation:
        check_is_fitted(self, "gains_")
        scenario = self.scenario_ if scenario is None else check_scenario(scenario)
        return evaluate(scenario, self.gains_, self.weights_, ci=self.ci)

    def predict(self, scenario: Scenario | None = None) -> SimulationTrace:
        """Closed-loop trace of the tuned gains (on the fitted scenario by default)."""
        return self.evaluate(scenario).trace

    def score(self, scenario: Scenario | None = None, y=None) -> float:
        """Negated cost, so that larger is better."""
        return -self.evaluate(scenario).cost

    def loop_metrics(self, scenario: Scenario | None = None) -> list[float]:
        ev = self.evaluate(scenario)
        sc = self.scenario_ if scenario is None else scenario
        return loop_metrics(ev.trace, sc.cost.metrics)

import math

import numpy as np
import pytest

from smdo_tune import (
    ConfigurationError,
    OptimizerConfig,
    OptimizerState,
    Outcome,
    ParameterVector,
    backward_test,
    forward_test,
    iterate,
    minimize,
)
from smdo_tune.objective import WeightMode
from smdo_tune.smdo import run

from .oracles import FixedXi, quadratic


def state_1d(p, lo=-10.0, hi=10.0, func=lambda x: x[0] ** 2):
    params = ParameterVector([p], [1.0], [lo], [hi])
    obj = lambda x, w: func(x)  # noqa: E731
    return OptimizerState.start(params, obj), obj


class TestForward:
    def test_rejects_uphill(self):
        state, obj = state_1d(2.0)
        assert forward_test(state, 0, 0.5, obj) is None
        assert state.params.values.tolist() == [2.0]
        assert state.cost == 4.0

    def test_accepts_downhill(self):
        state, obj = state_1d(2.0, 0.0, 10.0, func=lambda x: -x[0])
        move = forward_test(state, 0, 0.5, obj)
        assert move.outcome is Outcome.FORWARD
        assert state.params.values.tolist() == [2.5]
        assert state.cost == -2.5

    def test_candidate_clamped_before_evaluation(self):
        seen = []
        params = ParameterVector([9.8], [1.0], [0.0], [10.0])

        def obj(x, w):
            seen.append(x[0])
            return -x[0]

        state = OptimizerState.start(params, obj)
        forward_test(state, 0, 0.5, obj)
        assert seen[-1] == 10.0
        assert state.params.values.tolist() == [10.0]

    def test_failing_objective_never_accepted(self):
        params = ParameterVector([1.0], [1.0], [-10.0], [10.0])
        calls = iter([1.0, math.nan])
        state = OptimizerState.start(params, lambda x, w: next(calls))
        assert forward_test(state, 0, 0.5, lambda x, w: next(calls)) is None
        assert state.n_diverged == 1

    def test_xi_range_checked(self):
        state, obj = state_1d(2.0)
        with pytest.raises(ValueError, match="xi"):
            forward_test(state, 0, 1.5, obj)


class TestBackward:
    def test_accepts_downhill(self):
        state, obj = state_1d(2.0)
        move = backward_test(state, 0, 0.5, obj)
        assert move.outcome is Outcome.BACKWARD
        assert state.params.values.tolist() == [1.5]
        assert state.cost == 2.25

    @pytest.mark.parametrize("xi", [0.1, 0.5, 1.0])
    def test_rejects_at_optimum(self, xi):
        state, obj = state_1d(0.0)
        assert backward_test(state, 0, xi, obj) is None
        assert state.params.values.tolist() == [0.0]

    def test_clamped_at_lower_bound_rejected(self):
        state, obj = state_1d(-5.0, lo=-5.0, func=lambda x: x[0] + 10)
        assert backward_test(state, 0, 0.7, obj) is None
        assert state.params.values.tolist() == [-5.0]


class TestIterate:
    def test_hand_worked_sweep(self):
        params = ParameterVector([2.0, 2.0], [1.0, 1.0], [-10, -10], [10, 10])
        obj = lambda x, w: x[0] ** 2 + x[1] ** 2  # noqa: E731
        state = OptimizerState.start(params, obj)
        record = iterate(state, obj, FixedXi(0.5))
        assert record.outcomes == (Outcome.BACKWARD, Outcome.BACKWARD)
        assert state.params.values.tolist() == [1.5, 1.5]
        assert state.cost == 4.5
        assert [m.cost_after for m in record.moves] == [6.25, 4.5]
        assert record.xis == ((0.5, 0.5), (0.5, 0.5))

    def test_zero_xi_changes_nothing(self):
        params = ParameterVector([2.0, -1.0], [1.0, 1.0], [-10, -10], [10, 10])
        obj = lambda x, w: quadratic(x)  # noqa: E731
        state = OptimizerState.start(params, obj)
        record = iterate(state, obj, FixedXi(0.0))
        assert record.outcomes == (Outcome.REJECTED, Outcome.REJECTED)
        assert state.params.values.tolist() == [2.0, -1.0]

    def test_forward_accept_skips_backward(self):
        params = ParameterVector([0.0, 0.0], [1.0, 1.0], [-10, -10], [10, 10])
        obj = lambda x, w: quadratic(x)  # noqa: E731
        state = OptimizerState.start(params, obj)
        record = iterate(state, obj, FixedXi(0.5))
        assert record.outcomes[0] is Outcome.FORWARD
        assert record.xis[0] == (0.5,)

    def test_same_seed_same_record(self):
        def one():
            params = ParameterVector([3.0, 3.0], [1.0, 1.0], [-10, -10], [10, 10])
            obj = lambda x, w: quadratic(x)  # noqa: E731
            state = OptimizerState.start(params, obj)
            return iterate(state, obj, np.random.default_rng(7))

        assert one() == one()

    def test_step_decay(self):
        params = ParameterVector([3.0], [2.0], [-10], [10])
        obj = lambda x, w: x[0] ** 2  # noqa: E731
        state = OptimizerState.start(params, obj)
        iterate(state, obj, FixedXi(0.5), step_decay=0.5)
        assert state.params.steps.tolist() == [1.0]

    def test_random_weights_redrawn_and_incumbent_rescored(self):
        params = ParameterVector([1.0, 1.0], [1.0, 1.0], [-10, -10], [10, 10])
        obj = lambda x, w: w[0] * x[0] ** 2 + w[1] * x[1] ** 2  # noqa: E731
        state = OptimizerState.start(params, obj, weights=(0.5, 0.5))
        rng = np.random.default_rng(3)
        for _ in range(10):
            record = iterate(state, obj, rng, weight_mode=WeightMode.RANDOM)
            w = record.weights
            start_vals = record.moves[0].before if record.moves else record.values
            assert record.cost_start == pytest.approx(obj(np.array(start_vals), w), abs=0)
            costs = [record.cost_start] + [m.cost_after for m in record.moves]
            assert all(b < a for a, b in zip(costs, costs[1:]))


class TestOptimize:
    def test_quadratic_converges(self):
        res = minimize(quadratic, [0, 0], [1, 1], [(-10, 10)] * 2, max_iterations=500, step_decay=0.95, seed=3)
        assert res.cost < 1e-2
        assert np.linalg.norm(res.x - [1, -2]) < 0.1

    def test_budget_of_one(self):
        res = minimize(quadratic, [0, 0], [1, 1], [(-10, 10)] * 2, max_iterations=1)
        assert res.n_iter == 1
        assert len(res.history) == 1

    def test_zero_budget_forbidden(self):
        with pytest.raises(ConfigurationError):
            OptimizerConfig(max_iterations=0)

    def test_infinite_target_stops_immediately(self):
        res = minimize(quadratic, [0, 0], [1, 1], [(-10, 10)] * 2, target_cost=math.inf)
        assert res.n_iter == 0
        assert res.n_evaluations == 1
        assert res.target_reached

    def test_target_stop(self):
        res = minimize(quadratic, [0, 0], [1, 1], [(-10, 10)] * 2, max_iterations=500, target_cost=0.5, seed=1)
        assert res.cost < 0.5
        assert res.history[-2].cost >= 0.5

    def test_every_candidate_in_bounds(self):
        seen = []

        def f(x):
            seen.append(x.copy())
            return quadratic(x)

        minimize(f, [0.5, 0.5], [3, 3], [(0, 1), (-1, 1)], max_iterations=50, seed=0)
        seen = np.array(seen)
        assert np.all(seen[:, 0] >= 0) and np.all(seen[:, 0] <= 1)
        assert np.all(seen[:, 1] >= -1) and np.all(seen[:, 1] <= 1)

    def test_seed_determinism(self):
        a = minimize(quadratic, [0, 0], [1, 1], [(-10, 10)] * 2, seed=11)
        b = minimize(quadratic, [0, 0], [1, 1], [(-10, 10)] * 2, seed=11)
        assert a.history == b.history

    def test_run_with_random_weight_mode_returns_final_incumbent(self):
        params = ParameterVector([4.0, 4.0], [1.0, 1.0], [-10, -10], [10, 10])
        obj = lambda x, w: w[0] * x[0] ** 2 + w[1] * x[1] ** 2  # noqa: E731
        config = OptimizerConfig(max_iterations=20, weight_mode=WeightMode.RANDOM, seed=5)
        state = run(params, obj, config, weights=(0.5, 0.5))
        assert state.params.values.tolist() == list(state.history[-1].values)
        assert state.cost == state.history[-1].cost


class TestParameterVector:
    def test_rejects_value_outside_bounds(self):
        with pytest.raises(ConfigurationError, match="outside"):
            ParameterVector([11.0], [1.0], [0.0], [10.0])

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ConfigurationError, match="> 0"):
            ParameterVector([1.0], [0.0], [0.0], [10.0])

    def test_default_midpoint(self):
        pv = ParameterVector.within([0, -4], [10, 4])
        assert pv.values.tolist() == [5.0, 0.0]
        assert pv.steps.tolist() == [1.0, 0.8]

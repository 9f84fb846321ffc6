import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from smdo_tune import SmdoTuner, builtin_scenarios, minimize

from .oracles import quadratic


@pytest.fixture(scope="module")
def first_order():
    return builtin_scenarios()["first-order"]


def test_params_round_trip():
    tuner = SmdoTuner(max_iter=7, random_state=3, ci=True)
    params = tuner.get_params()
    assert params["max_iter"] == 7 and params["random_state"] == 3 and params["ci"] is True
    twin = clone(tuner)
    assert twin.get_params() == params
    twin.set_params(max_iter=9)
    assert twin.max_iter == 9 and tuner.max_iter == 7


def test_unfitted():
    with pytest.raises(NotFittedError):
        SmdoTuner().predict()


def test_rejects_non_scenario():
    with pytest.raises(TypeError, match="Scenario"):
        SmdoTuner().fit({"plant": {}})


def test_fit_attributes(first_order):
    tuner = SmdoTuner(max_iter=15, random_state=0).fit(first_order)
    assert tuner.n_iter_ == 15
    assert len(tuner.history_) == 15
    assert len(tuner.gains_) == 1
    assert tuner.cost_ <= tuner.initial_cost_
    assert tuner.n_evaluations_ >= 1 + 2 * 15
    assert tuner.n_evaluations_ <= 1 + 4 * 15
    assert tuner.score() == -tuner.cost_
    assert tuner.loop_metrics()[0] == tuner.cost_
    trace = tuner.predict()
    assert trace.n_loops == 1 and len(trace) == first_order.n_steps + 1
    lo, hi = first_order.loops[0].gains_bounds[0]
    assert np.all((tuner.gains_vector_ >= lo) & (tuner.gains_vector_ <= hi))


def test_deterministic(first_order):
    a = SmdoTuner(max_iter=10, random_state=4).fit(first_order)
    b = SmdoTuner(max_iter=10, random_state=4).fit(first_order)
    assert a.cost_ == b.cost_
    assert a.history_ == b.history_


def test_seed_changes_path(first_order):
    a = SmdoTuner(max_iter=10, random_state=1).fit(first_order)
    b = SmdoTuner(max_iter=10, random_state=2).fit(first_order)
    assert a.history_ != b.history_


def test_step_scales_length_checked(first_order):
    with pytest.raises(ValueError, match="step_scales"):
        SmdoTuner(max_iter=1, step_scales=[1, 1, 1]).fit(first_order)


def test_target_stops_early(first_order):
    start = SmdoTuner(max_iter=1).fit(first_order).initial_cost_
    tuner = SmdoTuner(max_iter=100, target_cost=start * 0.9).fit(first_order)
    assert tuner.target_reached_
    assert tuner.n_iter_ < 100
    assert tuner.cost_ < start * 0.9


def test_random_weight_mode():
    sc = builtin_scenarios()["surrogate-refrigeration"]
    tuner = SmdoTuner(max_iter=3, weight_mode="per-iteration-random").fit(sc)
    drawn = [rec.weights for rec in tuner.history_]
    assert len(set(drawn)) == 3
    assert all(0 <= w <= 1 for ws in drawn for w in ws)
    assert tuner.initial_weights_ == sc.cost.weights


def test_minimize_plain_quadratic():
    res = minimize(quadratic, [0, 0], [1, 1], [(-10, 10)] * 2, max_iterations=400, step_decay=0.97, seed=5)
    assert res.cost < 1e-3
    np.testing.assert_allclose(res.x, [1, -2], atol=0.05)

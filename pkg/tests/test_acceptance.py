"""End-to-end acceptance checks, one test (or group) per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest

from smdo_tune import (
    ConditionalIntegrationConfig,
    DiscreteTransferFunction,
    MetricKind,
    MimoPlant,
    Outcome,
    PiController,
    PiGains,
    ReferenceProfile,
    SmdoTuner,
    builtin_surrogate_refrigeration,
    evaluate,
    metric,
    minimize,
    open_loop_response,
    simulate_closed_loop,
)
from smdo_tune.cli import main

from .oracles import naive_metric, quadratic

criterion = pytest.mark.criterion

SURROGATE_SEEDS = range(20)
QUADRATIC_SEEDS = range(100)


# -- 1 ---------------------------------------------------------------------


@criterion(1, "first-order step response matches 1 - p^k to 1e-12 in < 1 s")
def test_simulation_oracle():
    start = time.perf_counter()
    k = np.arange(2000)
    for p in (0.5, 0.9, 0.99):
        tf = DiscreteTransferFunction((0.0, 1.0 - p), (1.0, -p))
        y = open_loop_response(tf, np.ones(2000))
        assert np.max(np.abs(y - (1.0 - p**k))) <= 1e-12, p
    assert time.perf_counter() - start < 1.0


# -- 2 ---------------------------------------------------------------------


@criterion(2, "quadratic converges near (1, -2) on 20 seeds in < 5 s")
def test_optimizer_convergence():
    start = time.perf_counter()
    for seed in range(20):
        res = minimize(
            quadratic, [0.0, 0.0], [1.0, 1.0], [(-10, 10), (-10, 10)],
            max_iterations=500, step_decay=0.95, seed=seed,
        )
        assert res.cost < 1e-2, seed
        assert np.hypot(res.x[0] - 1.0, res.x[1] + 2.0) <= 0.1, seed
    assert time.perf_counter() - start < 5.0


# -- 3 and 4 ---------------------------------------------------------------


@pytest.fixture(scope="module")
def quadratic_runs():
    return [
        minimize(quadratic, [0.0, 0.0], [1.0, 1.0], [(-10, 10), (-10, 10)], max_iterations=200, seed=s)
        for s in QUADRATIC_SEEDS
    ]


@pytest.fixture(scope="module")
def surrogate():
    return builtin_surrogate_refrigeration()


@pytest.fixture(scope="module")
def surrogate_runs(surrogate):
    return [SmdoTuner(random_state=s).fit(surrogate) for s in SURROGATE_SEEDS]


def monotonicity_violations(initial_cost, history):
    bad = 0
    previous = initial_cost
    for rec in history:
        if rec.cost_start != previous or rec.cost > rec.cost_start:
            bad += 1
        accepted = any(o is not Outcome.REJECTED for o in rec.outcomes)
        if accepted and not rec.cost < rec.cost_start:
            bad += 1
        if not accepted and rec.cost != rec.cost_start:
            bad += 1
        running = rec.cost_start
        for move in rec.moves:
            if move.cost_before != running or not move.cost_after < move.cost_before:
                bad += 1
            running = move.cost_after
        if running != rec.cost:
            bad += 1
        previous = rec.cost
    return bad


@criterion(3, "accepted-cost sequence non-increasing (100 quadratic + 20 surrogate seeds)")
def test_monotonicity_quadratic(quadratic_runs):
    for res in quadratic_runs:
        assert monotonicity_violations(quadratic([0.0, 0.0]), res.history) == 0


@criterion(3, "accepted-cost sequence non-increasing (100 quadratic + 20 surrogate seeds)")
def test_monotonicity_surrogate(surrogate_runs):
    for tuner in surrogate_runs:
        assert tuner.n_iter_ == 100
        assert monotonicity_violations(tuner.initial_cost_, tuner.history_) == 0


def soundness_violations(history, start_values, start_cost, objective):
    """Re-evaluate every accepted move from scratch and re-check the strict inequality.

    Moves are chained: each one starts where the previous accepted one ended,
    so one fresh evaluation per move (plus the start point) covers both sides
    of every inequality.
    """
    bad = 0
    values, cost = tuple(start_values), objective(np.array(start_values))
    if cost != start_cost:
        bad += 1
    for rec in history:
        for move in rec.moves:
            if move.before != values:
                bad += 1
            after = objective(np.array(move.after))
            if after != move.cost_after or not after < cost:
                bad += 1
            direction = 1 if move.outcome is Outcome.FORWARD else -1
            if not (move.after[move.component] - move.before[move.component]) * direction > 0:
                bad += 1
            expected = list(move.before)
            expected[move.component] = move.after[move.component]
            if tuple(expected) != move.after:
                bad += 1
            values, cost = move.after, after
    return bad


@criterion(4, "every accepted move re-verified as a strict improvement")
def test_soundness_quadratic(quadratic_runs):
    for res in quadratic_runs:
        assert soundness_violations(res.history, (0.0, 0.0), quadratic([0.0, 0.0]), quadratic) == 0


@criterion(4, "every accepted move re-verified as a strict improvement")
def test_soundness_surrogate(surrogate, surrogate_runs):
    weights = surrogate.cost.weights

    def objective(values):
        return evaluate(surrogate, values, weights).cost

    start = surrogate.parameter_vector().values
    for tuner in surrogate_runs:
        assert soundness_violations(tuner.history_, tuple(start.tolist()), tuner.initial_cost_, objective) == 0


# -- 5 ---------------------------------------------------------------------


@criterion(5, "CI beats no-CI on the surrogate: terminal |e1| and J, same seed and budget, < 30 s")
def test_ci_steady_state_claim(tmp_path, surrogate):
    start = time.perf_counter()
    summaries = {}
    for mode in ("on", "off"):
        out = tmp_path / f"ci_{mode}"
        assert main(["run", "--scenario", "builtin:surrogate-refrigeration", "--ci", mode, "--out", str(out)]) == 0
        summaries[mode] = json.loads((out / "summary.json").read_text())
        assert summaries[mode]["iterations"] == 100
    assert summaries["on"]["seed"] == summaries["off"]["seed"] == surrogate.optimizer.seed

    def gains_arg(mode, suffix):
        return ",".join(repr(g[k]) for g in summaries[mode]["final_gains"] for k in ("kp", "ki")) + suffix

    argv = [
        "compare", "--scenario", "builtin:surrogate-refrigeration",
        "--baseline", "5,5,5,5@noci",
        "--candidate", gains_arg("on", "@ci"),
        "--candidate", gains_arg("off", "@noci"),
        "--out", str(tmp_path),
    ]
    assert main(argv) == 0
    _, with_ci, without_ci = json.loads((tmp_path / "compare.json").read_text())["rows"]
    elapsed = time.perf_counter() - start

    e_ci = abs(with_ci["all_metrics"][0]["terminal_error"])
    e_noci = abs(without_ci["all_metrics"][0]["terminal_error"])
    print(f"terminal |e1|: CI {e_ci:.3g}  no-CI {e_noci:.3g};  J: CI {with_ci['J']:.5f}  no-CI {without_ci['J']:.5f}")
    assert e_ci < e_noci
    assert with_ci["J"] < without_ci["J"]
    assert elapsed < 30.0


# -- 6 ---------------------------------------------------------------------


@criterion(6, "PI with CI drives the first-order loop to |e| < 1e-6 within 20 time constants")
def test_zero_steady_state_error():
    p, dt, kp, ki = 0.9, 1.0, 2.0, 0.5
    b = 1.0 - p
    # (1 - p z^-1)(1 - z^-1) + b z^-1 (kp (1 - z^-1) + ki dt) in descending powers of z
    char = np.array([1.0, -(1.0 + p) + b * (kp + ki * dt), p - b * kp])
    radius = np.max(np.abs(np.roots(char)))
    assert radius < 1
    tau = -dt / math.log(radius)
    n = math.ceil(20 * tau / dt)

    plant = MimoPlant([[DiscreteTransferFunction((0.0, b), (1.0, -p), dt)]])
    ctrl = PiController(PiGains(kp, ki), dt, ci=ConditionalIntegrationConfig(True, 2.0))
    trace = simulate_closed_loop(plant, [ctrl], [ReferenceProfile.constant(1.0)], n * dt)
    assert not trace.saturated.any()
    assert abs(trace.e[0, -1]) < 1e-6
    assert np.all(np.abs(trace.e[0]) <= 2.0)  # never left the integration band


# -- 7 ---------------------------------------------------------------------


@criterion(7, "metrics equal a naive summation oracle (rel 1e-12) on 100 random traces")
def test_metric_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(1, 10_001))
        dt = float(rng.uniform(0.01, 5.0))
        e = rng.normal(scale=rng.uniform(0.1, 10), size=n)
        t = np.arange(n) * dt
        el, tl = e.tolist(), t.tolist()
        for kind in MetricKind:
            ours = metric(e, t, kind, dt)
            ref = naive_metric(el, tl, dt, kind.value)
            assert ours == pytest.approx(ref, rel=1e-12, abs=0.0), (n, kind)


# -- 8 ---------------------------------------------------------------------


@criterion(8, "run twice gives byte-identical convergence.csv and summary.json (minus wall clock)")
def test_determinism(tmp_path):
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        argv = ["run", "--scenario", "builtin:surrogate-refrigeration", "--seed", "3", "--iters", "25", "--out", str(out)]
        assert main(argv) == 0
        outs.append(out)
    a, b = outs
    assert (a / "convergence.csv").read_bytes() == (b / "convergence.csv").read_bytes()

    def stripped(path):
        lines = (path / "summary.json").read_bytes().splitlines()
        return [line for line in lines if b'"wall_clock_s"' not in line]

    assert stripped(a) == stripped(b)


# -- 9 ---------------------------------------------------------------------


@criterion(9, "full 100-iteration surrogate optimization in < 10 s")
def test_budget_realism(surrogate):
    assert surrogate.n_steps == 1200 and surrogate.dt == 1.0
    start = time.perf_counter()
    tuner = SmdoTuner(max_iter=100).fit(surrogate)
    elapsed = time.perf_counter() - start
    print(f"100 iterations, {tuner.n_evaluations_} evaluations in {elapsed:.2f} s")
    assert tuner.n_iter_ == 100
    assert elapsed < 10.0

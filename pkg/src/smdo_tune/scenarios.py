"""Scenario schema, JSON loading/dumping and the built-in fixtures.

A scenario document is a JSON object::

    {
      "name": "first-order",                    # optional
      "plant": {
        "channels": [[{"num": [0, 0.1], "den": [1, -0.9]}]],
        "output_bias": [0.0]                    # optional, one per loop
      },
      "loops": [
        {
          "gains_bounds": [[0, 10], [0, 10]],   # [kp], [ki]
          "gains_init": [1.0, 0.5],             # optional, default midpoint
          "saturation": {"min": -5, "max": 5},  # optional; null bound = unbounded
          "ci": {"enabled": true, "band": 0.5}, # optional; null band = no band
          "reference": [
            {"start": 0, "level": 1.0},
            {"start": 50, "end": 80, "start_level": 1.0, "end_level": 2.0}
          ]
        }
      ],
      "horizon_s": 200,
      "dt_s": 1,
      "cost": {"metrics": ["ITAE"], "weights": [1.0], "weight_mode": "fixed"},
      "optimizer": {"max_iterations": 100, "target_cost": null, "seed": 0,
                    "step_decay": 1.0, "step_scales": null},
      "divergence_bound": 1e9                   # optional
    }

Channel ``(i, j)`` maps input ``j`` to output ``i``; loop ``i`` measures
output ``i`` and drives input ``i``. Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._validation import (
    ConfigurationError,
    check_bounds,
    check_finite,
    check_positive,
    steps_in_horizon,
)
from .control import ConditionalIntegrationConfig, PiController, PiGains, SaturationLimits
from .objective import CostSpec, MetricKind, WeightMode
from .simulation import (
    DiscreteTransferFunction,
    MimoPlant,
    Ramp,
    ReferenceProfile,
    SimulationTrace,
    Step,
    normalize_tf,
    simulate_closed_loop,
)
from .smdo import OptimizerConfig, ParameterVector

__all__ = [
    "LoopConfig",
    "Scenario",
    "load_scenario",
    "load_scenario_file",
    "builtin_oracle_plants",
    "builtin_surrogate_refrigeration",
    "builtin_scenarios",
    "split_gains",
]


@dataclass(frozen=True)
class LoopConfig:
    gains_bounds: tuple[tuple[float, float], tuple[float, float]]
    reference: ReferenceProfile
    gains_init: tuple[float, float] | None = None
    saturation: SaturationLimits = SaturationLimits()
    ci: ConditionalIntegrationConfig = ConditionalIntegrationConfig()

    def __post_init__(self):
        if len(self.gains_bounds) != 2:
            raise ConfigurationError("gains_bounds: expected [[kp_lo, kp_hi], [ki_lo, ki_hi]]")
        bounds = (
            check_bounds(self.gains_bounds[0], "gains_bounds[0]"),
            check_bounds(self.gains_bounds[1], "gains_bounds[1]"),
        )
        object.__setattr__(self, "gains_bounds", bounds)
        if self.gains_init is not None:
            if len(self.gains_init) != 2:
                raise ConfigurationError("gains_init: expected [kp, ki]")
            init = tuple(check_finite(g, f"gains_init[{i}]") for i, g in enumerate(self.gains_init))
            for i, (g, (lo, hi)) in enumerate(zip(init, bounds)):
                if not lo <= g <= hi:
                    raise ConfigurationError(f"gains_init[{i}]: {g} outside [{lo}, {hi}]")
            object.__setattr__(self, "gains_init", init)

    @property
    def initial_gains(self) -> tuple[float, float]:
        if self.gains_init is not None:
            return self.gains_init
        return tuple((lo + hi) / 2.0 for lo, hi in self.gains_bounds)


def split_gains(gains, n_loops: int) -> list[PiGains]:
    """Accept a flat ``[kp1, ki1, kp2, ki2, ...]`` list or per-loop pairs."""
    if isinstance(gains, np.ndarray):
        gains = gains.tolist()
    gains = list(gains)
    if gains and all(isinstance(g, (PiGains, tuple, list)) for g in gains):
        pairs = [tuple(g) for g in gains]
    else:
        if len(gains) % 2:
            raise ConfigurationError("gains must come in (kp, ki) pairs")
        pairs = [tuple(gains[i : i + 2]) for i in range(0, len(gains), 2)]
    if len(pairs) != n_loops or any(len(p) != 2 for p in pairs):
        raise ConfigurationError(f"expected {n_loops} (kp, ki) pairs, got {len(pairs)}")
    return [PiGains(kp, ki) for kp, ki in pairs]


@dataclass(frozen=True)
class Scenario:
    plant: MimoPlant
    loops: tuple[LoopConfig, ...]
    horizon: float
    dt: float
    cost: CostSpec
    optimizer: OptimizerConfig = OptimizerConfig()
    output_bias: tuple[float, ...] | None = None
    name: str = "scenario"
    divergence_bound: float = 1e9

    def __post_init__(self):
        loops = tuple(self.loops)
        object.__setattr__(self, "loops", loops)
        dt = check_positive(self.dt, "dt_s")
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "horizon", check_positive(self.horizon, "horizon_s"))
        steps_in_horizon(self.horizon, dt)
        if self.plant.dt != dt:
            raise ConfigurationError(f"plant dt {self.plant.dt} differs from dt_s {dt}")
        n = self.plant.size
        if len(loops) != n:
            raise ConfigurationError(f"loops: plant has {n} outputs but {len(loops)} loops given")
        for (i, j), tf in self.plant:
            path = f"plant.channels[{i}][{j}]"
            try:
                tf = normalize_tf(tf)
            except ConfigurationError as exc:
                raise ConfigurationError(f"{path}: {exc}") from None
            if not tf.is_strictly_proper:
                raise ConfigurationError(
                    f"{path}: algebraic loop risk: plant must be strictly proper"
                )
        if len(self.cost.metrics) != n:
            raise ConfigurationError(f"cost.metrics: expected {n} entries")
        if self.output_bias is not None:
            bias = tuple(check_finite(b, "plant.output_bias") for b in self.output_bias)
            if len(bias) != n:
                raise ConfigurationError(f"plant.output_bias: expected {n} entries")
            object.__setattr__(self, "output_bias", bias)
        scales = self.optimizer.step_scales
        if scales is not None and len(scales) != 2 * n:
            raise ConfigurationError(f"optimizer.step_scales: expected {2 * n} entries")
        bound = float(self.divergence_bound)
        if not bound > 0:
            raise ConfigurationError("divergence_bound must be > 0")
        object.__setattr__(self, "divergence_bound", bound)

    @property
    def n_loops(self) -> int:
        return len(self.loops)

    @property
    def n_steps(self) -> int:
        return steps_in_horizon(self.horizon, self.dt)

    def parameter_vector(self) -> ParameterVector:
        lower = [b[0] for loop in self.loops for b in loop.gains_bounds]
        upper = [b[1] for loop in self.loops for b in loop.gains_bounds]
        values = [g for loop in self.loops for g in loop.initial_gains]
        steps = self.optimizer.step_scales
        if steps is None:
            # a tenth of each bound width; degenerate bounds still need a positive step
            steps = [(hi - lo) / 10.0 or 1.0 for lo, hi in zip(lower, upper)]
        return ParameterVector(values, steps, lower, upper)

    def controllers(self, gains, *, ci: bool | None = None) -> list[PiController]:
        """Fresh controllers; ``ci`` forces the band gate on/off in every loop."""
        out = []
        for loop, g in zip(self.loops, split_gains(gains, self.n_loops)):
            gate = loop.ci if ci is None else replace(loop.ci, enabled=ci)
            out.append(PiController(g, self.dt, loop.saturation, gate))
        return out

    def simulate(self, gains, *, ci: bool | None = None) -> SimulationTrace:
        return simulate_closed_loop(
            self.plant,
            self.controllers(gains, ci=ci),
            [loop.reference for loop in self.loops],
            self.horizon,
            output_bias=self.output_bias,
            blowup=self.divergence_bound,
        )

    def with_ci(self, enabled: bool) -> "Scenario":
        loops = tuple(replace(loop, ci=replace(loop.ci, enabled=enabled)) for loop in self.loops)
        return replace(self, loops=loops)

    def to_dict(self) -> dict:
        plant = {"channels": [[tf.to_dict() for tf in row] for row in self.plant.channels]}
        if self.output_bias is not None:
            plant["output_bias"] = list(self.output_bias)
        return {
            "name": self.name,
            "plant": plant,
            "loops": [_loop_to_dict(loop) for loop in self.loops],
            "horizon_s": self.horizon,
            "dt_s": self.dt,
            "cost": self.cost.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "divergence_bound": self.divergence_bound,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _segment_to_dict(seg) -> dict:
    if isinstance(seg, Ramp):
        return {
            "start": seg.start,
            "end": seg.end,
            "start_level": seg.start_level,
            "end_level": seg.end_level,
        }
    return {"start": seg.start, "level": seg.level}


def _loop_to_dict(loop: LoopConfig) -> dict:
    return {
        "gains_bounds": [list(b) for b in loop.gains_bounds],
        "gains_init": None if loop.gains_init is None else list(loop.gains_init),
        "saturation": {
            "min": _finite_or_none(loop.saturation.u_min),
            "max": _finite_or_none(loop.saturation.u_max),
        },
        "ci": {"enabled": loop.ci.enabled, "band": _finite_or_none(loop.ci.band)},
        "reference": [_segment_to_dict(s) for s in loop.reference.segments],
    }


# -- parsing ---------------------------------------------------------------

_TOP_KEYS = {"name", "plant", "loops", "horizon_s", "dt_s", "cost", "optimizer", "divergence_bound"}
_REQUIRED_TOP = ("plant", "loops", "horizon_s", "dt_s")


def _obj(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigurationError(f"{path}: expected an object")
    return value


def _only(d: dict, allowed: set, path: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigurationError(f"{path}: unknown key(s) {', '.join(map(repr, extra))}")


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigurationError(f"{path}: missing required field '{key}'")
    return d[key]


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise ConfigurationError(f"{path}: expected a list")
    return value


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{path}: expected a number, got {value!r}")
    return check_finite(value, path)


def _parse_tf(d, dt: float, path: str) -> DiscreteTransferFunction:
    d = _obj(d, path)
    _only(d, {"num", "den"}, path)
    num = [_number(v, f"{path}.num[{i}]") for i, v in enumerate(_list(_require(d, "num", path), f"{path}.num"))]
    den = [_number(v, f"{path}.den[{i}]") for i, v in enumerate(_list(_require(d, "den", path), f"{path}.den"))]
    if not num or not den:
        raise ConfigurationError(f"{path}: num and den must be non-empty")
    if den[0] == 0:
        raise ConfigurationError(f"{path}: leading denominator coefficient is zero")
    return DiscreteTransferFunction(tuple(num), tuple(den), dt)


def _parse_reference(value, path: str) -> ReferenceProfile:
    segs = []
    for i, item in enumerate(_list(value, path)):
        p = f"{path}[{i}]"
        item = _obj(item, p)
        if "level" in item:
            _only(item, {"start", "level"}, p)
            segs.append(Step(_number(_require(item, "start", p), f"{p}.start"), _number(item["level"], f"{p}.level")))
        else:
            _only(item, {"start", "end", "start_level", "end_level"}, p)
            segs.append(
                Ramp(*(_number(_require(item, k, p), f"{p}.{k}") for k in ("start", "end", "start_level", "end_level")))
            )
    try:
        return ReferenceProfile(tuple(segs))
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def _bound_or_inf(value, default: float, path: str) -> float:
    return default if value is None else _number(value, path)


def _parse_loop(d, path: str) -> LoopConfig:
    d = _obj(d, path)
    _only(d, {"gains_bounds", "gains_init", "saturation", "ci", "reference"}, path)
    bounds = _list(_require(d, "gains_bounds", path), f"{path}.gains_bounds")
    if len(bounds) != 2:
        raise ConfigurationError(f"{path}.gains_bounds: expected [[kp_lo, kp_hi], [ki_lo, ki_hi]]")
    bounds = tuple(
        tuple(_number(v, f"{path}.gains_bounds[{i}][{j}]") for j, v in enumerate(_list(b, f"{path}.gains_bounds[{i}]")))
        for i, b in enumerate(bounds)
    )
    init = d.get("gains_init")
    if init is not None:
        init = tuple(_number(v, f"{path}.gains_init[{i}]") for i, v in enumerate(_list(init, f"{path}.gains_init")))
    sat = SaturationLimits()
    if d.get("saturation") is not None:
        s = _obj(d["saturation"], f"{path}.saturation")
        _only(s, {"min", "max"}, f"{path}.saturation")
        lo = _bound_or_inf(s.get("min"), -math.inf, f"{path}.saturation.min")
        hi = _bound_or_inf(s.get("max"), math.inf, f"{path}.saturation.max")
        if not lo < hi:
            raise ConfigurationError(f"{path}.saturation: u_min must be below u_max")
        sat = SaturationLimits(lo, hi)
    ci = ConditionalIntegrationConfig()
    if d.get("ci") is not None:
        c = _obj(d["ci"], f"{path}.ci")
        _only(c, {"enabled", "band"}, f"{path}.ci")
        enabled = c.get("enabled", False)
        if not isinstance(enabled, bool):
            raise ConfigurationError(f"{path}.ci.enabled: expected true or false")
        band = _bound_or_inf(c.get("band"), math.inf, f"{path}.ci.band")
        if band <= 0:
            raise ConfigurationError(f"{path}.ci.band: must be > 0")
        ci = ConditionalIntegrationConfig(enabled, band)
    reference = _parse_reference(_require(d, "reference", path), f"{path}.reference")
    try:
        return LoopConfig(bounds, reference, init, sat, ci)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}.{exc}") from None


def _parse_cost(d, n: int) -> CostSpec:
    if d is None:
        return CostSpec((MetricKind.ITAE,) * n, (0.5,) * n if n > 1 else (1.0,))
    d = _obj(d, "cost")
    _only(d, {"metrics", "weights", "weight_mode"}, "cost")
    metrics = _list(d.get("metrics", ["ITAE"] * n), "cost.metrics")
    weights = _list(d.get("weights", [0.5] * n if n > 1 else [1.0]), "cost.weights")
    weights = [_number(w, f"cost.weights[{i}]") for i, w in enumerate(weights)]
    for i, m in enumerate(metrics):
        if m not in MetricKind._value2member_map_:
            raise ConfigurationError(f"cost.metrics[{i}]: unknown metric {m!r}")
    mode = d.get("weight_mode", WeightMode.FIXED.value)
    if mode not in WeightMode._value2member_map_:
        raise ConfigurationError(f"cost.weight_mode: unknown mode {mode!r}")
    try:
        return CostSpec(tuple(metrics), tuple(weights), WeightMode(mode))
    except ConfigurationError as exc:
        raise ConfigurationError(f"cost: {exc}") from None


def _parse_optimizer(d, weight_mode: WeightMode) -> OptimizerConfig:
    d = _obj(d or {}, "optimizer")
    _only(d, {"max_iterations", "target_cost", "seed", "step_decay", "step_scales"}, "optimizer")
    kwargs = {"weight_mode": weight_mode}
    for key in ("max_iterations", "seed"):
        if d.get(key) is not None:
            if isinstance(d[key], bool) or not isinstance(d[key], int):
                raise ConfigurationError(f"optimizer.{key}: expected an integer")
            kwargs[key] = d[key]
    if d.get("target_cost") is not None:
        kwargs["target_cost"] = _number(d["target_cost"], "optimizer.target_cost")
    if d.get("step_decay") is not None:
        kwargs["step_decay"] = _number(d["step_decay"], "optimizer.step_decay")
    if d.get("step_scales") is not None:
        scales = _list(d["step_scales"], "optimizer.step_scales")
        kwargs["step_scales"] = tuple(_number(s, f"optimizer.step_scales[{i}]") for i, s in enumerate(scales))
    try:
        return OptimizerConfig(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"optimizer: {exc}") from None


def scenario_from_dict(doc) -> Scenario:
    doc = _obj(doc, "scenario")
    _only(doc, _TOP_KEYS, "scenario")
    for key in _REQUIRED_TOP:
        _require(doc, key, "scenario")
    dt = _number(doc["dt_s"], "dt_s")
    if dt <= 0:
        raise ConfigurationError("dt_s: must be > 0")
    horizon = _number(doc["horizon_s"], "horizon_s")

    plant_doc = _obj(doc["plant"], "plant")
    _only(plant_doc, {"channels", "output_bias"}, "plant")
    rows = _list(_require(plant_doc, "channels", "plant"), "plant.channels")
    channels = tuple(
        tuple(_parse_tf(tf, dt, f"plant.channels[{i}][{j}]") for j, tf in enumerate(_list(row, f"plant.channels[{i}]")))
        for i, row in enumerate(rows)
    )
    try:
        plant = MimoPlant(channels)
    except ConfigurationError as exc:
        raise ConfigurationError(f"plant: {exc}") from None
    bias = plant_doc.get("output_bias")
    if bias is not None:
        bias = tuple(_number(b, f"plant.output_bias[{i}]") for i, b in enumerate(_list(bias, "plant.output_bias")))

    loops = tuple(_parse_loop(d, f"loops[{i}]") for i, d in enumerate(_list(doc["loops"], "loops")))
    cost = _parse_cost(doc.get("cost"), len(loops))
    optimizer = _parse_optimizer(doc.get("optimizer"), cost.weight_mode)
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ConfigurationError("name: expected a string")
    bound = doc.get("divergence_bound")
    bound = 1e9 if bound is None else _number(bound, "divergence_bound")
    return Scenario(plant, loops, horizon, dt, cost, optimizer, bias, name, bound)


def load_scenario(document: str | bytes | dict) -> Scenario:
    """Parse and fully validate a scenario from JSON text (or an already-parsed dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario is not valid JSON: {exc}") from None
    return scenario_from_dict(document)


def load_scenario_file(path: str | Path) -> Scenario:
    """Load a scenario file; ``builtin:<name>`` selects a built-in fixture."""
    text = str(path)
    if text.startswith("builtin:"):
        name = text.split(":", 1)[1]
        fixtures = builtin_scenarios()
        if name not in fixtures:
            raise ConfigurationError(f"unknown built-in scenario {name!r}; choose from {sorted(fixtures)}")
        return fixtures[name]
    return load_scenario(Path(path).read_text(encoding="utf-8"))


# -- built-in fixtures -----------------------------------------------------


def _oracle(name: str, num, den, horizon: float = 200.0) -> Scenario:
    tf = DiscreteTransferFunction(tuple(num), tuple(den), 1.0)
    loop = LoopConfig(((0.0, 10.0), (0.0, 10.0)), ReferenceProfile.constant(1.0))
    return Scenario(
        MimoPlant.siso(tf),
        (loop,),
        horizon,
        1.0,
        CostSpec((MetricKind.ITAE,), (1.0,)),
        name=name,
    )


def builtin_oracle_plants() -> list[Scenario]:
    """SISO fixtures with closed-form responses, all at dt = 1 s.

    * ``unit-delay``: ``y[k] = u[k-1]``
    * ``first-order``: ``y[k] = 0.9 y[k-1] + 0.1 u[k-1]`` (unit DC gain)
    * ``second-order``: poles 0.8 and 0.6, numerator scaled to unit DC gain
    """
    return [
        _oracle("unit-delay", [0.0, 1.0], [1.0]),
        _oracle("first-order", [0.0, 0.1], [1.0, -0.9]),
        # (1 - 0.8 z^-1)(1 - 0.6 z^-1) = 1 - 1.4 z^-1 + 0.48 z^-2; DC gain 0.08 / 0.08
        _oracle("second-order", [0.0, 0.08], [1.0, -1.4, 0.48]),
    ]


def builtin_surrogate_refrigeration() -> Scenario:
    """Two-loop stand-in for an evaporator outlet temperature / superheat pair.

    Not a model of any real refrigeration cycle: coefficients were picked to
    give the loop shapes below and nothing else.

    * Loop 1 (outlet-temperature analog): first-order lag, pole 0.98
      (time constant ~50 s), DC gain 1, six samples of dead time.
    * Loop 2 (superheat analog): first-order lag, pole 0.9 (~10 s), DC gain 1.
    * Cross channels: first-order lags with DC gains 0.15 (input 2 -> output 1)
      and -0.1 (input 1 -> output 2).
    * Output 1 carries a constant disturbance bias of -0.5 that only integral
      action can remove; both actuators saturate at +-3.
    * The last loop-1 setpoint change comes 100 s before the end of the run,
      so the terminal error measures how fast the residual offset is removed.
    * Conditional integration band 0.4 on both loops.

    With these values the dead time caps usable loop-1 gains, and gating the
    integrator outside the band lets the tuned loop clear the residual offset
    faster than a plain clamped PI tuned under the same budget.
    """
    dt = 1.0
    tf = lambda num, den: DiscreteTransferFunction(num, den, dt)  # noqa: E731
    plant = MimoPlant(
        (
            (tf((0.0,) * 6 + (0.02,), (1.0, -0.98)), tf((0.0, 0.015), (1.0, -0.9))),
            (tf((0.0, -0.005), (1.0, -0.95)), tf((0.0, 0.1), (1.0, -0.9))),
        )
    )
    bounds = ((0.0, 10.0), (0.0, 10.0))
    loop1 = LoopConfig(
        bounds,
        ReferenceProfile.steps((0, 1.0), (300, 2.0), (700, 1.5), (1100, 2.2)),
        saturation=SaturationLimits(-3.0, 3.0),
        ci=ConditionalIntegrationConfig(True, 0.4),
    )
    loop2 = LoopConfig(
        bounds,
        ReferenceProfile.steps((0, 1.0), (200, 1.5), (600, 0.8), (900, 1.2)),
        saturation=SaturationLimits(-3.0, 3.0),
        ci=ConditionalIntegrationConfig(True, 0.4),
    )
    return Scenario(
        plant,
        (loop1, loop2),
        1200.0,
        dt,
        CostSpec((MetricKind.ITAE, MetricKind.ITAE), (0.5, 0.5)),
        OptimizerConfig(max_iterations=100, seed=0),
        output_bias=(-0.5, 0.0),
        name="surrogate-refrigeration",
    )


def builtin_scenarios() -> dict[str, Scenario]:
    fixtures = {s.name: s for s in builtin_oracle_plants()}
    surrogate = builtin_surrogate_refrigeration()
    fixtures[surrogate.name] = surrogate
    return fixtures

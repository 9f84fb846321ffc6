"""Stochastic multi-parameter divergence tuning of discrete PI control loops."""

from ._validation import ConfigurationError
from .control import (
    ConditionalIntegrationConfig,
    PiController,
    PiGains,
    SaturationLimits,
    ci_gate,
    pi_step,
    reset,
)
from .objective import (
    CostSpec,
    DegenerateBaselineError,
    Evaluation,
    MetricKind,
    WeightMode,
    combine,
    evaluate,
    j_index,
    metric,
)
from .scenarios import (
    LoopConfig,
    Scenario,
    builtin_oracle_plants,
    builtin_scenarios,
    builtin_surrogate_refrigeration,
    load_scenario,
    load_scenario_file,
)
from .simulation import (
    DiscreteTransferFunction,
    MimoPlant,
    Ramp,
    ReferenceProfile,
    SimulationTrace,
    Step,
    normalize_tf,
    open_loop_response,
    sample_reference,
    simulate_closed_loop,
    validate_trace,
)
from .smdo import (
    IterationRecord,
    OptimizerConfig,
    OptimizerState,
    Outcome,
    ParameterVector,
    backward_test,
    forward_test,
    iterate,
    minimize,
)
from .tuner import SmdoTuner

__version__ = "0.1.0"

__all__ = [
    "ConditionalIntegrationConfig",
    "ConfigurationError",
    "CostSpec",
    "DegenerateBaselineError",
    "DiscreteTransferFunction",
    "Evaluation",
    "IterationRecord",
    "LoopConfig",
    "MetricKind",
    "MimoPlant",
    "OptimizerConfig",
    "OptimizerState",
    "Outcome",
    "ParameterVector",
    "PiController",
    "PiGains",
    "Ramp",
    "ReferenceProfile",
    "SaturationLimits",
    "Scenario",
    "SimulationTrace",
    "SmdoTuner",
    "Step",
    "WeightMode",
    "backward_test",
    "builtin_oracle_plants",
    "builtin_scenarios",
    "builtin_surrogate_refrigeration",
    "ci_gate",
    "combine",
    "evaluate",
    "forward_test",
    "iterate",
    "j_index",
    "load_scenario",
    "load_scenario_file",
    "metric",
    "minimize",
    "normalize_tf",
    "open_loop_response",
    "pi_step",
    "reset",
    "sample_reference",
    "simulate_closed_loop",
    "validate_trace",
]

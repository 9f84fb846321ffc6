"""Discrete PI controller with output clamping and conditional integration."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

from ._validation import ConfigurationError, check_finite, check_positive

__all__ = [
    "PiGains",
    "SaturationLimits",
    "ConditionalIntegrationConfig",
    "PiController",
    "ci_gate",
    "pi_step",
    "reset",
]


@dataclass(frozen=True)
class PiGains:
    kp: float
    ki: float

    def __post_init__(self):
        object.__setattr__(self, "kp", check_finite(self.kp, "kp"))
        object.__setattr__(self, "ki", check_finite(self.ki, "ki"))

    def __iter__(self):
        yield self.kp
        yield self.ki


@dataclass(frozen=True)
class SaturationLimits:
    u_min: float = -math.inf
    u_max: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.u_min), float(self.u_max)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise ConfigurationError(f"saturation needs u_min < u_max, got [{lo}, {hi}]")
        object.__setattr__(self, "u_min", lo)
        object.__setattr__(self, "u_max", hi)

    @property
    def active(self) -> bool:
        return math.isfinite(self.u_min) or math.isfinite(self.u_max)


@dataclass(frozen=True)
class ConditionalIntegrationConfig:
    """Error-band gate: integrate only while ``|e| <= band``.

    ``band = inf`` admits every error, which makes the gate a pass-through.
    """

    enabled: bool = False
    band: float = math.inf

    def __post_init__(self):
        band = float(self.band)
        if math.isnan(band) or band <= 0:
            raise ConfigurationError(f"ci band must be > 0, got {self.band!r}")
        object.__setattr__(self, "band", band)
        object.__setattr__(self, "enabled", bool(self.enabled))


class PiController:
    """PI law ``u = clamp(kp*e + i)`` with a backward-Euler integrator.

    The integrator update ``i += ki*dt*e`` is applied only when the
    conditional-integration gate admits it, and is rolled back on any step
    whose output had to be clamped. The saturation rollback is active whether
    or not the error-band gate is enabled.
    """

    __slots__ = ("gains", "limits", "ci", "dt", "integrator")

    def __init__(
        self,
        gains: PiGains,
        dt: float,
        limits: SaturationLimits | None = None,
        ci: ConditionalIntegrationConfig | None = None,
        integrator: float = 0.0,
    ):
        self.gains = gains
        self.dt = check_positive(dt, "dt")
        self.limits = limits or SaturationLimits()
        self.ci = ci or ConditionalIntegrationConfig()
        self.integrator = check_finite(integrator, "integrator")

    def admits(self, error: float) -> bool:
        return ci_gate(error, self)

    def step(self, error: float) -> tuple[float, bool]:
        """Advance one sample; returns ``(u, saturated)``."""
        if not math.isfinite(error):
            raise ValueError(f"controller error must be finite, got {error!r}")
        kp, ki = self.gains.kp, self.gains.ki
        admit = not self.ci.enabled or abs(error) <= self.ci.band
        i_new = self.integrator + ki * self.dt * error if admit else self.integrator
        u_t = kp * error + i_new
        lo, hi = self.limits.u_min, self.limits.u_max
        u = lo if u_t < lo else hi if u_t > hi else u_t
        saturated = u != u_t
        if not (saturated and admit):
            self.integrator = i_new
        return u, saturated

    __call__ = step

    def reset(self) -> "PiController":
        self.integrator = 0.0
        return self

    def __repr__(self):
        return (
            f"PiController(kp={self.gains.kp!r}, ki={self.gains.ki!r}, dt={self.dt!r}, "
            f"limits=[{self.limits.u_min}, {self.limits.u_max}], ci={self.ci}, "
            f"integrator={self.integrator!r})"
        )


# The value-in/value-out forms below leave the input state untouched.


def ci_gate(error: float, state: PiController) -> bool:
    return not state.ci.enabled or abs(error) <= state.ci.band


def pi_step(state: PiController, error: float) -> tuple[float, bool, PiController]:
    """Functional step: ``(u, saturated, new_state)``."""
    new = copy.copy(state)
    u, saturated = new.step(error)
    return u, saturated, new


def reset(state: PiController) -> PiController:
    return copy.copy(state).reset()

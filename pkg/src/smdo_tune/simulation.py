"""Fixed-step simulation of discrete-time LTI plants, open loop and in feedback.

Transfer functions use ascending powers of ``z**-1``::

    G(z) = (b[0] + b[1] z^-1 + ... + b[m] z^-m) / (a[0] + a[1] z^-1 + ... + a[n] z^-n)

so the difference equation (with ``a[0] == 1``) reads
``y[k] = sum_j b[j] u[k-j] - sum_{j>=1} a[j] y[k-j]``. In this form every
coefficient list describes a causal filter; the filter is *strictly proper*
(at least one sample of input-to-output delay) exactly when ``b[0] == 0``.
"""

from __future__ import annotations

import bisect
import functools
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ._validation import (
    ConfigurationError,
    check_coefficients,
    check_finite,
    check_positive,
    check_signal,
    steps_in_horizon,
)

__all__ = [
    "DiscreteTransferFunction",
    "MimoPlant",
    "Step",
    "Ramp",
    "ReferenceProfile",
    "SimulationTrace",
    "normalize_tf",
    "open_loop_response",
    "simulate_closed_loop",
    "sample_reference",
    "validate_trace",
]


@dataclass(frozen=True)
class DiscreteTransferFunction:
    num: tuple[float, ...]
    den: tuple[float, ...]
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "num", check_coefficients(self.num, "num"))
        object.__setattr__(self, "den", check_coefficients(self.den, "den"))
        object.__setattr__(self, "dt", check_positive(self.dt, "dt"))

    @property
    def is_strictly_proper(self) -> bool:
        return self.num[0] == 0.0

    @property
    def order(self) -> int:
        return max(len(self.num), len(self.den)) - 1

    def poles(self) -> np.ndarray:
        """Roots of the denominator as a polynomial in z."""
        den = np.trim_zeros(np.asarray(self.den), "b")
        if den.size <= 1:
            return np.empty(0)
        return np.roots(den)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def dc_gain(self) -> float:
        # G(z=1): z^-1 = 1 so the gain is sum(b) / sum(a)
        return math.fsum(self.num) / math.fsum(self.den)

    def to_dict(self) -> dict:
        return {"num": list(self.num), "den": list(self.den)}


def normalize_tf(tf: DiscreteTransferFunction) -> DiscreteTransferFunction:
    """Scale numerator and denominator so the leading denominator coefficient is 1."""
    a0 = tf.den[0]
    if a0 == 0.0:
        raise ConfigurationError("leading denominator coefficient is zero")
    if a0 == 1.0:
        return tf
    return DiscreteTransferFunction(
        tuple(b / a0 for b in tf.num), tuple(a / a0 for a in tf.den), tf.dt
    )


@dataclass(frozen=True)
class MimoPlant:
    """Square grid of channels; entry ``(i, j)`` maps input ``j`` to output ``i``.

    Each output is the sum of its row's channel outputs.
    """

    channels: tuple[tuple[DiscreteTransferFunction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.channels)
        n = len(rows)
        if n == 0 or any(len(row) != n for row in rows):
            raise ConfigurationError("plant channels must form a non-empty square grid")
        dts = {tf.dt for row in rows for tf in row}
        if len(dts) != 1:
            raise ConfigurationError(f"all plant channels must share dt, got {sorted(dts)}")
        object.__setattr__(self, "channels", rows)

    @classmethod
    def siso(cls, tf: DiscreteTransferFunction) -> "MimoPlant":
        return cls(((tf,),))

    @property
    def size(self) -> int:
        return len(self.channels)

    @property
    def dt(self) -> float:
        return self.channels[0][0].dt

    def __iter__(self):
        for i, row in enumerate(self.channels):
            for j, tf in enumerate(row):
                yield (i, j), tf


PlantLike = Union[MimoPlant, DiscreteTransferFunction]


@dataclass(frozen=True)
class Step:
    start: float
    level: float


@dataclass(frozen=True)
class Ramp:
    """Linear move from ``start_level`` at ``start`` to ``end_level`` at ``end``, then hold."""

    start: float
    end: float
    start_level: float
    end_level: float


@dataclass(frozen=True)
class ReferenceProfile:
    segments: tuple[Union[Step, Ramp], ...]
    _starts: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ConfigurationError("reference needs at least one segment")
        for i, seg in enumerate(segs):
            if not isinstance(seg, (Step, Ramp)):
                raise ConfigurationError(f"segments[{i}]: expected Step or Ramp")
            check_finite(seg.start, f"segments[{i}].start")
            if isinstance(seg, Ramp):
                check_finite(seg.start_level, f"segments[{i}].start_level")
                check_finite(seg.end_level, f"segments[{i}].end_level")
                if not seg.end > seg.start:
                    raise ConfigurationError(f"segments[{i}]: ramp end must follow its start")
            else:
                check_finite(seg.level, f"segments[{i}].level")
        starts = tuple(float(s.start) for s in segs)
        if starts[0] != 0.0:
            raise ConfigurationError("first reference segment must start at t = 0")
        for i in range(1, len(starts)):
            if starts[i] <= starts[i - 1]:
                raise ConfigurationError(
                    f"segments[{i}]: start times must be strictly increasing"
                )
            prev = segs[i - 1]
            if isinstance(prev, Ramp) and prev.end > starts[i]:
                raise ConfigurationError(f"segments[{i - 1}]: ramp overlaps the next segment")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", starts)

    @classmethod
    def constant(cls, level: float) -> "ReferenceProfile":
        return cls((Step(0.0, float(level)),))

    @classmethod
    def steps(cls, *pairs: tuple[float, float]) -> "ReferenceProfile":
        return cls(tuple(Step(float(t), float(v)) for t, v in pairs))

    def __call__(self, t: float) -> float:
        seg = self.segments[bisect.bisect_right(self._starts, t) - 1]
        if isinstance(seg, Step):
            return seg.level
        if t >= seg.end:
            return seg.end_level
        frac = (t - seg.start) / (seg.end - seg.start)
        return seg.start_level + frac * (seg.end_level - seg.start_level)

    def sample_grid(self, t: np.ndarray) -> np.ndarray:
        return np.array([self(float(tk)) for tk in t])


@functools.lru_cache(maxsize=64)
def _reference_grid(profile: ReferenceProfile, n_steps: int, dt: float) -> tuple[float, ...]:
    return tuple(profile(k * dt) for k in range(n_steps + 1))


def sample_reference(profile: ReferenceProfile, t: float) -> float:
    """Setpoint at time ``t``; the later segment wins on a boundary."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return profile(t)


class _Channel:
    """Transposed direct-form II memory of one monic transfer function."""

    __slots__ = ("b", "a", "z")

    def __init__(self, tf: DiscreteTransferFunction):
        tf = normalize_tf(tf)
        n = tf.order
        self.b = list(tf.num) + [0.0] * (n + 1 - len(tf.num))
        self.a = list(tf.den) + [0.0] * (n + 1 - len(tf.den))
        self.z = [0.0] * n

    def peek(self) -> float:
        """Output contribution already determined by past samples."""
        return self.z[0] if self.z else 0.0

    def advance(self, u: float) -> float:
        b, a, z = self.b, self.a, self.z
        y = b[0] * u + (z[0] if z else 0.0)
        n = len(z)
        for i in range(n - 1):
            z[i] = b[i + 1] * u + z[i + 1] - a[i + 1] * y
        if n:
            z[n - 1] = b[n] * u - a[n] * y
        return y


def open_loop_response(tf: DiscreteTransferFunction, u) -> np.ndarray:
    """Zero-state response of ``tf`` to the input sequence ``u``."""
    u = check_signal(u, "input")
    ch = _Channel(tf)
    return np.array([ch.advance(float(uk)) for uk in u], dtype=float)


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Time-aligned closed-loop signals; per-loop arrays have shape ``(loops, samples)``."""

    t: np.ndarray
    r: np.ndarray
    y: np.ndarray
    u: np.ndarray
    e: np.ndarray
    saturated: np.ndarray
    dt: float
    diverged: bool = False

    @property
    def n_loops(self) -> int:
        return self.r.shape[0]

    def __len__(self) -> int:
        return self.t.shape[0]

    def identical_to(self, other: "SimulationTrace") -> bool:
        """Bit-for-bit equality of every series."""
        return (
            self.dt == other.dt
            and self.diverged == other.diverged
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("t", "r", "y", "u", "e", "saturated")
            )
        )


def validate_trace(trace: SimulationTrace, n_steps: int | None = None) -> None:
    """Raise ``AssertionError`` if ``trace`` breaks any of its structural invariants.

    A diverged trace is allowed to stop short of ``n_steps + 1`` samples.
    """
    length = len(trace.t)
    for name in ("r", "y", "u", "e", "saturated"):
        arr = getattr(trace, name)
        assert arr.ndim == 2 and arr.shape[1] == length, f"{name} misaligned with t"
        assert arr.shape[0] == trace.n_loops, f"{name} has wrong loop count"
    if n_steps is not None:
        if trace.diverged:
            assert length <= n_steps + 1, "diverged trace longer than horizon"
        else:
            assert length == n_steps + 1, f"expected {n_steps + 1} samples, got {length}"
    assert np.array_equal(trace.t, np.arange(length) * trace.dt), "t is not k * dt"
    if length > 1:
        assert np.all(np.diff(trace.t) > 0), "t not strictly increasing"
    assert np.array_equal(trace.e, trace.r - trace.y), "e != r - y"


ControllerStep = Callable[[float], "tuple[float, bool]"]


def _as_plant(plant: PlantLike) -> MimoPlant:
    if isinstance(plant, DiscreteTransferFunction):
        return MimoPlant.siso(plant)
    if isinstance(plant, MimoPlant):
        return plant
    raise TypeError(f"expected a transfer function or MimoPlant, got {type(plant).__name__}")


def simulate_closed_loop(
    plant: PlantLike,
    controllers: Sequence,
    refs: Sequence[ReferenceProfile],
    horizon: float,
    *,
    output_bias: Sequence[float] | None = None,
    blowup: float = math.inf,
) -> SimulationTrace:
    """Run the feedback loop for ``horizon`` seconds at the plant sample time.

    Each step measures every output first, then asks controller ``i`` for
    input ``i`` given its error, then advances all plant channels. Controllers
    are callables ``e -> (u, saturated)`` or objects with such a ``step``
    method; they are called in place and keep their state.

    ``output_bias`` is a constant disturbance added to each measured output.
    The run stops early, flagged ``diverged``, once any measured output leaves
    ``[-blowup, blowup]``; the trace then holds only the samples before it.
    """
    plant = _as_plant(plant)
    n_loops = plant.size
    if len(controllers) != n_loops or len(refs) != n_loops:
        raise ConfigurationError(
            f"plant has {n_loops} loops but got {len(controllers)} controllers "
            f"and {len(refs)} references"
        )
    for (i, j), tf in plant:
        if not normalize_tf(tf).is_strictly_proper:
            raise ConfigurationError(
                f"algebraic loop: channel ({i}, {j}) must be strictly proper (num[0] == 0)"
            )
    dt = plant.dt
    n_steps = steps_in_horizon(horizon, dt)
    bias = [0.0] * n_loops if output_bias is None else [float(b) for b in output_bias]
    if len(bias) != n_loops:
        raise ConfigurationError("output_bias length must match the number of loops")

    steps = [getattr(c, "step", c) for c in controllers]
    t = np.arange(n_steps + 1) * dt
    r = np.array([_reference_grid(ref, n_steps, dt) for ref in refs])
    r_rows = r.tolist()
    y_out = [[0.0] * (n_steps + 1) for _ in range(n_loops)]
    u_out = [[0.0] * (n_steps + 1) for _ in range(n_loops)]
    sat_out = [[False] * (n_steps + 1) for _ in range(n_loops)]

    # Flattened transposed direct-form II memories: (output, input, b, a, z).
    # Strict properness means a channel's present output is just z[0].
    channels = []
    for (i, j), tf in plant:
        ch = _Channel(tf)
        if ch.z:
            channels.append((i, j, ch.b, ch.a, ch.z, len(ch.z)))
    loops = range(n_loops)
    u_now = [0.0] * n_loops
    stop = n_steps + 1
    diverged = False

    for k in range(n_steps + 1):
        ys = bias[:]
        for i, _, _, _, z, _ in channels:
            ys[i] += z[0]
        for i in loops:
            y = ys[i]
            if not abs(y) <= blowup:
                diverged = True
                break
            y_out[i][k] = y
            u, sat = steps[i](r_rows[i][k] - y)
            u_now[i] = u
            u_out[i][k] = u
            sat_out[i][k] = sat
        if diverged:
            stop = k
            break
        for i, j, b, a, z, n in channels:
            u = u_now[j]
            yc = z[0]
            if n == 1:
                z[0] = b[1] * u - a[1] * yc
            else:
                for m in range(n - 1):
                    z[m] = b[m + 1] * u + z[m + 1] - a[m + 1] * yc
                z[n - 1] = b[n] * u - a[n] * yc

    y = np.array(y_out)[:, :stop]
    r = r[:, :stop]
    return SimulationTrace(
        t=t[:stop],
        r=r,
        y=y,
        u=np.array(u_out)[:, :stop],
        e=r - y,
        saturated=np.array(sat_out, dtype=bool)[:, :stop],
        dt=dt,
        diverged=diverged,
    )

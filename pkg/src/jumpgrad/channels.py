"""Event-driven communication channels.

A channel on edge (j, i) carries agent j's state to agent i. Its held
value z drifts as dz = a(t) z dt between events and resets to the
sender's current value at each event. a identically zero is the ideal
sample-and-hold channel; constant nonzero a is the leaky integrator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "PiecewiseConstant",
    "ChannelSpec",
    "ChannelState",
    "drift_value",
    "channel_drift",
    "channel_jump",
]


@dataclass(frozen=True)
class PiecewiseConstant:
    """Piecewise-constant coefficient schedule.

    values[k] applies on [breakpoints[k], breakpoints[k+1]); the first
    value also applies before the first breakpoint.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bp) != len(vals) or not bp:
            raise ValueError("need equally many breakpoints and values (at least one)")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __call__(self, t: float) -> float:
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[max(k, 0)]

    def bound(self) -> float:
        return max(abs(v) for v in self.values)


Drift = Union[float, PiecewiseConstant]


@dataclass(frozen=True)
class ChannelSpec:
    """One directed link: edge (sender j, receiver i), Poisson rate, drift.

    drift_bound must dominate sup_t |a(t)|; it defaults to that supremum.
    """

    edge: tuple[int, int]
    rate: float
    drift: Drift = 0.0
    drift_bound: float | None = None

    def __post_init__(self):
        j, i = (int(v) for v in self.edge)
        if j == i:
            raise ValueError("channel edge must join two distinct agents")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        drift = self.drift if isinstance(self.drift, PiecewiseConstant) else float(self.drift)
        sup = drift.bound() if isinstance(drift, PiecewiseConstant) else abs(drift)
        bound = sup if self.drift_bound is None else float(self.drift_bound)
        if bound < sup - 1e-15:
            raise ValueError(f"drift_bound {bound} below sup |a(t)| = {sup}")
        object.__setattr__(self, "edge", (j, i))
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "drift_bound", bound)

    @property
    def sender(self) -> int:
        return self.edge[0]

    @property
    def receiver(self) -> int:
        return self.edge[1]


@dataclass
class ChannelState:
    """Held value z of one channel; length equals the sender's block size."""

    value: np.ndarray

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=float)
        if self.value.ndim != 1:
            raise ValueError("channel state must be a vector")


def drift_value(spec: ChannelSpec, t: float) -> float:
    """The coefficient a_(j,i)(t)."""
    if isinstance(spec.drift, PiecewiseConstant):
        return spec.drift(t)
    return spec.drift


def channel_drift(spec: ChannelSpec, t: float, z: ChannelState) -> np.ndarray:
    """Continuous part a(t) * z of the channel dynamics."""
    return drift_value(spec, t) * z.value


def channel_jump(sender_state: np.ndarray, z: ChannelState) -> ChannelState:
    """Reset at an event: the new held value is the sender's value x_j(t-)."""
    x = np.asarray(sender_state, dtype=float)
    if x.shape != z.value.shape:
        raise ValueError(f"sender dimension {x.shape} != channel dimension {z.value.shape}")
    return ChannelState(value=x.copy())

"""Stepsize and freeze-threshold schedules.

A schedule maps (epoch t, inner iteration i, iterations per epoch n) to a
strictly positive value.  The same objects drive both the stepsize and the
freeze threshold of the anchored methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _check_position(t: int, i: int, n: int) -> None:
    if n < 1:
        raise ValueError(f"iterations per epoch must be at least 1, got {n}")
    if t < 0:
        raise ValueError(f"epoch index must be non-negative, got {t}")
    if not 0 <= i < n:
        raise ValueError(f"inner index {i} outside [0, {n})")


@dataclass(frozen=True)
class Constant:
    """Flat schedule: the same value at every position."""

    c: float

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"constant schedule value must be positive and finite, got {self.c}")

    def value_at(self, t: int, i: int, n: int) -> float:
        _check_position(t, i, n)
        return self.c


@dataclass(frozen=True)
class InverseSqrt:
    """Decay c0 / sqrt(n*t + i + 1) over the flattened iteration count.

    With ``epoch_shift`` the count starts one epoch ahead:
    c0 / sqrt(n*(t+1) + i + 1).  That variant pairs with the momentum
    methods, whose analysis keys the decay to the following epoch.
    """

    c0: float
    epoch_shift: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.c0) and self.c0 > 0):
            raise ValueError(f"decay scale c0 must be positive and finite, got {self.c0}")

    def value_at(self, t: int, i: int, n: int) -> float:
        _check_position(t, i, n)
        if self.epoch_shift:
            k = n * (t + 1) + i + 1
        else:
            k = n * t + i + 1
        return self.c0 / math.sqrt(k)


Schedule = Constant | InverseSqrt

"""Finite unions of disjoint closed intervals inside [0, 1].

An interval union is the exact set representation used for valid regions
{x : v(x) = 1} and for learned region hypotheses.  Membership at endpoints
follows the closed-interval rule; all measure computations elsewhere in the
package are insensitive to endpoint conventions because cell boundaries are
Lebesgue-null.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = ["IntervalUnion"]


def _canonicalize(intervals: Iterable[Sequence[float]]) -> tuple[tuple[float, float], ...]:
    """Sort intervals and merge any that overlap or touch."""
    items = [(float(a), float(b)) for a, b in intervals]
    for a, b in items:
        if not (0.0 <= a <= b <= 1.0):
            raise ValueError(f"interval [{a}, {b}] not inside [0, 1]")
    items.sort()
    merged: list[tuple[float, float]] = []
    for a, b in items:
        if merged and a <= merged[-1][1]:
            prev_a, prev_b = merged[-1]
            merged[-1] = (prev_a, max(prev_b, b))
        else:
            merged.append((a, b))
    return tuple(merged)


@dataclass(frozen=True)
class IntervalUnion:
    """A finite union of disjoint closed intervals [a_j, b_j] within [0, 1].

    The constructor canonicalizes its input: intervals are sorted and any
    overlapping or touching pair is merged, so ``b_j < a_{j+1}`` holds
    strictly afterwards.  Zero-length intervals [x, x] are allowed.
    """

    intervals: tuple[tuple[float, float], ...]

    def __init__(self, intervals: Iterable[Sequence[float]] = ()) -> None:
        object.__setattr__(self, "intervals", _canonicalize(intervals))

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls(())

    @classmethod
    def full(cls) -> "IntervalUnion":
        return cls(((0.0, 1.0),))

    @property
    def count(self) -> int:
        return len(self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def total_length(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def endpoints(self) -> list[float]:
        """All interval endpoints, ascending."""
        out: list[float] = []
        for a, b in self.intervals:
            out.append(a)
            out.append(b)
        return out

    def contains(self, x: float) -> bool:
        """Exact closed-interval membership test."""
        return bool(self.contains_many(np.asarray([x]))[0])

    def contains_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized membership: True where a_j <= x <= b_j for some j."""
        xs = np.asarray(xs, dtype=float)
        if not self.intervals:
            return np.zeros(xs.shape, dtype=bool)
        flat = np.array([e for ab in self.intervals for e in ab])
        # Positions with an odd searchsorted index fall strictly inside an
        # interval; exact endpoint hits are resolved separately.
        idx = np.searchsorted(flat, xs, side="left")
        inside = (idx % 2) == 1
        on_edge = np.isin(xs, flat)
        return inside | on_edge

    def to_dict(self) -> dict:
        return {"intervals": [[a, b] for a, b in self.intervals]}

    @classmethod
    def from_dict(cls, data: dict) -> "IntervalUnion":
        return cls(data["intervals"])

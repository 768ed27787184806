"""Validity oracle with query accounting, and the consistent interval learner.

The region hypothesis class is the family of unions of at most k closed
intervals in [0, 1], whose VC dimension is 2k.  In the realizable case a
consistent hypothesis is recovered exactly by sorting the labeled points and
covering each maximal run of positive labels with the tightest closed
interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .intervals import IntervalUnion

__all__ = [
    "ValidityOracle",
    "IntervalUnionClass",
    "LabeledPoint",
    "NonRealizableError",
    "consistent_intervals",
    "fit_consistent",
    "auto_label_valid",
    "label_with_oracle",
]


class NonRealizableError(Exception):
    """The labeled sample cannot be covered by at most k intervals.

    In realizable experiments this signals a broken instance contract
    (the true region is not in the class, or labels are noisy).
    """


class LabeledPoint(NamedTuple):
    x: float
    label: int


@dataclass
class ValidityOracle:
    """Point-query access to a true valid region, with exact call counting.

    Answers are pure functions of the region; repeated queries at the same
    point still increment the counter.  One oracle instance belongs to one
    replication -- the counter is the only mutable state in the package.
    """

    valid_region: IntervalUnion
    query_count: int = field(default=0)

    def query(self, x: float) -> int:
        if not 0.0 <= x < 1.0:
            raise ValueError("query point must lie in [0, 1)")
        self.query_count += 1
        return int(self.valid_region.contains(x))

    def query_many(self, xs: np.ndarray) -> np.ndarray:
        """Batch of point queries; counts one query per point."""
        xs = np.asarray(xs, dtype=float)
        if xs.size and (xs.min() < 0.0 or xs.max() >= 1.0):
            raise ValueError("query points must lie in [0, 1)")
        self.query_count += int(xs.size)
        return self.valid_region.contains_many(xs).astype(np.int64)

    def reset(self) -> None:
        self.query_count = 0


@dataclass(frozen=True)
class IntervalUnionClass:
    """Hypothesis class of unions of at most k intervals; VC dimension 2k."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be a positive integer")

    @property
    def vc_dimension(self) -> int:
        return 2 * self.k


def fit_consistent(
    xs: np.ndarray, labels: np.ndarray, klass: IntervalUnionClass
) -> IntervalUnion:
    """Array form of :func:`consistent_intervals` (hot path for learners)."""
    xs = np.asarray(xs, dtype=float)
    labels = np.asarray(labels)
    if xs.shape != labels.shape:
        raise ValueError("points and labels must have equal length")
    order = np.lexsort((labels, xs))
    xs, labels = xs[order], labels[order]
    pos = labels == 1
    if not np.any(pos):
        return IntervalUnion.empty()
    # Runs of consecutive positives in sorted order.
    padded = np.concatenate(([False], pos, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[::2], edges[1::2]
    if len(starts) > klass.k:
        raise NonRealizableError(
            f"{len(starts)} positive runs exceed the class limit k={klass.k}"
        )
    return IntervalUnion([(xs[a], xs[b - 1]) for a, b in zip(starts, stops)])


def consistent_intervals(
    sample: Sequence[LabeledPoint], klass: IntervalUnionClass
) -> IntervalUnion:
    """Zero-empirical-error hypothesis with at most k intervals.

    Deterministic tie-break: sort points by position, cover each maximal run
    of consecutive positive labels with the tightest closed interval
    [min, max] of that run.  An all-negative sample yields the empty union.

    Raises :class:`NonRealizableError` when the positive runs cannot fit in
    k intervals.
    """
    xs = np.asarray([p.x for p in sample], dtype=float)
    labels = np.asarray([p.label for p in sample], dtype=np.int64)
    return fit_consistent(xs, labels, klass)


def auto_label_valid(S: np.ndarray) -> list[LabeledPoint]:
    """Label every point positive without spending oracle queries.

    Only sound when the points were drawn from a fully-valid source.
    """
    return [LabeledPoint(float(x), 1) for x in np.asarray(S, dtype=float)]


def label_with_oracle(S: np.ndarray, oracle: ValidityOracle) -> list[LabeledPoint]:
    """Label points by oracle queries (one query per point)."""
    xs = np.asarray(S, dtype=float)
    labels = oracle.query_many(xs)
    return [LabeledPoint(float(x), int(l)) for x, l in zip(xs, labels)]

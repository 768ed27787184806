import numpy as np
import pytest

from validlearn import (
    IntervalUnion,
    IntervalUnionClass,
    LabeledPoint,
    NonRealizableError,
    ValidityOracle,
    auto_label_valid,
    consistent_intervals,
    disagreement_mass,
    label_with_oracle,
    sample,
)
from validlearn.learners import n_vc_realizable

from conftest import random_density, random_region


class TestOracle:
    def test_full_region(self):
        o = ValidityOracle(IntervalUnion.full())
        assert o.query(0.37) == 1

    def test_outside(self):
        o = ValidityOracle(IntervalUnion([(0, 0.5)]))
        assert o.query(0.7) == 0

    def test_counter_counts_repeats(self):
        o = ValidityOracle(IntervalUnion([(0, 0.5)]))
        a, b = o.query(0.3), o.query(0.3)
        assert a == b == 1
        assert o.query_count == 2

    def test_out_of_range_does_not_count(self):
        o = ValidityOracle(IntervalUnion.full())
        with pytest.raises(ValueError):
            o.query(1.0)
        assert o.query_count == 0

    def test_batch_counts_each_point(self):
        o = ValidityOracle(IntervalUnion([(0, 0.5)]))
        labels = o.query_many(np.array([0.1, 0.6, 0.49]))
        assert list(labels) == [1, 0, 1]
        assert o.query_count == 3

    def test_reset(self):
        o = ValidityOracle(IntervalUnion.full())
        o.query(0.5)
        o.reset()
        assert o.query_count == 0


def test_vc_dimension():
    assert IntervalUnionClass(1).vc_dimension == 2
    assert IntervalUnionClass(3).vc_dimension == 6
    with pytest.raises(ValueError):
        IntervalUnionClass(0)


class TestConsistentIntervals:
    def test_all_positive_single_interval(self):
        pts = [LabeledPoint(x, 1) for x in (0.3, 0.1, 0.8)]
        h = consistent_intervals(pts, IntervalUnionClass(1))
        assert h.intervals == ((0.1, 0.8),)

    def test_two_runs(self):
        pts = [
            LabeledPoint(0.1, 1),
            LabeledPoint(0.2, 1),
            LabeledPoint(0.5, 0),
            LabeledPoint(0.7, 1),
        ]
        h = consistent_intervals(pts, IntervalUnionClass(2))
        assert h.intervals == ((0.1, 0.2), (0.7, 0.7))

    def test_three_runs_not_realizable_with_k2(self):
        pts = [
            LabeledPoint(0.1, 1),
            LabeledPoint(0.3, 0),
            LabeledPoint(0.5, 1),
            LabeledPoint(0.7, 0),
            LabeledPoint(0.9, 1),
        ]
        with pytest.raises(NonRealizableError):
            consistent_intervals(pts, IntervalUnionClass(2))

    def test_empty_positive_returns_empty(self):
        pts = [LabeledPoint(0.2, 0), LabeledPoint(0.6, 0)]
        assert consistent_intervals(pts, IntervalUnionClass(2)).is_empty
        assert consistent_intervals([], IntervalUnionClass(2)).is_empty

    def test_zero_empirical_error(self, rng):
        # replay: the returned hypothesis misclassifies no sample point
        for _ in range(50):
            W = random_region(rng)
            xs = rng.random(80)
            labels = W.contains_many(xs).astype(int)
            k = max(W.count, 1)
            h = consistent_intervals(
                [LabeledPoint(float(x), int(l)) for x, l in zip(xs, labels)],
                IntervalUnionClass(k),
            )
            assert (h.contains_many(xs).astype(int) == labels).all()

    def test_tightness(self, rng):
        # every returned endpoint is a positive sample point: shrinking any
        # interval past it would misclassify that point
        xs = rng.random(60)
        W = IntervalUnion([(0.2, 0.4), (0.6, 0.9)])
        labels = W.contains_many(xs).astype(int)
        h = consistent_intervals(
            [LabeledPoint(float(x), int(l)) for x, l in zip(xs, labels)],
            IntervalUnionClass(2),
        )
        positives = set(xs[labels == 1].tolist())
        for a, b in h.intervals:
            assert a in positives and b in positives

    def test_run_bound_realizable_never_fires(self, rng):
        # labels from a true region with k* intervals: positive runs <= k*
        for _ in range(50):
            W = random_region(rng)
            if W.is_empty:
                continue
            xs = rng.random(100)
            labels = W.contains_many(xs).astype(int)
            h = consistent_intervals(
                [LabeledPoint(float(x), int(l)) for x, l in zip(xs, labels)],
                IntervalUnionClass(max(W.count, 1)),
            )
            assert h.count <= W.count


class TestAutoLabel:
    def test_empty(self):
        assert auto_label_valid(np.array([])) == []

    def test_all_positive_no_queries(self):
        pts = auto_label_valid(np.array([0.1, 0.5, 0.9, 0.2, 0.3]))
        assert len(pts) == 5 and all(p.label == 1 for p in pts)

    def test_pools_with_oracle_labels(self):
        o = ValidityOracle(IntervalUnion([(0, 0.5)]))
        pooled = auto_label_valid(np.array([0.1, 0.2])) + label_with_oracle(
            np.array([0.6, 0.3]), o
        )
        assert o.query_count == 2
        h = consistent_intervals(pooled, IntervalUnionClass(1))
        assert h.intervals == ((0.1, 0.3),)


def test_pac_rate(rng):
    # with n = ceil(c3 (2k ln(1/eps) + ln(1/delta)) / eps) labeled points
    # from q, the fitted region disagrees with the truth by at most eps
    # under q, in at least a 1-delta fraction of replications
    eps, delta, k = 0.1, 0.1, 2
    W = IntervalUnion([(0.1, 0.35), (0.5, 0.8)])
    q = random_density(rng, allow_zeros=False)
    n = n_vc_realizable(2 * k, eps, delta)
    reps, fails = 200, 0
    for r in range(reps):
        local = np.random.default_rng((2026, r))
        xs = sample(q, local, n)
        labels = W.contains_many(xs).astype(int)
        h = consistent_intervals(
            [LabeledPoint(float(x), int(l)) for x, l in zip(xs, labels)],
            IntervalUnionClass(k),
        )
        if disagreement_mass(q, h, W) > eps:
            fails += 1
    assert fails / reps <= delta + 3 * np.sqrt(delta * (1 - delta) / reps)

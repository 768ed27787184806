import numpy as np
import pytest

from validlearn import IntervalUnion


class TestCanonicalization:
    def test_merges_overlapping(self):
        u = IntervalUnion([(0.0, 0.4), (0.3, 0.6)])
        assert u.intervals == ((0.0, 0.6),)

    def test_merges_touching(self):
        u = IntervalUnion([(0.0, 0.3), (0.3, 0.5)])
        assert u.intervals == ((0.0, 0.5),)

    def test_sorts(self):
        u = IntervalUnion([(0.6, 0.8), (0.1, 0.2)])
        assert u.intervals == ((0.1, 0.2), (0.6, 0.8))

    def test_strict_disjointness_after_merge(self):
        u = IntervalUnion([(0.0, 0.2), (0.5, 0.7), (0.65, 0.9)])
        for (_, b), (a2, _) in zip(u.intervals, u.intervals[1:]):
            assert b < a2

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            IntervalUnion([(-0.1, 0.5)])
        with pytest.raises(ValueError):
            IntervalUnion([(0.5, 1.2)])
        with pytest.raises(ValueError):
            IntervalUnion([(0.7, 0.2)])

    def test_zero_length_interval_kept(self):
        u = IntervalUnion([(0.5, 0.5)])
        assert u.total_length() == 0.0
        assert u.contains(0.5)
        assert not u.contains(0.5 + 1e-9)


class TestMembership:
    def test_closed_endpoints(self):
        u = IntervalUnion([(0.2, 0.4)])
        assert u.contains(0.2) and u.contains(0.4)
        assert not u.contains(0.2 - 1e-12) and not u.contains(0.4 + 1e-12)

    def test_empty(self):
        u = IntervalUnion.empty()
        assert u.is_empty and u.count == 0
        assert not u.contains_many(np.linspace(0, 1, 11)).any()

    def test_full(self):
        u = IntervalUnion.full()
        assert u.contains_many(np.linspace(0, 1, 11)).all()

    def test_contains_many_matches_scalar(self):
        u = IntervalUnion([(0.1, 0.3), (0.6, 0.6), (0.7, 0.9)])
        xs = np.array([0.0, 0.1, 0.2, 0.3, 0.5, 0.6, 0.65, 0.7, 0.95, 1.0])
        batch = u.contains_many(xs)
        assert list(batch) == [u.contains(float(x)) for x in xs]


def test_serialization_round_trip():
    u = IntervalUnion([(0.1, 0.25), (0.5, 0.755)])
    assert IntervalUnion.from_dict(u.to_dict()) == u


def test_length_sums_components():
    u = IntervalUnion([(0.0, 0.25), (0.5, 0.75)])
    assert u.total_length() == 0.5

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from validlearn import (
    IntervalUnion,
    LossSpec,
    PiecewiseDensity,
    ZERO_MASS,
    ZeroMass,
    density_at,
    disagreement_mass,
    empirical_loss,
    expected_loss,
    expected_loss_on,
    invalidity,
    kl,
    mix,
    refine,
    restrict,
    sample,
    support_clipped_loss,
    tv,
    uniform,
)

from conftest import random_density, random_region

TOL = 1e-12

U = uniform()
HALF = PiecewiseDensity([0, 0.5, 1], [0.5, 0.5])
SKEW = PiecewiseDensity([0, 0.5, 1], [0.25, 0.75])
LEFT = PiecewiseDensity([0, 0.5, 1], [1.0, 0.0])


@st.composite
def densities(draw, max_cells=6):
    m = draw(st.integers(1, max_cells))
    cuts = draw(
        st.lists(
            st.floats(0.01, 0.99, allow_nan=False),
            min_size=m - 1,
            max_size=m - 1,
            unique=True,
        )
    )
    grid = sorted([0.0, 1.0] + cuts)
    raw = draw(
        st.lists(st.floats(0.01, 1.0), min_size=len(grid) - 1, max_size=len(grid) - 1)
    )
    total = sum(raw)
    return PiecewiseDensity(grid, [r / total for r in raw])


class TestConstruction:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            PiecewiseDensity([0, 1], [0.9])  # bad total
        with pytest.raises(ValueError):
            PiecewiseDensity([0, 0.5], [1.0])  # must end at 1
        with pytest.raises(ValueError):
            PiecewiseDensity([0, 0.5, 0.5, 1], [0.5, 0.0, 0.5])  # not strict
        with pytest.raises(ValueError):
            PiecewiseDensity([0, 0.5, 1], [-0.1, 1.1])  # negative mass

    def test_density_bounds(self):
        d = PiecewiseDensity([0, 0.25, 0.75, 1], [0.5, 0.0, 0.5])
        assert d.min_positive_density == 2.0
        assert d.max_density == 2.0

    def test_serialization_round_trip_value_exact(self, rng):
        import json

        for _ in range(50):
            d = random_density(rng)
            back = PiecewiseDensity.from_dict(json.loads(json.dumps(d.to_dict())))
            assert back == d  # exact field equality through the text form


class TestDensityAt:
    def test_uniform_is_one(self):
        assert density_at(U, 0.3) == 1.0

    def test_worked_values(self):
        assert density_at(SKEW, 0.7) == 1.5
        assert density_at(SKEW, 0.2) == 0.5

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            density_at(U, 1.0)
        with pytest.raises(ValueError):
            density_at(U, -0.01)


class TestRefine:
    def test_identical_grids_returned_as_is(self):
        a, b = refine(SKEW, SKEW)
        assert a is SKEW and b is SKEW

    def test_union_grid(self):
        a = PiecewiseDensity([0, 0.5, 1], [0.5, 0.5])
        b = PiecewiseDensity([0, 0.25, 1], [0.25, 0.75])
        ra, rb = refine(a, b)
        assert ra.breakpoints == (0.0, 0.25, 0.5, 1.0)
        assert rb.breakpoints == (0.0, 0.25, 0.5, 1.0)
        # masses split proportionally to cell length
        assert abs(ra.masses[0] - 0.25) < TOL and abs(ra.masses[1] - 0.25) < TOL

    def test_uniform_regrids_by_length(self):
        _, ru = refine(SKEW, U)
        assert all(
            abs(m - l) < TOL for m, l in zip(ru.masses, np.diff(ru.breakpoints))
        )

    def test_represents_same_distribution(self, rng):
        for _ in range(30):
            a, b = random_density(rng), random_density(rng)
            ra, rb = refine(a, b)
            assert tv(a, ra) <= TOL and tv(b, rb) <= TOL


class TestMix:
    def test_zero_weight_identity(self):
        assert mix(SKEW, U, 0.0) is SKEW

    def test_self_mix(self):
        assert tv(mix(U, U, 0.3), U) <= TOL

    def test_worked_example(self):
        m = mix(LEFT, U, 0.25)
        assert np.allclose(m.densities, [1.75, 0.25], atol=TOL)

    def test_density_is_convex_combination(self, rng):
        for _ in range(20):
            a, b = random_density(rng), random_density(rng)
            w = float(rng.random())
            m = mix(a, b, w)
            xs = rng.random(50)
            expect = (1 - w) * a.density_at_many(xs) + w * b.density_at_many(xs)
            assert np.allclose(m.density_at_many(xs), expect, atol=1e-10)

    def test_mixture_log_loss_stability(self, rng):
        # ln(1/f_mix) <= eps + ln(1/f_a) pointwise when the other component
        # is uniform with weight eps/2 <= 1/2.
        for _ in range(50):
            a = random_density(rng)
            eps = float(rng.uniform(0.0, 1.0))
            m = mix(a, U, eps / 2.0)
            fa = a.densities
            fm = m.density_at_many(
                0.5 * (np.asarray(m.breakpoints[:-1]) + np.asarray(m.breakpoints[1:]))
            )
            fa_on_m = a.density_at_many(
                0.5 * (np.asarray(m.breakpoints[:-1]) + np.asarray(m.breakpoints[1:]))
            )
            with np.errstate(divide="ignore"):
                lhs = -np.log(fm)
                rhs = eps + -np.log(fa_on_m)
            assert (lhs <= rhs + TOL).all()


class TestRestrict:
    def test_uniform_to_half(self):
        r = restrict(U, IntervalUnion([(0, 0.5)]))
        assert density_at(r, 0.25) == 2.0 and density_at(r, 0.75) == 0.0

    def test_empty_region_zero_mass(self):
        assert isinstance(restrict(SKEW, IntervalUnion.empty()), ZeroMass)
        assert restrict(SKEW, IntervalUnion.empty()) is ZERO_MASS

    def test_renormalizes(self):
        r = restrict(SKEW, IntervalUnion([(0, 0.5)]))
        assert density_at(r, 0.2) == 2.0

    def test_no_mass_in_region(self):
        assert isinstance(restrict(LEFT, IntervalUnion([(0.75, 1.0)])), ZeroMass)

    def test_true_region_restriction_fully_valid(self, rng):
        for _ in range(50):
            q = random_density(rng)
            W = random_region(rng)
            r = restrict(q, W)
            if isinstance(r, ZeroMass):
                continue
            assert invalidity(r, W) <= TOL


class TestTV:
    def test_identity(self):
        assert tv(SKEW, SKEW) == 0.0

    def test_disjoint_supports(self):
        right = PiecewiseDensity([0, 0.5, 1], [0.0, 1.0])
        assert tv(LEFT, right) == 1.0

    def test_worked_example(self):
        assert abs(tv(HALF, SKEW) - 0.25) <= TOL

    @settings(max_examples=60, deadline=None)
    @given(densities(), densities(), densities())
    def test_metric_properties(self, a, b, c):
        assert tv(a, b) == tv(b, a)
        assert tv(a, a) == 0.0
        assert tv(a, c) <= tv(a, b) + tv(b, c) + TOL
        assert 0.0 <= tv(a, b) <= 1.0 + TOL


class TestKL:
    def test_identity(self):
        assert kl(SKEW, SKEW) == 0.0

    def test_infinite_on_missing_support(self):
        assert kl(HALF, LEFT) == math.inf

    def test_worked_example(self):
        expect = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        assert abs(kl(HALF, SKEW) - expect) <= TOL

    @settings(max_examples=60, deadline=None)
    @given(densities(), densities())
    def test_pinsker(self, p, q):
        k = kl(p, q)
        assert k >= -TOL
        if math.isfinite(k):
            assert tv(p, q) <= math.sqrt(k / 2.0) + TOL


class TestExpectedLoss:
    def test_uniform_log_loss_zero(self):
        assert expected_loss(U, U, LossSpec.log()) == 0.0

    def test_worked_example(self):
        expect = 0.5 * math.log(2) + 0.5 * math.log(1 / 1.5)
        assert abs(expected_loss(HALF, SKEW, LossSpec.log()) - expect) <= TOL

    def test_infinite_when_mass_off_support(self):
        assert expected_loss(HALF, LEFT, LossSpec.log()) == math.inf

    def test_matches_monte_carlo(self, rng):
        P, q = random_density(rng, allow_zeros=False), random_density(
            rng, allow_zeros=False
        )
        exact = expected_loss(P, q, LossSpec.log())
        S = sample(P, rng, 200_000)
        mc = empirical_loss(S, q, LossSpec.log())
        assert abs(exact - mc) < 0.05


class TestEmpiricalLoss:
    def test_uniform_zero(self):
        assert empirical_loss(np.array([0.1, 0.9]), U, LossSpec.log()) == 0.0

    def test_worked_example(self):
        S = np.array([0.1, 0.6])
        expect = (math.log(2) + math.log(1 / 1.5)) / 2
        assert abs(empirical_loss(S, SKEW, LossSpec.log()) - expect) <= TOL

    def test_infinite_on_zero_density_point(self):
        assert empirical_loss(np.array([0.75]), LEFT, LossSpec.log()) == math.inf

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            empirical_loss(np.array([]), U, LossSpec.log())


class TestInvalidity:
    def test_uniform(self):
        assert abs(invalidity(U, IntervalUnion([(0, 0.9)])) - 0.1) <= TOL

    def test_full_region_zero(self, rng):
        for _ in range(10):
            q = random_density(rng)
            assert invalidity(q, IntervalUnion.full()) == 0.0

    def test_lower_bound_pair_value(self):
        # uniform on [2 eps2, 1] against valid region [0, 1 - 2 eps2]
        eps2 = 0.1
        pt = PiecewiseDensity([0.0, 0.2, 0.8, 1.0], [0.0, 0.75, 0.25])
        w = IntervalUnion([(0.0, 0.8)])
        assert abs(invalidity(pt, w) - 2 * eps2 / (1 - 2 * eps2)) <= TOL

    def test_separation_from_fully_valid(self, rng):
        # invalid mass above eps forces total variation above eps
        for _ in range(100):
            W = random_region(rng)
            if W.is_empty:
                continue
            P = restrict(random_density(rng), W)
            if isinstance(P, ZeroMass):
                continue
            q = random_density(rng)
            eps = invalidity(q, W)
            if eps > 0:
                assert tv(P, q) > eps - TOL


class TestDisagreementMass:
    def test_equal_hypotheses(self, rng):
        h = random_region(rng)
        q = random_density(rng)
        assert disagreement_mass(q, h, h) == 0.0

    def test_uniform_worked(self):
        h1, h2 = IntervalUnion([(0, 0.5)]), IntervalUnion([(0, 0.6)])
        assert abs(disagreement_mass(U, h1, h2) - 0.1) <= TOL

    def test_skew_worked(self):
        h1, h2 = IntervalUnion.full(), IntervalUnion([(0, 0.5)])
        assert abs(disagreement_mass(SKEW, h1, h2) - 0.75) <= TOL


class TestSupportClippedLoss:
    def test_uniform(self):
        assert support_clipped_loss(U, U) == 0.0

    def test_worked_examples(self):
        assert abs(support_clipped_loss(U, LEFT) - 0.5 * math.log(0.5)) <= TOL
        expect = 0.25 * math.log(2) + 0.75 * math.log(1 / 1.5)
        assert abs(support_clipped_loss(SKEW, SKEW) - expect) <= TOL

    def test_always_finite(self, rng):
        for _ in range(50):
            P, q = random_density(rng), random_density(rng)
            assert math.isfinite(support_clipped_loss(P, q))


class TestRestrictionBounds:
    def test_invalidity_bound(self, rng):
        # dis(q, h, W) <= V_hat * eps / 2 with V_hat <= V(q) forces the
        # restricted model's invalid mass below eps.
        checked = 0
        while checked < 200:
            q = random_density(rng)
            W = random_region(rng)
            h = random_region(rng)
            v_q = 1.0 - invalidity(q, W)
            if v_q <= 0:
                continue
            r = restrict(q, h)
            if isinstance(r, ZeroMass):
                continue
            eps = 2.0 * disagreement_mass(q, h, W) / v_q
            if eps >= 1.0:
                continue
            checked += 1
            assert invalidity(r, W) <= eps + TOL

    def test_agreement_loss_bound(self, rng):
        # On the agreement region of (h, W), the restricted model's loss
        # under a fully-valid data law never exceeds the unrestricted loss.
        losses = [LossSpec.hinge(), LossSpec.table([0.0, 0.4, 1.5], [3.0, 1.0, 0.2])]
        checked = 0
        while checked < 200:
            q = random_density(rng)
            W = random_region(rng)
            h = random_region(rng)
            P = restrict(random_density(rng), W)
            if isinstance(P, ZeroMass):
                continue
            r = restrict(q, h)
            if isinstance(r, ZeroMass):
                continue
            agree = _agreement(h, W)
            loss = losses[checked % 2]
            assert (
                expected_loss_on(P, r, loss, agree)
                <= expected_loss(P, q, loss) + TOL
            )
            checked += 1


def _agreement(h, W):
    pts = np.unique(np.concatenate([[0.0, 1.0], h.endpoints(), W.endpoints()]))
    ivals = []
    for a, b in zip(pts[:-1], pts[1:]):
        m = 0.5 * (a + b)
        if h.contains(m) == W.contains(m):
            ivals.append((a, b))
    return IntervalUnion(ivals)


class TestSampling:
    def test_point_cell(self, rng):
        d = PiecewiseDensity([0, 0.4, 0.5, 1], [0.0, 1.0, 0.0])
        xs = sample(d, rng, 1000)
        assert ((xs >= 0.4) & (xs < 0.5)).all()

    def test_empty(self, rng):
        assert len(sample(U, rng, 0)) == 0

    def test_cell_frequencies(self, rng):
        d = PiecewiseDensity([0, 0.2, 0.5, 1], [0.3, 0.2, 0.5])
        n = 100_000
        xs = sample(d, rng, n)
        counts = np.histogram(xs, bins=[0, 0.2, 0.5, 1])[0] / n
        assert np.all(np.abs(counts - np.array(d.masses)) <= 4 / math.sqrt(n))

    def test_deterministic_given_seed(self):
        a = sample(SKEW, np.random.default_rng(7), 100)
        b = sample(SKEW, np.random.default_rng(7), 100)
        assert np.array_equal(a, b)

    def test_in_domain(self, rng):
        for _ in range(20):
            d = random_density(rng)
            xs = sample(d, rng, 500)
            assert ((xs >= 0) & (xs < 1)).all()


class TestNormalizationInvariant:
    def test_all_returning_ops(self, rng):
        for _ in range(50):
            a, b = random_density(rng), random_density(rng)
            outs = [mix(a, b, float(rng.random())), *refine(a, b)]
            r = restrict(a, random_region(rng))
            if not isinstance(r, ZeroMass):
                outs.append(r)
            for d in outs:
                assert abs(math.fsum(d.masses) - 1.0) <= TOL

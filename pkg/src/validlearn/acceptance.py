"""Named verification suites runnable from the CLI (``validlearn verify``).

Each suite checks one family of guarantees at a pinned tolerance and
returns a single pass/fail line.  Monte Carlo suites compare observed
failure frequencies against their target plus three binomial standard
errors; exact suites assert at 1e-12.  The suites are also exercised from
the pytest tree, so ``pytest`` green implies ``verify all`` green.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .densities import (
    PiecewiseDensity,
    ZeroMass,
    disagreement_mass,
    expected_loss,
    expected_loss_on,
    invalidity,
    kl,
    restrict,
    tv,
    uniform,
)
from .exactcheck import ProductTVReport, flip_probability
from .experiments import (
    ExperimentConfig,
    RunRecord,
    build_instance,
    lower_bound_experiment,
    run_experiment,
)
from .intervals import IntervalUnion
from .learners import LearnParams, n_vc_realizable
from .losses import LossSpec

__all__ = ["CriterionResult", "SUITES", "run_suite", "run_all"]

_TOL = 1e-12


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    detail: str
    records: list[RunRecord] = field(default_factory=list)
    product_rows: list[tuple] = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.key}: {self.title} -- {self.detail}"


def _three_sigma(p: float, reps: int) -> float:
    return 3.0 * math.sqrt(p * (1.0 - p) / reps)


def _random_density(rng: np.random.Generator, max_cells: int = 8) -> PiecewiseDensity:
    m = int(rng.integers(1, max_cells + 1))
    cuts = np.sort(rng.random(m - 1))
    grid = np.concatenate([[0.0], cuts, [1.0]])
    grid = np.unique(grid)
    raw = rng.random(len(grid) - 1)
    if rng.random() < 0.3 and len(raw) > 1:
        raw[rng.integers(0, len(raw))] = 0.0
    if raw.sum() == 0.0:
        raw[0] = 1.0
    return PiecewiseDensity(grid, raw / raw.sum())


# ---------------------------------------------------------------------------
# 1. exact functional unit suite
# ---------------------------------------------------------------------------


def suite_exact() -> CriterionResult:
    """Worked values for the core functionals plus metric/Pinsker properties
    on a thousand random pairs."""
    u = uniform()
    half = PiecewiseDensity([0, 0.5, 1], [0.5, 0.5])
    skew = PiecewiseDensity([0, 0.5, 1], [0.25, 0.75])
    checks = [
        abs(skew.density_at_many(np.array([0.7]))[0] - 1.5) <= _TOL,
        abs(skew.density_at_many(np.array([0.2]))[0] - 0.5) <= _TOL,
        abs(tv(half, skew) - 0.25) <= _TOL,
        abs(kl(half, skew) - (0.5 * math.log(2) + 0.5 * math.log(2.0 / 3.0))) <= _TOL,
        abs(
            expected_loss(half, skew, LossSpec.log())
            - (0.5 * math.log(2) + 0.5 * math.log(1 / 1.5))
        )
        <= _TOL,
        abs(invalidity(u, IntervalUnion([(0, 0.9)])) - 0.1) <= _TOL,
        isinstance(restrict(skew, IntervalUnion.empty()), ZeroMass),
    ]
    restricted = restrict(skew, IntervalUnion([(0, 0.5)]))
    checks.append(abs(restricted.density_at_many(np.array([0.2]))[0] - 2.0) <= _TOL)

    rng = np.random.default_rng(20260811)
    worst_pinsker = 0.0
    worst_triangle = 0.0
    for _ in range(1000):
        a, b, c = (_random_density(rng) for _ in range(3))
        t_ab, t_bc, t_ac = tv(a, b), tv(b, c), tv(a, c)
        if tv(a, b) != tv(b, a) or tv(a, a) != 0.0:
            checks.append(False)
        worst_triangle = max(worst_triangle, t_ac - (t_ab + t_bc))
        k = kl(a, b)
        if math.isfinite(k):
            worst_pinsker = max(worst_pinsker, t_ab - math.sqrt(k / 2.0))
    checks.append(worst_triangle <= _TOL)
    checks.append(worst_pinsker <= _TOL)
    passed = all(checks)
    return CriterionResult(
        "exact",
        "exact functionals and metric/Pinsker properties",
        passed,
        f"worked values ok, triangle slack {worst_triangle:.2e}, "
        f"pinsker slack {worst_pinsker:.2e}",
    )


# ---------------------------------------------------------------------------
# 2. empirical-loss flip rate under a fixed total-variation gap
# ---------------------------------------------------------------------------


def suite_erm_test() -> CriterionResult:
    """With tv(P, q) = 0.2 and n = 116 = ceil(2 ln(1/0.1) / 0.2^2), the
    fraction of samples scoring q at least as well as P stays below
    0.1 + 3 sigma."""
    P = PiecewiseDensity([0, 0.5, 1], [0.5, 0.5])
    q = PiecewiseDensity([0, 0.5, 1], [0.3, 0.7])
    delta, reps, n = 0.1, 2000, 116
    est = flip_probability(P, q, n, reps, np.random.default_rng(42))
    bound = delta + _three_sigma(delta, reps)
    passed = abs(tv(P, q) - 0.2) <= _TOL and est.frequency <= bound
    return CriterionResult(
        "erm-test",
        "loss-flip rate under a 0.2 total-variation gap",
        passed,
        f"flip {est.frequency:.4f} <= {bound:.4f} at n={n}, reps={reps}",
    )


# ---------------------------------------------------------------------------
# 3. likelihood-ratio flip rate under invalid mass
# ---------------------------------------------------------------------------


def suite_lrt() -> CriterionResult:
    """A model with invalid mass 0.5 against a fully-valid data law flips
    at rate at most exp(-n/2) plus binomial slack."""
    third = 1.0 / 3.0
    P = PiecewiseDensity([0, third, 2 * third, 1], [0.5, 0.5, 0.0])
    q = PiecewiseDensity([0, third, 2 * third, 1], [0.5, 0.0, 0.5])
    valid = IntervalUnion([(0.0, 2 * third)])
    inv = invalidity(q, valid)
    reps = 10_000
    details = []
    passed = abs(inv - 0.5) <= _TOL and invalidity(P, valid) <= _TOL
    for i, n in enumerate((5, 10)):
        est = flip_probability(P, q, n, reps, np.random.default_rng((99, i)))
        bound = math.exp(-n * inv) + _three_sigma(math.exp(-n * inv), reps)
        passed = passed and est.frequency <= bound
        details.append(f"n={n}: {est.frequency:.5f} <= {bound:.5f}")
    return CriterionResult(
        "lrt",
        "likelihood-ratio flip rate under 0.5 invalid mass",
        passed,
        "; ".join(details),
    )


# ---------------------------------------------------------------------------
# 4. product-measure total-variation sandwich
# ---------------------------------------------------------------------------


def _random_valid_invalid_pair(
    rng: np.random.Generator,
) -> tuple[PiecewiseDensity, PiecewiseDensity, float]:
    m = int(rng.integers(2, 7))
    grid = np.concatenate([[0.0], np.sort(rng.random(m - 1)), [1.0]])
    grid = np.unique(grid)
    m = len(grid) - 1
    n_valid = int(rng.integers(1, m))
    raw_p = rng.random(m)
    raw_p[n_valid:] = 0.0
    P = PiecewiseDensity(grid, raw_p / raw_p.sum())
    tau = float(rng.uniform(0.05, 0.95))
    raw_q = rng.random(m)
    q_masses = np.zeros(m)
    q_masses[:n_valid] = raw_q[:n_valid] / raw_q[:n_valid].sum() * (1 - tau)
    q_masses[n_valid:] = raw_q[n_valid:] / raw_q[n_valid:].sum() * tau
    q = PiecewiseDensity(grid, q_masses)
    return P, q, tau


def suite_product_tv() -> CriterionResult:
    """Exact n-fold enumeration sits between the closed-form lower and
    upper bounds, and beats the 1 - exp(-n eps) margin on valid/invalid
    pairs (tolerance 1e-12; the report type enforces the sandwich)."""
    rng = np.random.default_rng(4040)
    rows = []
    try:
        for _ in range(200):
            m = int(rng.integers(2, 7))
            grid = np.unique(np.concatenate([[0.0], np.sort(rng.random(m - 1)), [1.0]]))
            raw_a, raw_b = rng.random(len(grid) - 1), rng.random(len(grid) - 1)
            a = PiecewiseDensity(grid, raw_a / raw_a.sum())
            b = PiecewiseDensity(grid, raw_b / raw_b.sum())
            n = int(rng.integers(1, 5))
            rows.append(ProductTVReport.build(a, b, n))
        margin_ok = True
        for _ in range(50):
            P, q, tau = _random_valid_invalid_pair(rng)
            n = int(rng.integers(1, 5))
            rep = ProductTVReport.build(P, q, n, invalid_mass_of_q=tau)
            rows.append(rep)
            margin_ok = margin_ok and rep.invalid_margin_lower <= rep.exact_tv + _TOL
        passed = margin_ok
        detail = f"{len(rows)} sandwich reports built, margins hold"
    except ValueError as e:
        passed, detail = False, f"sandwich violated: {e}"
    return CriterionResult(
        "product-tv",
        "product-measure total-variation sandwich and margins",
        passed,
        detail,
        product_rows=[],
    )


# ---------------------------------------------------------------------------
# 5. log-loss mixture learner end to end
# ---------------------------------------------------------------------------

_MIX_PROFILE = [
    0.0, 0.0, 0.0, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4,
    0.02, 0.08, 0.12, 0.25, 0.35, 0.45, 0.6, 0.01, 0.03, 0.07,
]


def suite_mixture_e2e() -> CriterionResult:
    """Realizable environments, |Q|=20, 16 bins: the mixture learner's
    bi-criteria failure rate stays within delta + 3 sigma over 500 runs and
    every output's log-loss is finite and at most ln(8 / min(eps1, eps2))."""
    params = LearnParams(eps1=0.2, eps2=0.05, delta=0.1, c1=2.0)
    records: list[RunRecord] = []
    cap = math.log(8.0 / params.eps_min)
    loss_cap_ok = True
    for seed in (101, 102, 103, 104, 105):
        cfg = ExperimentConfig(
            kind="alg1",
            name="mixture-e2e",
            reps=100,
            base_seed=seed,
            params=params,
            instance={
                "generator": "realizable",
                "seed": seed,
                "bins": 16,
                "size_q": 20,
                "invalidity_profile": _MIX_PROFILE,
                "k": 2,
            },
        )
        result = run_experiment(cfg)
        records.extend(result.records)
        inst = build_instance(cfg.instance)
        l_star = inst.optimal_loss
        for rec in result.records:
            loss_abs = rec.loss_gap + l_star
            loss_cap_ok = loss_cap_ok and math.isfinite(loss_abs) and loss_abs <= cap + _TOL
    reps = len(records)
    failures = sum(1 for r in records if not (r.success_loss and r.success_validity))
    bound = params.delta + _three_sigma(params.delta, reps)
    freq = failures / reps
    passed = freq <= bound and loss_cap_ok and all(r.n_queries == 0 for r in records)
    return CriterionResult(
        "mixture-e2e",
        "log-loss mixture learner bi-criteria guarantee",
        passed,
        f"failure {freq:.4f} <= {bound:.4f} over {reps} runs, "
        f"log-loss cap ln(8/eps)={cap:.3f} respected: {loss_cap_ok}",
        records=records,
    )


# ---------------------------------------------------------------------------
# 6. few-sample selection failure on the two-environment pair
# ---------------------------------------------------------------------------


def suite_lower_bound() -> CriterionResult:
    """At eps2 = 0.05 and n = 2 = floor(1/(8 eps2)), the worst-environment
    selection failure rate is at least 0.20; at n = 40000 it drops to
    at most 0.01."""
    small = lower_bound_experiment(0.05, 2, 10_000, base_seed=606)
    big = lower_bound_experiment(0.05, 40_000, 10_000, base_seed=607)
    worst_small = max(small.failure_freq)
    worst_big = max(big.failure_freq)
    passed = worst_small >= 0.20 and worst_big <= 0.01
    return CriterionResult(
        "lower-bound",
        "few-sample selection failure floor and large-sample consistency",
        passed,
        f"worst failure {worst_small:.4f} >= 0.20 at n=2; "
        f"{worst_big:.4f} <= 0.01 at n=40000",
    )


# ---------------------------------------------------------------------------
# 7. bounded-loss restriction learner end to end
# ---------------------------------------------------------------------------


def suite_restriction_e2e() -> CriterionResult:
    """Mismatched environments, k=2 (VC dim 4), gamma=0.5, hinge loss:
    bi-criteria failure within delta + 3 sigma over 300 runs, and every
    run spends exactly n_vc_realizable(4, gamma*eps2/2, delta) queries."""
    params = LearnParams(eps1=0.2, eps2=0.1, delta=0.1, M=1.0, gamma=0.5)
    expected_queries = n_vc_realizable(
        4, params.gamma * params.eps2 / 2.0, params.delta, params.c3
    )
    records: list[RunRecord] = []
    for seed in (211, 212, 213):
        cfg = ExperimentConfig(
            kind="alg2",
            name="restriction-e2e",
            reps=100,
            base_seed=seed,
            params=params,
            loss=LossSpec.hinge(),
            instance={
                "generator": "mismatched",
                "seed": seed,
                "bins": 16,
                "size_q": 6,
                "gamma_floor": 0.5,
                "beta_cap": 16.0,
                "k": 2,
            },
        )
        records.extend(run_experiment(cfg).records)
    reps = len(records)
    failures = sum(1 for r in records if not (r.success_loss and r.success_validity))
    bound = params.delta + _three_sigma(params.delta, reps)
    freq = failures / reps
    queries_ok = all(r.n_queries == expected_queries for r in records)
    passed = freq <= bound and queries_ok
    return CriterionResult(
        "restriction-e2e",
        "bounded-loss restriction learner bi-criteria guarantee",
        passed,
        f"failure {freq:.4f} <= {bound:.4f} over {reps} runs, "
        f"queries == {expected_queries} on every run: {queries_ok}",
        records=records,
    )


# ---------------------------------------------------------------------------
# 8. capped-log restriction learner end to end
# ---------------------------------------------------------------------------


def suite_capped_e2e() -> CriterionResult:
    """Environments whose capped-log ERM winner has validity zero
    (cap 4, reference validity 0.8, densities below 16): the mixed
    restriction stays defined (fallback rate <= delta), meets both
    criteria within delta + 3 sigma, and spends exactly
    n_vc_realizable(D, c*eps1*eps2/16, delta) queries."""
    params = LearnParams(eps1=0.2, eps2=0.1, delta=0.1, M=4.0)
    records: list[RunRecord] = []
    queries_ok = True
    beta_ok = True
    for seed in (307, 308, 309):
        cfg = ExperimentConfig(
            kind="alg3",
            name="capped-e2e",
            reps=100,
            base_seed=seed,
            params=params,
            instance={
                "generator": "capped_trap",
                "seed": seed,
                "bins": 20,
                "size_q": 6,
                "cap": 4.0,
                "k": 2,
            },
        )
        inst = build_instance(cfg.instance)
        beta_ok = beta_ok and inst.beta <= 16.0
        expected_queries = n_vc_realizable(
            inst.validity_class.vc_dimension,
            inst.d_ref_validity * params.eps1 * params.eps2 / 16.0,
            params.delta,
            params.c3,
        )
        result = run_experiment(cfg)
        records.extend(result.records)
        queries_ok = queries_ok and all(
            r.n_queries == expected_queries for r in result.records
        )
    reps = len(records)
    fallbacks = sum(1 for r in records if r.fallback_triggered)
    failures = sum(1 for r in records if not (r.success_loss and r.success_validity))
    bound = params.delta + _three_sigma(params.delta, reps)
    freq = failures / reps
    passed = (
        freq <= bound
        and fallbacks / reps <= params.delta
        and queries_ok
        and beta_ok
    )
    return CriterionResult(
        "capped-e2e",
        "capped-log restriction learner with a zero-validity ERM winner",
        passed,
        f"failure {freq:.4f} <= {bound:.4f}, fallback {fallbacks}/{reps}, "
        f"query formula exact: {queries_ok}",
        records=records,
    )


# ---------------------------------------------------------------------------
# 9. restriction lemmas, exact randomized suite
# ---------------------------------------------------------------------------


def _random_region_pair(
    rng: np.random.Generator, bins: int = 12
) -> tuple[IntervalUnion, IntervalUnion]:
    edges = np.arange(bins + 1) / bins
    flags = rng.random(bins) < 0.5
    if not flags.any():
        flags[int(rng.integers(0, bins))] = True
    # Perturb a few bins to build the hypothesis from the true region.
    h_flags = flags.copy()
    for j in np.flatnonzero(rng.random(bins) < 0.15):
        h_flags[j] = not h_flags[j]

    def to_union(f: np.ndarray) -> IntervalUnion:
        ivals = []
        j = 0
        while j < bins:
            if f[j]:
                j0 = j
                while j < bins and f[j]:
                    j += 1
                ivals.append((edges[j0], edges[j]))
            else:
                j += 1
        return IntervalUnion(ivals)

    return to_union(flags), to_union(h_flags)


def suite_restriction_exact() -> CriterionResult:
    """A thousand randomized (model, hypothesis, region) triples meeting the
    preconditions: restriction keeps invalid mass within the implied budget,
    and the agreement-region loss of the restricted model never exceeds the
    unrestricted expected loss (both at 1e-12)."""
    rng = np.random.default_rng(909)
    losses = [LossSpec.hinge(), LossSpec.table([0.0, 0.5, 1.0, 2.0], [2.0, 1.5, 0.6, 0.0])]
    bad_inv = 0
    bad_loss = 0
    tried = 0
    while tried < 1000:
        W, h = _random_region_pair(rng)
        q = _random_density(rng, max_cells=10)
        v_q = 1.0 - invalidity(q, W)
        dis = disagreement_mass(q, h, W)
        if v_q <= 0.0:
            continue
        restricted = restrict(q, h)
        if isinstance(restricted, ZeroMass):
            continue
        tried += 1
        # Invalidity bound at the tightest eps allowed by the precondition.
        v_hat = v_q
        eps = 2.0 * dis / v_hat if v_hat > 0 else 1.0
        if eps < 1.0 and invalidity(restricted, W) > eps + _TOL:
            bad_inv += 1
        # Loss bound: restricted loss on the agreement region vs total loss,
        # under a fully-valid data law.
        P_r = restrict(_random_density(rng, max_cells=8), W)
        if isinstance(P_r, ZeroMass):
            continue
        agree = _agreement_region(h, W)
        loss = losses[tried % 2]
        lhs = expected_loss_on(P_r, restricted, loss, agree)
        rhs = expected_loss(P_r, q, loss)
        if lhs > rhs + _TOL:
            bad_loss += 1
    passed = bad_inv == 0 and bad_loss == 0
    return CriterionResult(
        "restriction-exact",
        "restriction invalid-mass and agreement-loss bounds, exact",
        passed,
        f"1000 triples: {bad_inv} invalid-mass violations, "
        f"{bad_loss} loss violations",
    )


def _agreement_region(h: IntervalUnion, W: IntervalUnion) -> IntervalUnion:
    """Closure of {x : 1[x in h] == 1[x in W]} built on the joint endpoints."""
    pts = np.unique(np.concatenate([[0.0, 1.0], h.endpoints(), W.endpoints()]))
    ivals = []
    for a, b in zip(pts[:-1], pts[1:]):
        m = 0.5 * (a + b)
        if h.contains(m) == W.contains(m):
            ivals.append((a, b))
    return IntervalUnion(ivals)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

SUITES: dict[str, Callable[[], CriterionResult]] = {
    "exact": suite_exact,
    "erm-test": suite_erm_test,
    "lrt": suite_lrt,
    "product-tv": suite_product_tv,
    "mixture-e2e": suite_mixture_e2e,
    "lower-bound": suite_lower_bound,
    "restriction-e2e": suite_restriction_e2e,
    "capped-e2e": suite_capped_e2e,
    "restriction-exact": suite_restriction_exact,
}


def run_suite(name: str) -> CriterionResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name]()


def run_all() -> list[CriterionResult]:
    return [fn() for fn in SUITES.values()]

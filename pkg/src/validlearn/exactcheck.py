"""Brute-force and closed-form oracles for product-measure distances.

For piecewise-constant densities on a shared grid, the conditional law
within a cell is uniform for both distributions, so the total variation
between n-fold product measures reduces exactly to the total variation of
the discrete cell-index products.  That makes full enumeration feasible at
desk scale and provides an independent check of the analytic bounds used
throughout: the sub-Gaussian product lower bound, the n-fold subadditive
upper bound, and the 1 - exp(-n*eps) margin forced by invalid mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional

import numpy as np
from scipy import stats

from .densities import PiecewiseDensity, refine, sample, tv
from .losses import LossSpec

__all__ = [
    "ENUMERATION_BUDGET",
    "BudgetExceededError",
    "ProductTVReport",
    "FlipEstimate",
    "product_tv_exact",
    "reis_lower_bound",
    "product_tv_subadditive_upper",
    "invalid_product_margin",
    "flip_probability",
]

ENUMERATION_BUDGET = 10**7

_REPORT_TOL = 1e-12


class BudgetExceededError(ValueError):
    """Enumeration refused: the report carries the budget that was needed."""

    def __init__(self, needed: int) -> None:
        super().__init__(
            f"enumeration needs {needed} tuples, budget is {ENUMERATION_BUDGET}"
        )
        self.needed = needed


def product_tv_exact(P: PiecewiseDensity, q: PiecewiseDensity, n: int) -> float:
    """Exact total variation between the n-fold product measures.

    Enumerates all m^n cell-index tuples on the common grid (refused above
    the module budget).  n = 0 gives 0; n = 1 coincides with the single-copy
    total variation.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 0.0
    a, b = refine(P, q)
    m = a.num_cells
    needed = m**n
    if needed > ENUMERATION_BUDGET:
        raise BudgetExceededError(needed)
    mp = np.asarray(a.masses)
    mq = np.asarray(b.masses)
    prod_p = reduce(lambda acc, _: np.multiply.outer(acc, mp).ravel(), range(n - 1), mp)
    prod_q = reduce(lambda acc, _: np.multiply.outer(acc, mq).ravel(), range(n - 1), mq)
    return float(0.5 * np.abs(prod_p - prod_q).sum())


def reis_lower_bound(tv_single: float, n: int) -> float:
    """Product-measure lower bound 1 - exp(-n * tv^2 / 2)."""
    if not 0.0 <= tv_single <= 1.0:
        raise ValueError("total variation must lie in [0, 1]")
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 1.0 - math.exp(-n * tv_single * tv_single / 2.0)


def product_tv_subadditive_upper(tv_single: float, n: int) -> float:
    """Product-measure upper bound min(1, n * tv)."""
    if not 0.0 <= tv_single <= 1.0:
        raise ValueError("total variation must lie in [0, 1]")
    if n < 0:
        raise ValueError("n must be nonnegative")
    return min(1.0, n * tv_single)


def invalid_product_margin(eps: float, n: int) -> float:
    """Margin 1 - exp(-n * eps) forced when one law has > eps invalid mass
    and the other none."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 1.0 - math.exp(-n * eps)


@dataclass(frozen=True)
class ProductTVReport:
    """One sandwich evaluation: exact product TV against its bounds."""

    n: int
    tv_single: float
    exact_tv: float
    reis_lower: float
    subadditive_upper: float
    invalid_margin_lower: Optional[float] = None

    def __post_init__(self) -> None:
        if self.reis_lower > self.exact_tv + _REPORT_TOL:
            raise ValueError("product lower bound exceeds the exact value")
        if self.exact_tv > self.subadditive_upper + _REPORT_TOL:
            raise ValueError("exact value exceeds the subadditive upper bound")
        if (
            self.invalid_margin_lower is not None
            and self.invalid_margin_lower > self.exact_tv + _REPORT_TOL
        ):
            raise ValueError("invalid-mass margin exceeds the exact value")

    @classmethod
    def build(
        cls,
        P: PiecewiseDensity,
        q: PiecewiseDensity,
        n: int,
        invalid_mass_of_q: Optional[float] = None,
    ) -> "ProductTVReport":
        t = tv(P, q)
        margin = None
        if invalid_mass_of_q is not None and 0.0 < invalid_mass_of_q < 1.0:
            margin = invalid_product_margin(invalid_mass_of_q, n)
        return cls(
            n=n,
            tv_single=t,
            exact_tv=product_tv_exact(P, q, n),
            reis_lower=reis_lower_bound(t, n),
            subadditive_upper=product_tv_subadditive_upper(t, n),
            invalid_margin_lower=margin,
        )


@dataclass(frozen=True)
class FlipEstimate:
    """Monte Carlo frequency of the empirical-loss flip event, with CI."""

    reps: int
    flips: int
    frequency: float
    ci_low: float
    ci_high: float
    method: str

    def __str__(self) -> str:  # pragma: no cover
        return (
            f"{self.frequency:.5f} [{self.ci_low:.5f}, {self.ci_high:.5f}] "
            f"({self.flips}/{self.reps}, {self.method})"
        )


def _binomial_ci(
    flips: int, reps: int, level: float = 0.99, exact: bool = False
) -> tuple[float, float, str]:
    alpha = 1.0 - level
    if exact:
        lo = 0.0 if flips == 0 else float(stats.beta.ppf(alpha / 2, flips, reps - flips + 1))
        hi = (
            1.0
            if flips == reps
            else float(stats.beta.ppf(1 - alpha / 2, flips + 1, reps - flips))
        )
        return lo, hi, "clopper-pearson"
    z = float(stats.norm.ppf(1 - alpha / 2))
    phat = flips / reps
    half = z * math.sqrt(phat * (1 - phat) / reps) + 0.5 / reps
    return max(0.0, phat - half), min(1.0, phat + half), "normal"


def flip_probability(
    P: PiecewiseDensity,
    q: PiecewiseDensity,
    n: int,
    reps: int,
    rng: np.random.Generator,
    loss: Optional[LossSpec] = None,
    exact_ci: bool = False,
) -> FlipEstimate:
    """Frequency of {L_S(q) <= L_S(P)} over ``reps`` samples S of size n
    from P; ties count as flips (conservative for upper-bound checks).

    The confidence interval is two-sided at 99%: normal approximation with a
    continuity guard by default, exact binomial behind ``exact_ci``.
    """
    if reps < 100:
        raise ValueError("need at least 100 replications")
    if n < 1:
        raise ValueError("sample size must be positive")
    loss = loss if loss is not None else LossSpec.log()
    draws = sample(P, rng, reps * n).reshape(reps, n)
    flat = draws.ravel()
    vals_q = loss.values_at(q.density_at_many(flat)).reshape(reps, n)
    vals_p = loss.values_at(P.density_at_many(flat)).reshape(reps, n)
    flips = int(np.count_nonzero(vals_q.sum(axis=1) <= vals_p.sum(axis=1)))
    lo, hi, method = _binomial_ci(flips, reps, exact=exact_ci)
    return FlipEstimate(
        reps=reps,
        flips=flips,
        frequency=flips / reps,
        ci_low=lo,
        ci_high=hi,
        method=method,
    )

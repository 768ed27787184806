"""Model-selection procedures over a finite class of piecewise densities.

Three learners are provided, all built around empirical risk minimization:

* :func:`finite_log_loss` -- ERM under log-loss on samples from the data
  distribution, then mixed with the uniform distribution at weight
  min(eps1, eps2)/8 so the output has a density floor (hence finite
  log-loss) while the invalidity budget is preserved.  Uses zero validity
  queries.
* :func:`valid_restriction` -- ERM under a bounded loss, followed by
  restriction to a region hypothesis fitted on auto-labeled data samples
  plus oracle-labeled samples drawn from the ERM winner.
* :func:`valid_restriction_log` -- the capped-log variant that first mixes
  the ERM winner with a reference distribution of known validity, removing
  the need for a validity floor across the model class.

The sample/query-size calculators expose their leading constants (c1, c2,
c3) so every experiment can report the exact counts it used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .densities import (
    PiecewiseDensity,
    ZeroMass,
    empirical_loss,
    mix,
    restrict,
    sample,
    uniform,
)
from .intervals import IntervalUnion
from .losses import LossSpec
from .validity import IntervalUnionClass, ValidityOracle, fit_consistent

__all__ = [
    "LearnParams",
    "LearnOutcome",
    "SampleSource",
    "erm",
    "n_erm_realizable",
    "n_log_mixture",
    "n_loss_estimation",
    "n_vc_realizable",
    "finite_log_loss",
    "valid_restriction",
    "valid_restriction_log",
]

# A sampling handle: learners draw data through this, never from the true
# distribution object, so they cannot read exact masses.
SampleSource = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class LearnParams:
    """Learning targets and the constants behind every size formula.

    eps1 bounds the loss sub-optimality, eps2 the invalidity, delta the
    failure probability.  M caps bounded losses, gamma is the validity
    floor assumed across the model class where required.
    """

    eps1: float
    eps2: float
    delta: float
    M: float = 1.0
    gamma: float = 1.0
    c1: float = 2.0
    c2: float = 8.0
    c3: float = 4.0

    def __post_init__(self) -> None:
        for name in ("eps1", "eps2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("c1", "c2", "c3"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def eps_min(self) -> float:
        return min(self.eps1, self.eps2)

    def with_(self, **kwargs) -> "LearnParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class LearnOutcome:
    """Result of one learner run, with exact sample/query accounting."""

    model: PiecewiseDensity
    erm_index: int
    samples_used: int
    queries_used: int
    fallback_triggered: bool = False
    erm_all_infinite: bool = False


def erm(Q: Sequence[PiecewiseDensity], S: np.ndarray, loss: LossSpec) -> int:
    """Smallest index minimizing the empirical loss over the class.

    Infinite losses participate in the ordering, so a minimizer always
    exists; an all-infinite field ties at index 0.
    """
    if len(Q) == 0:
        raise ValueError("model class must be nonempty")
    losses = [empirical_loss(S, q, loss) for q in Q]
    return int(np.argmin(losses))


def _erm_with_losses(
    Q: Sequence[PiecewiseDensity], S: np.ndarray, loss: LossSpec
) -> tuple[int, list[float]]:
    losses = [empirical_loss(S, q, loss) for q in Q]
    return int(np.argmin(losses)), losses


# ---------------------------------------------------------------------------
# sample-size calculators (constants exposed)
# ---------------------------------------------------------------------------


def n_erm_realizable(size_Q: float, p: LearnParams) -> int:
    """Samples for ERM to hit both targets when the data law is in the class:
    ceil(c1 * (ln|Q| + ln(1/delta)) / min(eps1^2, eps2))."""
    if size_Q < 1:
        raise ValueError("class size must be at least 1")
    num = p.c1 * (math.log(size_Q) + math.log(1.0 / p.delta))
    return max(1, math.ceil(num / min(p.eps1**2, p.eps2)))


def n_log_mixture(size_Q: float, alpha: float, p: LearnParams) -> int:
    """Samples for the log-loss mixture guarantee: the realizable ERM count
    with an extra ln^2(1/min(eps1, eps2, alpha)) factor."""
    if size_Q < 1:
        raise ValueError("class size must be at least 1")
    if not 0.0 < alpha:
        raise ValueError("alpha must be positive")
    small = min(p.eps1, p.eps2, alpha)
    num = p.c1 * math.log(1.0 / small) ** 2 * (math.log(size_Q) + math.log(1.0 / p.delta))
    return max(1, math.ceil(num / min(p.eps1**2, p.eps2)))


def n_loss_estimation(M: float, size_Q: float, p: LearnParams) -> int:
    """Samples so all |Q| empirical bounded-loss estimates land within
    eps1/4 of truth: ceil(c2 * M^2 (ln|Q| + ln(2/delta)) / eps1^2)."""
    if not M > 0:
        raise ValueError("loss cap must be positive")
    if size_Q < 1:
        raise ValueError("class size must be at least 1")
    num = p.c2 * M * M * (math.log(size_Q) + math.log(2.0 / p.delta))
    return max(1, math.ceil(num / p.eps1**2))


def n_vc_realizable(D: int, eps: float, delta: float, c3: float = 4.0) -> int:
    """Realizable PAC count for VC dimension D at accuracy eps:
    ceil(c3 * (D ln(1/eps) + ln(1/delta)) / eps)."""
    if D < 1:
        raise ValueError("VC dimension must be at least 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("accuracy target must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    num = c3 * (D * math.log(1.0 / eps) + math.log(1.0 / delta))
    return max(1, math.ceil(num / eps))


# ---------------------------------------------------------------------------
# learners
# ---------------------------------------------------------------------------


def finite_log_loss(
    Q: Sequence[PiecewiseDensity],
    p_source: SampleSource,
    p: LearnParams,
    rng: np.random.Generator,
) -> LearnOutcome:
    """Log-loss ERM mixed with the uniform distribution at weight
    min(eps1, eps2)/8.

    The mixture puts a density floor of eps_min/8 everywhere, so the output
    has expected log-loss at most ln(8/eps_min) against any data law, while
    adding at most eps_min/8 invalidity.  Draws
    max(n_erm_realizable, n_log_mixture) samples and zero queries.
    """
    alpha = min(q.min_positive_density for q in Q)
    n = max(n_erm_realizable(len(Q), p), n_log_mixture(len(Q), alpha, p))
    S = p_source(rng, n)
    idx, losses = _erm_with_losses(Q, S, LossSpec.log())
    w = p.eps_min / 8.0
    return LearnOutcome(
        model=mix(Q[idx], uniform(), w),
        erm_index=idx,
        samples_used=n,
        queries_used=0,
        erm_all_infinite=all(math.isinf(v) for v in losses),
    )


def _fit_region(
    data_points: np.ndarray,
    model_points: np.ndarray,
    oracle: ValidityOracle,
    klass: IntervalUnionClass,
) -> IntervalUnion:
    """Pool auto-labeled data points with oracle-labeled model points and
    fit the consistent interval hypothesis."""
    model_labels = oracle.query_many(model_points)
    xs = np.concatenate([data_points, model_points])
    labels = np.concatenate(
        [np.ones(len(data_points), dtype=np.int64), model_labels]
    )
    return fit_consistent(xs, labels, klass)


def valid_restriction(
    Q: Sequence[PiecewiseDensity],
    vclass: IntervalUnionClass,
    p_source: SampleSource,
    oracle: ValidityOracle,
    loss: LossSpec,
    p: LearnParams,
    rng: np.random.Generator,
    known_validity_floor: Optional[float] = None,
) -> LearnOutcome:
    """Bounded-loss ERM restricted to a learned estimate of the valid region.

    Samples from the data source are auto-labeled valid; only the points
    drawn from the ERM winner cost oracle queries, at accuracy target
    gamma * eps2 / 2.  ``known_validity_floor``, when set, replaces gamma in
    that target (usable when every near-optimal model is known to have at
    least that much validity).  On a zero-mass restriction the ERM winner
    itself is returned with ``fallback_triggered``.
    """
    if loss.is_unbounded:
        raise ValueError("valid_restriction needs a bounded loss")
    M = loss.cap
    n_fit = n_loss_estimation(M, len(Q), p)
    S = p_source(rng, n_fit)
    idx, losses = _erm_with_losses(Q, S, loss)
    q_erm = Q[idx]

    n_data = n_vc_realizable(vclass.vc_dimension, p.eps1 / (2.0 * M), p.delta, p.c3)
    floor = p.gamma if known_validity_floor is None else known_validity_floor
    n_model = n_vc_realizable(
        vclass.vc_dimension, floor * p.eps2 / 2.0, p.delta, p.c3
    )
    S_data = p_source(rng, n_data)
    S_model = sample(q_erm, rng, n_model)
    before = oracle.query_count
    region = _fit_region(S_data, S_model, oracle, vclass)
    queries = oracle.query_count - before

    restricted = restrict(q_erm, region)
    fallback = isinstance(restricted, ZeroMass)
    return LearnOutcome(
        model=q_erm if fallback else restricted,
        erm_index=idx,
        samples_used=n_fit + n_data,
        queries_used=queries,
        fallback_triggered=fallback,
        erm_all_infinite=all(math.isinf(v) for v in losses),
    )


def valid_restriction_log(
    Q: Sequence[PiecewiseDensity],
    vclass: IntervalUnionClass,
    d_ref: PiecewiseDensity,
    d_ref_validity: float,
    p_source: SampleSource,
    oracle: ValidityOracle,
    p: LearnParams,
    rng: np.random.Generator,
) -> LearnOutcome:
    """Capped-log ERM mixed with a known-validity reference, then restricted.

    Mixing weight eps1/8 on ``d_ref`` (validity at least ``d_ref_validity``)
    guarantees the proposal has validity at least d_ref_validity * eps1 / 8
    even when every model in the class is fully invalid; the region estimate
    is fitted at the tighter accuracy d_ref_validity * eps1 * eps2 / 16
    under the proposal.  Falls back to the unmixed ERM winner on zero mass.
    """
    if not 0.0 < d_ref_validity <= 1.0:
        raise ValueError("reference validity must lie in (0, 1]")
    loss = LossSpec.capped_log(p.M)
    n_fit = n_loss_estimation(p.M, len(Q), p)
    S = p_source(rng, n_fit)
    idx, losses = _erm_with_losses(Q, S, loss)
    q_erm = Q[idx]
    proposal = mix(q_erm, d_ref, p.eps1 / 8.0)

    n_data = n_vc_realizable(vclass.vc_dimension, p.eps1 / (2.0 * p.M), p.delta, p.c3)
    target = d_ref_validity * p.eps1 * p.eps2 / 16.0
    n_model = n_vc_realizable(vclass.vc_dimension, target, p.delta, p.c3)
    S_data = p_source(rng, n_data)
    S_model = sample(proposal, rng, n_model)
    before = oracle.query_count
    region = _fit_region(S_data, S_model, oracle, vclass)
    queries = oracle.query_count - before

    restricted = restrict(proposal, region)
    fallback = isinstance(restricted, ZeroMass)
    return LearnOutcome(
        model=q_erm if fallback else restricted,
        erm_index=idx,
        samples_used=n_fit + n_data,
        queries_used=queries,
        fallback_triggered=fallback,
        erm_all_infinite=all(math.isinf(v) for v in losses),
    )

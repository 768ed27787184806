"""Constructors for reproducible problem environments.

An environment bundles the data distribution, the finite model class, the
true valid region with its hypothesis class, and the declared scalars
(validity floor, density bounds, reference validity) that the learners'
size formulas consume.  Generated regions are bin-aligned so every
functional of a generated instance is exact, with no refinement noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .densities import PiecewiseDensity, expected_loss, invalidity, sample, uniform
from .intervals import IntervalUnion
from .learners import SampleSource
from .losses import LossSpec
from .validity import IntervalUnionClass, ValidityOracle

__all__ = [
    "ProblemInstance",
    "ConstructionError",
    "make_realizable_instance",
    "make_lower_bound_instance",
    "make_mismatched_instance",
    "make_capped_trap_instance",
]

_TOL = 1e-12


class ConstructionError(ValueError):
    """An instance request is infeasible (e.g. no room for invalid mass)."""


@dataclass(frozen=True)
class ProblemInstance:
    """A full experiment environment; immutable and exactly self-consistent.

    ``gamma`` is the declared validity floor over the model class, ``alpha``
    and ``beta`` bracket every model density over its support, and
    ``q_star_index`` points at the smallest-index fully-valid loss minimizer
    under ``loss``.  ``validate`` re-derives each declaration from the exact
    functionals and raises on any mismatch.
    """

    kind: str
    P: PiecewiseDensity
    Q: tuple[PiecewiseDensity, ...]
    valid_region: IntervalUnion
    validity_class: IntervalUnionClass
    loss: LossSpec
    gamma: float
    alpha: float
    beta: float
    q_star_index: int
    d_ref: Optional[PiecewiseDensity] = None
    d_ref_validity: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "Q", tuple(self.Q))
        self.validate()

    # -- exact self-checks --------------------------------------------------
    def validate(self) -> None:
        if invalidity(self.P, self.valid_region) > _TOL:
            raise ConstructionError("data distribution is not fully valid")
        if self.kind == "realizable" and self.Q[0] != self.P:
            raise ConstructionError("realizable instances must place P at index 0")
        vals = [1.0 - invalidity(q, self.valid_region) for q in self.Q]
        if self.gamma > min(vals) + _TOL:
            raise ConstructionError("declared validity floor exceeds a model's validity")
        if self.alpha > min(q.min_positive_density for q in self.Q) + _TOL:
            raise ConstructionError("declared alpha above a support density")
        if self.beta < max(q.max_density for q in self.Q) - _TOL:
            raise ConstructionError("declared beta below a model density")
        if self.valid_region.count > self.validity_class.k:
            raise ConstructionError("valid region leaves the hypothesis class")
        if self.q_star_index != self._best_fully_valid_index():
            raise ConstructionError("q_star_index is not the fully-valid loss minimizer")
        if self.d_ref is not None:
            v_ref = 1.0 - invalidity(self.d_ref, self.valid_region)
            if self.d_ref_validity is None or v_ref < self.d_ref_validity - _TOL:
                raise ConstructionError("reference validity declaration is too high")

    def _best_fully_valid_index(self) -> int:
        best, best_loss = None, math.inf
        for i, q in enumerate(self.Q):
            if invalidity(q, self.valid_region) <= _TOL:
                l = expected_loss(self.P, q, self.loss)
                if l < best_loss:
                    best, best_loss = i, l
        if best is None:
            raise ConstructionError("no fully-valid model in the class")
        return best

    # -- learner-facing handles ----------------------------------------------
    def p_source(self) -> SampleSource:
        """Sampling handle for the data distribution (learners never see P)."""
        P = self.P
        return lambda rng, n: sample(P, rng, n)

    def oracle(self) -> ValidityOracle:
        """A fresh zero-count oracle for one replication."""
        return ValidityOracle(self.valid_region)

    @property
    def optimal_loss(self) -> float:
        return expected_loss(self.P, self.Q[self.q_star_index], self.loss)

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "P": self.P.to_dict(),
            "Q": [q.to_dict() for q in self.Q],
            "valid_region": self.valid_region.to_dict(),
            "k": self.validity_class.k,
            "loss": self.loss.to_dict(),
            "gamma": self.gamma,
            "alpha": self.alpha,
            "beta": self.beta,
            "q_star_index": self.q_star_index,
            "d_ref": self.d_ref.to_dict() if self.d_ref is not None else None,
            "d_ref_validity": self.d_ref_validity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        return cls(
            kind=data["kind"],
            P=PiecewiseDensity.from_dict(data["P"]),
            Q=tuple(PiecewiseDensity.from_dict(q) for q in data["Q"]),
            valid_region=IntervalUnion.from_dict(data["valid_region"]),
            validity_class=IntervalUnionClass(data["k"]),
            loss=LossSpec.from_dict(data["loss"]),
            gamma=data["gamma"],
            alpha=data["alpha"],
            beta=data["beta"],
            q_star_index=data["q_star_index"],
            d_ref=(
                PiecewiseDensity.from_dict(data["d_ref"])
                if data.get("d_ref") is not None
                else None
            ),
            d_ref_validity=data.get("d_ref_validity"),
        )


# ---------------------------------------------------------------------------
# random histogram machinery
# ---------------------------------------------------------------------------


def _bin_edges(bins: int) -> np.ndarray:
    return np.arange(bins + 1) / bins


def _pick_region(
    rng: np.random.Generator, bins: int, k: int, need_invalid: bool
) -> tuple[IntervalUnion, np.ndarray]:
    """A union of <= k bin-aligned intervals and the per-bin validity flags."""
    edges = _bin_edges(bins)
    for _ in range(200):
        pieces = int(rng.integers(1, k + 1))
        cuts = np.sort(rng.choice(bins + 1, size=2 * pieces, replace=False))
        flags = np.zeros(bins, dtype=bool)
        for a, b in zip(cuts[::2], cuts[1::2]):
            flags[a:b] = True
        if not flags.any():
            continue
        if need_invalid and flags.all():
            continue
        region = IntervalUnion(
            [(edges[a], edges[b]) for a, b in zip(cuts[::2], cuts[1::2])]
        )
        return region, flags
    raise ConstructionError("could not draw a feasible valid region")


def _capped_proportional(raw: np.ndarray, total: float, cap: float) -> np.ndarray:
    """Water-fill ``total`` over bins proportionally to ``raw`` with a
    per-bin cap: saturated bins freeze at the cap, the rest rescale."""
    if total > cap * len(raw) * (1 + 1e-12):
        raise ConstructionError("requested mass exceeds the density cap capacity")
    out = np.zeros_like(raw)
    free = np.ones(len(raw), dtype=bool)
    remaining = total
    for _ in range(len(raw)):
        if remaining <= 0 or not free.any():
            break
        share = raw[free] * (remaining / raw[free].sum())
        over = share > cap
        idx_free = np.flatnonzero(free)
        if not over.any():
            out[idx_free] = share
            remaining = 0.0
            break
        out[idx_free[over]] = cap
        free[idx_free[over]] = False
        remaining = total - out.sum()
    return out


def _group_masses(
    rng: np.random.Generator,
    bins_in_group: np.ndarray,
    total: float,
    bins: int,
    density_cap: Optional[float],
    low: float = 0.2,
) -> np.ndarray:
    """Random masses on the flagged bins summing exactly to ``total``.

    Draws are uniform in [low, 1] then scaled, which keeps the density
    spread of a group within a factor 1/low.  A density cap, when given,
    is enforced by capped proportional water-filling.
    """
    out = np.zeros(bins)
    idx = np.flatnonzero(bins_in_group)
    if total == 0.0:
        return out
    if idx.size == 0:
        raise ConstructionError("no bins available to carry the requested mass")
    raw = rng.uniform(low, 1.0, size=idx.size)
    if density_cap is not None:
        out[idx] = _capped_proportional(raw, total, density_cap / bins)
    else:
        out[idx] = raw * (total / raw.sum())
    return out


def _histogram(edges: np.ndarray, masses: np.ndarray) -> PiecewiseDensity:
    total = masses.sum()
    return PiecewiseDensity(edges, masses / total)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def make_realizable_instance(
    rng: np.random.Generator,
    bins: int,
    size_Q: int,
    invalidity_profile: Sequence[float],
    k: int = 2,
    density_cap: Optional[float] = None,
) -> ProblemInstance:
    """Environment with the data distribution inside the class at index 0.

    ``invalidity_profile[i]`` is the exact invalid mass of model i;
    profile[0] must be 0 (it is the data distribution itself).  The valid
    region is a union of at most k bin-aligned intervals.
    """
    if bins < 2:
        raise ConstructionError("need at least 2 bins")
    if size_Q < 1 or len(invalidity_profile) != size_Q:
        raise ConstructionError("profile length must equal the class size")
    profile = [float(t) for t in invalidity_profile]
    if profile[0] != 0.0:
        raise ConstructionError("profile[0] must be 0 (the data distribution)")
    if any(not 0.0 <= t < 1.0 for t in profile):
        raise ConstructionError("profile values must lie in [0, 1)")

    edges = _bin_edges(bins)
    need_invalid = any(t > 0 for t in profile)
    region, valid_flags = _pick_region(rng, bins, k, need_invalid)

    models: list[PiecewiseDensity] = []
    for tau in profile:
        valid_part = _group_masses(rng, valid_flags, 1.0 - tau, bins, density_cap)
        invalid_part = _group_masses(rng, ~valid_flags, tau, bins, density_cap)
        models.append(_histogram(edges, valid_part + invalid_part))
    P = models[0]

    loss = LossSpec.log()
    return ProblemInstance(
        kind="realizable",
        P=P,
        Q=tuple(models),
        valid_region=region,
        validity_class=IntervalUnionClass(k),
        loss=loss,
        gamma=1.0 - max(profile),
        alpha=min(q.min_positive_density for q in models),
        beta=max(q.max_density for q in models),
        q_star_index=_argmin_fully_valid(P, models, region, loss),
    )


def make_lower_bound_instance(eps2: float) -> tuple[ProblemInstance, ProblemInstance]:
    """The two-environment pair on which few samples must mislead any
    in-class selector.

    Both environments share the class {P, P'}: P uniform on [0, 1-2*eps2],
    P' uniform on [2*eps2, 1].  Environment 1 generates from P and marks
    (1-2*eps2, 1] invalid; environment 2 generates from P' and marks
    [0, 2*eps2) invalid.  Each non-generating model has exact invalidity
    2*eps2/(1-2*eps2) > eps2 in the other's environment.
    """
    if not 0.0 < eps2 < 0.25:
        raise ValueError("eps2 must lie in (0, 1/4)")
    a, b = 2.0 * eps2, 1.0 - 2.0 * eps2
    grid = (0.0, a, b, 1.0)
    height = 1.0 / b
    p_masses = (a * height, (b - a) * height, 0.0)
    pt_masses = (0.0, (b - a) * height, a * height)
    P = PiecewiseDensity(grid, p_masses)
    Pt = PiecewiseDensity(grid, pt_masses)
    Q = (P, Pt)
    alpha = beta = height
    gamma = 1.0 - a * height

    def build(data_idx: int, region: IntervalUnion) -> ProblemInstance:
        return ProblemInstance(
            kind="lower_bound",
            P=Q[data_idx],
            Q=Q,
            valid_region=region,
            validity_class=IntervalUnionClass(1),
            loss=LossSpec.log(),
            gamma=gamma,
            alpha=alpha,
            beta=beta,
            q_star_index=data_idx,
        )

    first = build(0, IntervalUnion([(0.0, b)]))
    second = build(1, IntervalUnion([(a, 1.0)]))
    return first, second


def make_mismatched_instance(
    rng: np.random.Generator,
    bins: int,
    size_Q: int,
    gamma_floor: float,
    beta_cap: float,
    k: int = 2,
    loss: Optional[LossSpec] = None,
) -> ProblemInstance:
    """Environment where the data law need not be in the class, every model
    keeps validity at least ``gamma_floor``, and densities stay below
    ``beta_cap``.  Ships a uniform reference distribution whose declared
    validity is the valid region's length."""
    if bins < 2:
        raise ConstructionError("need at least 2 bins")
    if size_Q < 1:
        raise ConstructionError("class must be nonempty")
    if not 0.0 < gamma_floor <= 1.0:
        raise ConstructionError("gamma_floor must lie in (0, 1]")
    if beta_cap < 1.0:
        raise ConstructionError("beta_cap below 1 cannot carry unit mass")
    loss = loss if loss is not None else LossSpec.hinge()

    edges = _bin_edges(bins)
    # Under a density cap, unit mass needs at least bins/beta_cap bins.
    min_bins = math.ceil(bins / beta_cap)
    region = valid_flags = None
    for _ in range(200):
        region, valid_flags = _pick_region(rng, bins, k, need_invalid=gamma_floor < 1.0)
        if valid_flags.sum() >= max(min_bins, 2):
            break
    else:
        raise ConstructionError("could not fit unit mass under the density cap")
    n_valid = int(valid_flags.sum())
    n_invalid = bins - n_valid

    # The data law lives on a strict subset of the valid bins so the class
    # genuinely mismatches it.
    data_flags = valid_flags & (rng.random(bins) < 0.6)
    if data_flags.sum() < min_bins:
        fill = np.flatnonzero(valid_flags & ~data_flags)
        data_flags[fill[: min_bins - int(data_flags.sum())]] = True
    P = _histogram(edges, _group_masses(rng, data_flags, 1.0, bins, beta_cap))

    # Invalid mass targets must fit under the cap on both sides of the split.
    tau_lo = max(0.0, 1.0 - 0.99 * beta_cap * n_valid / bins)
    tau_hi = min(1.0 - gamma_floor, 0.99 * beta_cap * n_invalid / bins)
    if size_Q > 1 and tau_lo > tau_hi:
        raise ConstructionError("validity floor and density cap are incompatible")
    models: list[PiecewiseDensity] = []
    for i in range(size_Q):
        tau = 0.0 if i == 0 else float(rng.uniform(tau_lo, tau_hi))
        valid_part = _group_masses(rng, valid_flags, 1.0 - tau, bins, beta_cap)
        invalid_part = _group_masses(rng, ~valid_flags, tau, bins, beta_cap)
        models.append(_histogram(edges, valid_part + invalid_part))

    gamma = min(1.0 - invalidity(q, region) for q in models)
    if gamma < gamma_floor - 1e-9:
        raise ConstructionError("generated class breaks the validity floor")
    u = uniform()
    return ProblemInstance(
        kind="mismatched",
        P=P,
        Q=tuple(models),
        valid_region=region,
        validity_class=IntervalUnionClass(k),
        loss=loss,
        gamma=gamma,
        alpha=min(q.min_positive_density for q in models),
        beta=max(q.max_density for q in models),
        q_star_index=_argmin_fully_valid(P, models, region, loss),
        d_ref=u,
        d_ref_validity=1.0 - invalidity(u, region),
    )


def make_capped_trap_instance(
    rng: np.random.Generator,
    bins: int,
    size_Q: int,
    cap: float,
    k: int = 2,
) -> ProblemInstance:
    """Environment whose capped-log ERM winner has validity zero.

    Every model's density on the data support stays below exp(-cap), so all
    empirical capped-log losses tie at the cap and the lowest index -- a
    model supported entirely on invalid space -- wins.  A fully-valid decoy
    (disjoint from the data support) sits at index 1 and is the fully-valid
    loss minimizer.  The uniform reference distribution carries the valid
    region's length as its declared validity.
    """
    if bins < 10 or bins % 5 != 0:
        raise ConstructionError("bins must be a multiple of 5, at least 10")
    if size_Q < 2:
        raise ConstructionError("need the trap model plus a fully-valid decoy")
    if not cap > 0:
        raise ConstructionError("loss cap must be positive")

    edges = _bin_edges(bins)
    n_valid = 4 * bins // 5  # valid region [0, 0.8]
    n_data = n_valid // 2  # data support [0, 0.4]
    valid_flags = np.zeros(bins, dtype=bool)
    valid_flags[:n_valid] = True
    data_flags = np.zeros(bins, dtype=bool)
    data_flags[:n_data] = True
    decoy_flags = valid_flags & ~data_flags
    invalid_flags = ~valid_flags
    region = IntervalUnion([(0.0, edges[n_valid])])

    P = _histogram(edges, _group_masses(rng, data_flags, 1.0, bins, None))

    thin = math.exp(-cap) * 0.5  # density on the data support, safely sub-cap
    thin_mass = thin * n_data / bins

    models: list[PiecewiseDensity] = []
    models.append(_histogram(edges, _group_masses(rng, invalid_flags, 1.0, bins, None)))
    models.append(_histogram(edges, _group_masses(rng, decoy_flags, 1.0, bins, None)))
    for i in range(size_Q - 2):
        tau = float(rng.uniform(0.3, 0.9))
        bulk_valid = _group_masses(rng, decoy_flags, 1.0 - tau - thin_mass, bins, None)
        bulk_invalid = _group_masses(rng, invalid_flags, tau, bins, None)
        on_data = np.zeros(bins)
        on_data[data_flags] = thin_mass / n_data
        models.append(_histogram(edges, bulk_valid + bulk_invalid + on_data))

    loss = LossSpec.capped_log(cap)
    u = uniform()
    return ProblemInstance(
        kind="capped_trap",
        P=P,
        Q=tuple(models),
        valid_region=region,
        validity_class=IntervalUnionClass(k),
        loss=loss,
        gamma=0.0,
        alpha=min(q.min_positive_density for q in models),
        beta=max(q.max_density for q in models),
        q_star_index=1,
        d_ref=u,
        d_ref_validity=1.0 - invalidity(u, region),
    )


def _argmin_fully_valid(
    P: PiecewiseDensity,
    Q: Sequence[PiecewiseDensity],
    region: IntervalUnion,
    loss: LossSpec,
) -> int:
    best, best_loss = None, math.inf
    for i, q in enumerate(Q):
        if invalidity(q, region) <= _TOL:
            l = expected_loss(P, q, loss)
            if l < best_loss:
                best, best_loss = i, l
    if best is None:
        raise ConstructionError("no fully-valid model in the class")
    return best

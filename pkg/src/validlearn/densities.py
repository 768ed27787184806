"""Piecewise-constant probability densities on [0, 1) and exact functionals.

Every distribution in this package is a histogram over a finite breakpoint
grid 0 = t_0 < t_1 < ... < t_m = 1, with cell i = [t_i, t_{i+1}) carrying
probability mass ``masses[i]`` and hence constant density
``masses[i] / (t_{i+1} - t_i)``.  Because any pair of such densities can be
re-expressed on their common refined grid, total variation, KL divergence,
expected losses, validity mass, and restriction are all closed-form sums --
no quadrature, no Monte Carlo.

Cells are half-open, region intervals are closed; boundary points are
Lebesgue-null so no functional depends on the convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .intervals import IntervalUnion
from .losses import LossSpec

__all__ = [
    "PiecewiseDensity",
    "ZeroMass",
    "ZERO_MASS",
    "uniform",
    "refine",
    "mix",
    "restrict",
    "tv",
    "kl",
    "expected_loss",
    "expected_loss_on",
    "empirical_loss",
    "invalidity",
    "disagreement_mass",
    "support_clipped_loss",
    "sample",
]

_MASS_TOL = 1e-12


class ZeroMass:
    """Signal returned by :func:`restrict` when the region carries no mass.

    Not an exception: the fallback behavior (e.g. keep the unrestricted
    model) is an explicit caller decision.
    """

    _instance: "ZeroMass | None" = None

    def __new__(cls) -> "ZeroMass":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:  # pragma: no cover
        return "ZERO_MASS"


ZERO_MASS = ZeroMass()


@dataclass(frozen=True)
class PiecewiseDensity:
    """A probability distribution on [0, 1) with piecewise-constant density.

    Invariants enforced at construction: breakpoints strictly increase from
    0 to 1, masses are nonnegative, and total mass is 1 within 1e-12.
    Instances are immutable and safe to share across concurrent runs.
    """

    breakpoints: tuple[float, ...]
    masses: tuple[float, ...]

    def __init__(self, breakpoints: Sequence[float], masses: Sequence[float]) -> None:
        bp = tuple(float(t) for t in breakpoints)
        ms = tuple(float(m) for m in masses)
        if len(bp) < 2 or len(ms) != len(bp) - 1:
            raise ValueError("need m+1 breakpoints for m masses, m >= 1")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(a >= b for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(m < 0 for m in ms):
            raise ValueError("masses must be nonnegative")
        total = math.fsum(ms)
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1 within {_MASS_TOL}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "masses", ms)

    # -- derived views (cached; the dataclass is frozen but not slotted) ----
    @cached_property
    def _bp(self) -> np.ndarray:
        return np.asarray(self.breakpoints)

    @cached_property
    def _masses(self) -> np.ndarray:
        return np.asarray(self.masses)

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.diff(self._bp)

    @cached_property
    def densities(self) -> np.ndarray:
        return self._masses / self.lengths

    @cached_property
    def _cum(self) -> np.ndarray:
        return np.cumsum(self._masses)

    @property
    def num_cells(self) -> int:
        return len(self.masses)

    @property
    def min_positive_density(self) -> float:
        """Density lower bound over the support (cells with positive mass)."""
        pos = self.densities[self._masses > 0]
        return float(pos.min())

    @property
    def max_density(self) -> float:
        return float(self.densities.max())

    def cell_index(self, xs: np.ndarray) -> np.ndarray:
        """Index of the half-open cell containing each x in [0, 1)."""
        xs = np.asarray(xs, dtype=float)
        if xs.size and (xs.min() < 0.0 or xs.max() >= 1.0):
            raise ValueError("points must lie in [0, 1)")
        return np.searchsorted(self._bp, xs, side="right") - 1

    def density_at_many(self, xs: np.ndarray) -> np.ndarray:
        return self.densities[self.cell_index(xs)]

    def support(self) -> IntervalUnion:
        """Closure of the positive-density cells, as an interval union."""
        ivals = [
            (self.breakpoints[i], self.breakpoints[i + 1])
            for i, m in enumerate(self.masses)
            if m > 0
        ]
        return IntervalUnion(ivals)

    def to_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "masses": list(self.masses)}

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewiseDensity":
        return cls(data["breakpoints"], data["masses"])


def uniform() -> PiecewiseDensity:
    """The uniform distribution: one cell, density 1 on [0, 1)."""
    return PiecewiseDensity((0.0, 1.0), (1.0,))


def density_at(d: PiecewiseDensity, x: float) -> float:
    """Density of ``d`` at a single point x in [0, 1)."""
    return float(d.density_at_many(np.asarray([x]))[0])


# ---------------------------------------------------------------------------
# grid refinement
# ---------------------------------------------------------------------------


def _masses_on_grid(d: PiecewiseDensity, grid: np.ndarray) -> np.ndarray:
    """Re-express d's masses on a finer grid (splits are length-proportional)."""
    left = grid[:-1]
    parent = np.searchsorted(d._bp, left, side="right") - 1
    frac = (grid[1:] - left) / d.lengths[parent]
    return d._masses[parent] * frac


def _common_grid(a: PiecewiseDensity, b: PiecewiseDensity, *regions: IntervalUnion) -> np.ndarray:
    pieces = [a._bp, b._bp]
    for r in regions:
        pieces.append(np.asarray(r.endpoints()))
    grid = np.unique(np.concatenate(pieces))
    return grid[(grid >= 0.0) & (grid <= 1.0)]


def refine(
    a: PiecewiseDensity, b: PiecewiseDensity
) -> tuple[PiecewiseDensity, PiecewiseDensity]:
    """Re-express both distributions on the union of their breakpoint grids."""
    if a.breakpoints == b.breakpoints:
        return a, b
    grid = _common_grid(a, b)
    return (
        PiecewiseDensity(grid, _masses_on_grid(a, grid)),
        PiecewiseDensity(grid, _masses_on_grid(b, grid)),
    )


def _aligned(
    a: PiecewiseDensity, b: PiecewiseDensity, *regions: IntervalUnion
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(grid, masses_a, masses_b) on the common grid including region endpoints."""
    if not regions and a.breakpoints == b.breakpoints:
        return a._bp, a._masses, b._masses
    grid = _common_grid(a, b, *regions)
    return grid, _masses_on_grid(a, grid), _masses_on_grid(b, grid)


def _region_mask(grid: np.ndarray, region: IntervalUnion) -> np.ndarray:
    """Cell-in-region flags via midpoints (exact: endpoints are grid points)."""
    mids = 0.5 * (grid[:-1] + grid[1:])
    return region.contains_many(mids)


# ---------------------------------------------------------------------------
# algebra on densities
# ---------------------------------------------------------------------------


def mix(a: PiecewiseDensity, b: PiecewiseDensity, w: float) -> PiecewiseDensity:
    """Mixture with weight ``w`` on ``b``: density (1-w) f_a + w f_b."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("mixture weight must lie in [0, 1]")
    if w == 0.0:
        return a
    if w == 1.0:
        return b
    grid, ma, mb = _aligned(a, b)
    return PiecewiseDensity(grid, (1.0 - w) * ma + w * mb)


def restrict(
    d: PiecewiseDensity, region: IntervalUnion
) -> Union[PiecewiseDensity, ZeroMass]:
    """Condition ``d`` on ``region``: zero mass outside, renormalized inside.

    Returns the :data:`ZERO_MASS` signal when the region carries no mass
    under ``d``; the caller decides the fallback.
    """
    grid = np.unique(
        np.concatenate([d._bp, np.asarray(region.endpoints(), dtype=float)])
    )
    grid = grid[(grid >= 0.0) & (grid <= 1.0)]
    masses = _masses_on_grid(d, grid)
    keep = _region_mask(grid, region)
    retained = float(masses[keep].sum())
    if retained <= 0.0:
        return ZERO_MASS
    out = np.where(keep, masses, 0.0) / retained
    return PiecewiseDensity(grid, out)


# ---------------------------------------------------------------------------
# exact functionals
# ---------------------------------------------------------------------------


def tv(a: PiecewiseDensity, b: PiecewiseDensity) -> float:
    """Total variation distance: half the summed absolute mass differences."""
    _, ma, mb = _aligned(a, b)
    return float(0.5 * np.abs(ma - mb).sum())


def kl(p: PiecewiseDensity, q: PiecewiseDensity) -> float:
    """KL divergence of p from q in nats; +inf where p has mass and q none.

    Cell lengths cancel inside the log, so the divergence reduces to the
    discrete divergence of the mass vectors on the common grid.
    """
    _, mp, mq = _aligned(p, q)
    pos = mp > 0
    if np.any(pos & (mq == 0.0)):
        return math.inf
    mp, mq = mp[pos], mq[pos]
    return float(np.sum(mp * np.log(mp / mq)))


def expected_loss(P: PiecewiseDensity, q: PiecewiseDensity, loss: LossSpec) -> float:
    """Exact E_{X~P}[loss(f_q(X))]; +inf only for log-loss on missing support."""
    grid, mp, mq = _aligned(P, q)
    lengths = np.diff(grid)
    pos = mp > 0
    if not np.any(pos):  # pragma: no cover - masses sum to 1
        return 0.0
    fq = mq[pos] / lengths[pos]
    vals = loss.values_at(fq)
    if np.any(np.isinf(vals)):
        return math.inf
    return float(np.sum(mp[pos] * vals))


def expected_loss_on(
    P: PiecewiseDensity, q: PiecewiseDensity, loss: LossSpec, region: IntervalUnion
) -> float:
    """E_{X~P}[loss(f_q(X)) * 1[X in region]], exact on the common grid."""
    grid, mp, mq = _aligned(P, q, region)
    lengths = np.diff(grid)
    pos = (mp > 0) & _region_mask(grid, region)
    if not np.any(pos):
        return 0.0
    fq = mq[pos] / lengths[pos]
    vals = loss.values_at(fq)
    if np.any(np.isinf(vals)):
        return math.inf
    return float(np.sum(mp[pos] * vals))


def empirical_loss(S: np.ndarray, q: PiecewiseDensity, loss: LossSpec) -> float:
    """Mean loss of q's density over the sample; +inf if any term is."""
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        raise ValueError("empirical loss needs a nonempty sample")
    vals = loss.values_at(q.density_at_many(S))
    if np.any(np.isinf(vals)):
        return math.inf
    return float(vals.mean())


def invalidity(q: PiecewiseDensity, valid: IntervalUnion) -> float:
    """Exact q-mass of the complement of the valid region."""
    grid = np.unique(
        np.concatenate([q._bp, np.asarray(valid.endpoints(), dtype=float)])
    )
    grid = grid[(grid >= 0.0) & (grid <= 1.0)]
    masses = _masses_on_grid(q, grid)
    return float(masses[~_region_mask(grid, valid)].sum())


def disagreement_mass(
    q: PiecewiseDensity, h1: IntervalUnion, h2: IntervalUnion
) -> float:
    """Exact q-mass of the symmetric difference of two regions."""
    grid = np.unique(
        np.concatenate(
            [
                q._bp,
                np.asarray(h1.endpoints(), dtype=float),
                np.asarray(h2.endpoints(), dtype=float),
            ]
        )
    )
    grid = grid[(grid >= 0.0) & (grid <= 1.0)]
    masses = _masses_on_grid(q, grid)
    differs = _region_mask(grid, h1) != _region_mask(grid, h2)
    return float(masses[differs].sum())


def support_clipped_loss(P: PiecewiseDensity, q: PiecewiseDensity) -> float:
    """E_{X~P}[1[X in supp(q)] * ln(1/f_q(X))] -- always finite."""
    grid, mp, mq = _aligned(P, q)
    lengths = np.diff(grid)
    pos = (mp > 0) & (mq > 0)
    if not np.any(pos):
        return 0.0
    fq = mq[pos] / lengths[pos]
    return float(np.sum(mp[pos] * -np.log(fq)))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample(d: PiecewiseDensity, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n i.i.d. points by inverse-CDF: cell by cumulative mass, then
    the leftover uniform fraction placed within the cell."""
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    if n == 0:
        return np.empty(0, dtype=float)
    u = rng.random(n)
    idx = np.searchsorted(d._cum, u, side="right")
    # u >= cum[-1] can occur when the cumulative masses drift below 1 by a
    # few ulp; land those draws in the last positive-mass cell.
    last_pos = int(np.flatnonzero(d._masses > 0)[-1])
    idx = np.minimum(idx, last_pos)
    prev = np.where(idx > 0, d._cum[idx - 1], 0.0)
    frac = (u - prev) / d._masses[idx]
    left = d._bp[idx]
    right = d._bp[idx + 1]
    xs = left + frac * (right - left)
    # Guard against the fraction rounding up onto the right breakpoint, which
    # would move the point into the neighboring (possibly zero-mass) cell.
    spill = xs >= right
    if np.any(spill):
        xs[spill] = np.nextafter(right[spill], left[spill])
    return xs

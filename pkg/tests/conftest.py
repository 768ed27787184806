import numpy as np
import pytest

from validlearn import IntervalUnion, PiecewiseDensity


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(rng, max_cells=8, allow_zeros=True):
    """Random piecewise density on a random grid."""
    m = int(rng.integers(1, max_cells + 1))
    grid = np.unique(np.concatenate([[0.0], np.sort(rng.random(m - 1)), [1.0]]))
    raw = rng.random(len(grid) - 1)
    if allow_zeros and rng.random() < 0.3 and len(raw) > 1:
        raw[rng.integers(0, len(raw))] = 0.0
    if raw.sum() == 0:
        raw[0] = 1.0
    return PiecewiseDensity(grid, raw / raw.sum())


def random_region(rng, bins=10):
    """Random bin-aligned interval union (possibly empty)."""
    edges = np.arange(bins + 1) / bins
    flags = rng.random(bins) < 0.5
    ivals = []
    j = 0
    while j < bins:
        if flags[j]:
            j0 = j
            while j < bins and flags[j]:
                j += 1
            ivals.append((edges[j0], edges[j]))
        else:
            j += 1
    return IntervalUnion(ivals)

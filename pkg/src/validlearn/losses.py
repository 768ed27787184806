"""Local loss functions evaluated on model densities.

A loss maps a nonnegative density value to a penalty and must be
non-increasing.  Three families are supported:

* ``log``        -- ln(1/f), infinite at f = 0 (the strictly proper one);
* ``capped_log`` -- min(M, ln(1/f)), finite everywhere, range (-inf, M];
* bounded losses with values in [0, M]: the built-in hinge max(0, 1 - f),
  a step table, or an arbitrary user callable.

Infinite values propagate through sums and compare greater than any finite
value, so empirical-risk comparisons remain total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = ["LossSpec"]

_KINDS = ("log", "capped_log", "hinge", "table", "custom")


@dataclass(frozen=True)
class LossSpec:
    """A non-increasing local loss l(f) on density values f >= 0.

    ``cap`` is the upper bound M of the loss where one exists (all kinds
    except plain ``log``).  ``table`` kind holds a right-continuous step
    function: value ``values[i]`` on [thresholds[i], thresholds[i+1]) with
    thresholds[0] = 0.
    """

    kind: str
    cap: Optional[float] = None
    thresholds: Optional[tuple[float, ...]] = None
    values: Optional[tuple[float, ...]] = None
    fn: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind != "log":
            if self.cap is None or not self.cap > 0:
                raise ValueError("bounded losses need a positive cap")
        if self.kind == "table":
            th, vals = self.thresholds, self.values
            if th is None or vals is None or len(th) != len(vals):
                raise ValueError("table loss needs matching thresholds/values")
            if th[0] != 0.0 or any(a >= b for a, b in zip(th, th[1:])):
                raise ValueError("table thresholds must start at 0 and increase")
            if any(a < b for a, b in zip(vals, vals[1:])):
                raise ValueError("table loss must be non-increasing")
            if vals[0] > self.cap or vals[-1] < 0:
                raise ValueError("table loss values must lie in [0, cap]")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom loss needs a callable")

    # -- constructors -----------------------------------------------------
    @classmethod
    def log(cls) -> "LossSpec":
        return cls("log")

    @classmethod
    def capped_log(cls, cap: float) -> "LossSpec":
        return cls("capped_log", cap=float(cap))

    @classmethod
    def hinge(cls) -> "LossSpec":
        """max(0, 1 - f): bounded in [0, 1], non-increasing."""
        return cls("hinge", cap=1.0)

    @classmethod
    def table(cls, thresholds: Sequence[float], values: Sequence[float]) -> "LossSpec":
        vals = tuple(float(v) for v in values)
        return cls(
            "table",
            cap=max(vals) if vals else 1.0,
            thresholds=tuple(float(t) for t in thresholds),
            values=vals,
        )

    @classmethod
    def custom(cls, fn: Callable[[float], float], cap: float) -> "LossSpec":
        return cls("custom", cap=float(cap), fn=fn)

    # -- evaluation --------------------------------------------------------
    @property
    def is_unbounded(self) -> bool:
        return self.kind == "log"

    def value(self, f: float) -> float:
        return float(self.values_at(np.asarray([f]))[0])

    def values_at(self, fs: np.ndarray) -> np.ndarray:
        """Vectorized loss evaluation; may contain +inf for the log kind."""
        fs = np.asarray(fs, dtype=float)
        if np.any(fs < 0):
            raise ValueError("densities must be nonnegative")
        if self.kind == "log":
            with np.errstate(divide="ignore"):
                return -np.log(fs)
        if self.kind == "capped_log":
            with np.errstate(divide="ignore"):
                return np.minimum(self.cap, -np.log(fs))
        if self.kind == "hinge":
            return np.maximum(0.0, 1.0 - fs)
        if self.kind == "table":
            th = np.asarray(self.thresholds)
            idx = np.searchsorted(th, fs, side="right") - 1
            return np.asarray(self.values)[idx]
        return np.array([float(self.fn(f)) for f in fs.ravel()]).reshape(fs.shape)

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom losses are not serializable")
        out: dict = {"kind": self.kind}
        if self.cap is not None:
            out["cap"] = self.cap
        if self.kind == "table":
            out["thresholds"] = list(self.thresholds)
            out["values"] = list(self.values)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LossSpec":
        kind = data.get("kind")
        if kind == "log":
            return cls.log()
        if kind == "capped_log":
            return cls.capped_log(data["cap"])
        if kind == "hinge":
            return cls.hinge()
        if kind == "table":
            return cls.table(data["thresholds"], data["values"])
        raise ValueError(f"unknown loss kind {kind!r}")

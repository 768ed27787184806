"""Figure specifications: what to read, what to draw, where to write."""

from __future__ import annotations

import json
from dataclasses import dataclass

KINDS = ("failure_curve", "query_curve", "product_tv", "lower_bound_bar")

SCHEMA_VERSION = "vl1"

RECORD_REQUIRED = {
    "failure_curve": [
        "schema_version", "kind", "axis_value", "success_loss",
        "success_validity", "delta",
    ],
    "query_curve": [
        "schema_version", "axis_value", "n_queries", "gamma", "delta",
        "c3", "vc_dim", "size_q", "eps1",
    ],
    "lower_bound_bar": [
        "schema_version", "experiment_id", "axis_value", "success_validity",
    ],
    "product_tv": [
        "schema_version", "n", "exact_tv", "reis_lower", "subadditive_upper",
        "invalid_margin_lower",
    ],
}


class FigureSpecError(ValueError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    """One figure: input CSV(s), kind, output path, axis scales."""

    kind: str
    csv: tuple[str, ...]
    out: str
    x_scale: str = "linear"
    y_scale: str = "linear"
    title: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise FigureSpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.csv:
            raise FigureSpecError("at least one input CSV is required")
        for scale in (self.x_scale, self.y_scale):
            if scale not in ("linear", "log"):
                raise FigureSpecError(f"scale must be linear or log, got {scale!r}")

    @property
    def required_columns(self) -> list[str]:
        return RECORD_REQUIRED[self.kind]

    @classmethod
    def from_dict(cls, data: dict) -> "FigureSpec":
        csv = data.get("csv", ())
        if isinstance(csv, str):
            csv = (csv,)
        return cls(
            kind=data.get("kind", ""),
            csv=tuple(csv),
            out=data.get("out", ""),
            x_scale=data.get("x_scale", "linear"),
            y_scale=data.get("y_scale", "linear"),
            title=data.get("title", ""),
        )

    @classmethod
    def load(cls, path: str) -> "FigureSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

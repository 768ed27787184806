"""Render experiment CSVs into the repo's figures.

Four kinds:

* ``failure_curve``    -- observed failure (or flip) frequency against the
                          sweep axis, with the delta target line;
* ``query_curve``      -- oracle queries against 1/(gamma * eps2), overlaid
                          with the exact query-size formula and the
                          log(|Q|)/(eps1^2 eps2) comparison curve;
* ``product_tv``       -- exact n-fold product total variation between its
                          closed-form lower/upper bounds;
* ``lower_bound_bar``  -- per-environment selection-failure bars with the
                          1/4 reference line.

Rendering is pure: fixed style, no timestamps, reference constants read
from the CSV's echoed config columns.  Same CSV in, byte-identical image
out (modulo encoder metadata).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

from .figspec import SCHEMA_VERSION, FigureSpec, FigureSpecError

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.35,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "lines.markersize": 5,
}


class SchemaError(FigureSpecError):
    pass


@dataclass
class RenderResult:
    """Output path plus the plotted series, for tests and captions."""

    path: str
    series: dict = field(default_factory=dict)


def _load_frame(spec: FigureSpec) -> pd.DataFrame:
    frames = []
    for path in spec.csv:
        df = pd.read_csv(path)
        for col in spec.required_columns:
            if col not in df.columns:
                raise SchemaError(f"{path}: missing column {col!r}")
        if len(df) == 0:
            raise SchemaError(f"{path}: no records")
        tokens = set(df["schema_version"].astype(str))
        if tokens != {SCHEMA_VERSION}:
            raise SchemaError(
                f"{path}: schema version {sorted(tokens)} does not match "
                f"{SCHEMA_VERSION!r}"
            )
        if "axis_value" in df.columns:
            df["axis_value"] = df["axis_value"].astype("string").fillna("")
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def _vc_query_count(d: int, eps: float, delta: float, c3: float) -> int:
    """The query-size formula, reproduced from the harness contract."""
    num = c3 * (d * math.log(1.0 / eps) + math.log(1.0 / delta))
    return max(1, math.ceil(num / eps))


def _single(df: pd.DataFrame, col: str) -> float:
    vals = df[col].unique()
    if len(vals) != 1:
        raise SchemaError(f"column {col!r} is not constant across records")
    return float(vals[0])


# ---------------------------------------------------------------------------
# kind-specific builders
# ---------------------------------------------------------------------------


def _failure_curve(df: pd.DataFrame, ax) -> dict:
    delta = _single(df, "delta")
    flip_kinds = {"lemma4", "flipprob"}
    xs, ys = [], []
    for value, group in df.groupby("axis_value", sort=False):
        xs.append(float(value))
        if set(group["kind"]) <= flip_kinds:
            fail = 1.0 - group["success_loss"].mean()
        else:
            fail = 1.0 - (group["success_loss"] & group["success_validity"]).mean()
        ys.append(float(fail))
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    xs = [xs[i] for i in order]
    ys = [ys[i] for i in order]
    ax.plot(xs, ys, "o-", color="#1f5fa8", label="observed failure")
    ax.axhline(delta, color="#b03030", ls="--", lw=1.2, label=f"delta = {delta:g}")
    ax.set_xlabel("sweep value")
    ax.set_ylabel("failure frequency")
    ax.legend()
    return {"x": xs, "failure": ys, "delta": delta}


def _query_curve(df: pd.DataFrame, ax) -> dict:
    gamma = _single(df, "gamma")
    delta = _single(df, "delta")
    c3 = _single(df, "c3")
    d = int(_single(df, "vc_dim"))
    size_q = _single(df, "size_q")
    eps1 = _single(df, "eps1")
    xs, points, overlay, baseline = [], [], [], []
    for value, group in df.groupby("axis_value", sort=False):
        eps2 = float(value)
        queries = group["n_queries"].unique()
        if len(queries) != 1:
            raise SchemaError("query counts vary within one axis value")
        xs.append(1.0 / (gamma * eps2))
        points.append(int(queries[0]))
        overlay.append(_vc_query_count(d, gamma * eps2 / 2.0, delta, c3))
        baseline.append(math.log(size_q) / (eps1 * eps1 * eps2))
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    xs = [xs[i] for i in order]
    points = [points[i] for i in order]
    overlay = [overlay[i] for i in order]
    baseline = [baseline[i] for i in order]
    ax.plot(xs, overlay, "-", color="#777777", lw=1.2, label="query-size formula")
    ax.plot(
        xs, baseline, ":", color="#b03030", lw=1.2,
        label="log(|Q|)/(eps1^2 eps2) baseline",
    )
    ax.plot(xs, points, "o", color="#1f5fa8", label="observed queries")
    ax.set_xlabel("1 / (gamma * eps2)")
    ax.set_ylabel("validity queries")
    ax.legend()
    return {"x": xs, "points": points, "overlay": overlay, "baseline": baseline}


def _product_tv(df: pd.DataFrame, ax) -> dict:
    df = df.sort_values("n")
    xs = df["n"].astype(int).tolist()
    exact = df["exact_tv"].astype(float).tolist()
    lower = df["reis_lower"].astype(float).tolist()
    upper = df["subadditive_upper"].astype(float).tolist()
    ax.plot(xs, upper, "--", color="#777777", lw=1.2, label="n * tv upper bound")
    ax.plot(xs, lower, "-.", color="#2a7a2a", lw=1.2, label="product lower bound")
    margins = df["invalid_margin_lower"]
    series = {"n": xs, "exact": exact, "lower": lower, "upper": upper}
    if margins.notna().any():
        margin = margins.astype(float).tolist()
        ax.plot(xs, margin, ":", color="#b03030", lw=1.2, label="1 - exp(-n eps) margin")
        series["margin"] = margin
    ax.plot(xs, exact, "o-", color="#1f5fa8", label="exact product tv")
    ax.set_xlabel("product length n")
    ax.set_ylabel("total variation")
    ax.set_ylim(0, 1.05)
    ax.legend()
    return series


def _lower_bound_bar(df: pd.DataFrame, ax) -> dict:
    rows = []
    for (exp_id, value), group in df.groupby(["experiment_id", "axis_value"], sort=False):
        axis = float(value) if value not in ("", "nan") else float("nan")
        rows.append((exp_id, axis, 1.0 - group["success_validity"].mean()))
    rows.sort(key=lambda r: (math.isnan(r[1]), r[1], r[0]))
    labels = [
        f"{exp_id.rsplit('/', 1)[-1]}@n={axis:g}" if not math.isnan(axis) else exp_id
        for exp_id, axis, _ in rows
    ]
    fails = [r[2] for r in rows]
    colors = ["#1f5fa8" if lbl.startswith("0") else "#6fa8dc" for lbl in labels]
    ax.bar(range(len(rows)), fails, color=colors)
    ax.axhline(0.25, color="#b03030", ls="--", lw=1.2, label="1/4 floor")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("selection failure frequency")
    ax.legend()
    return {"labels": labels, "failure": fails}


_BUILDERS = {
    "failure_curve": _failure_curve,
    "query_curve": _query_curve,
    "product_tv": _product_tv,
    "lower_bound_bar": _lower_bound_bar,
}


def render(spec: FigureSpec) -> RenderResult:
    """Build the figure for a spec and write it to ``spec.out``.

    Raises :class:`SchemaError` before any file is written when the CSV is
    empty or does not carry the expected versioned schema.
    """
    df = _load_frame(spec)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        try:
            series = _BUILDERS[spec.kind](df, ax)
            ax.set_xscale(spec.x_scale)
            ax.set_yscale(spec.y_scale)
            if spec.title:
                ax.set_title(spec.title)
            fig.tight_layout()
            out_dir = os.path.dirname(spec.out)
            if out_dir:
                os.makedirs(out_dir, exist_ok=True)
            fig.savefig(spec.out)
        finally:
            plt.close(fig)
    return RenderResult(path=spec.out, series=series)

"""Configuration-driven experiment harness: replications, sweeps, CSV output.

Every replication owns a seeded stream derived from (base_seed, rep) -- or
(base_seed, axis_index, rep) inside a sweep -- plus its own oracle, so runs
are reproducible byte-for-byte from the config file alone regardless of the
thread count (override via the VALIDLEARN_THREADS environment variable).

Outcome rows are evaluated with the exact functionals (never held-out
samples): loss gap, invalidity, and total variation to the data law are
closed-form.  For the test-style kinds (erm-tv flips, likelihood-ratio
flips, few-sample selection) the ``success_loss`` bit records the
no-flip / right-selection event so one CSV schema serves every kind.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .densities import (
    PiecewiseDensity,
    empirical_loss,
    expected_loss,
    invalidity,
    sample,
    tv,
)
from .exactcheck import ProductTVReport, _binomial_ci
from .instances import (
    ProblemInstance,
    make_capped_trap_instance,
    make_lower_bound_instance,
    make_mismatched_instance,
    make_realizable_instance,
)
from .intervals import IntervalUnion
from .learners import (
    LearnParams,
    finite_log_loss,
    valid_restriction,
    valid_restriction_log,
)
from .losses import LossSpec

__all__ = [
    "SCHEMA_VERSION",
    "RECORD_COLUMNS",
    "PRODUCT_COLUMNS",
    "ConfigError",
    "ExperimentConfig",
    "RunRecord",
    "ExperimentResult",
    "run_experiment",
    "sweep",
    "lower_bound_experiment",
    "build_instance",
    "write_records_csv",
    "write_product_csv",
    "format_summary",
]

SCHEMA_VERSION = "vl1"

KINDS = ("alg1", "alg2", "alg3", "lemma4", "flipprob", "product_tv", "lower_bound")

SWEEPABLE = ("eps1", "eps2", "delta", "gamma", "M", "n")

RECORD_COLUMNS = [
    "schema_version",
    "experiment_id",
    "kind",
    "rep",
    "seed",
    "axis_param",
    "axis_value",
    "n_samples",
    "n_queries",
    "loss_gap",
    "invalidity",
    "tv_to_p",
    "fallback_triggered",
    "success_loss",
    "success_validity",
    "eps1",
    "eps2",
    "delta",
    "cap_m",
    "gamma",
    "c1",
    "c2",
    "c3",
    "size_q",
    "vc_dim",
]

PRODUCT_COLUMNS = [
    "schema_version",
    "experiment_id",
    "pair",
    "n",
    "tv_single",
    "exact_tv",
    "reis_lower",
    "subadditive_upper",
    "invalid_margin_lower",
]


class ConfigError(ValueError):
    """Invalid experiment configuration; lists every violated field."""

    def __init__(self, problems: Sequence[str]) -> None:
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


@dataclass(frozen=True)
class RunRecord:
    """One replication's outcome plus the echoed parameters."""

    experiment_id: str
    kind: str
    rep: int
    seed: str
    n_samples: int
    n_queries: int
    loss_gap: float
    invalidity: float
    tv_to_p: float
    fallback_triggered: bool
    success_loss: bool
    success_validity: bool
    eps1: float
    eps2: float
    delta: float
    cap_m: float
    gamma: float
    c1: float
    c2: float
    c3: float
    size_q: int
    vc_dim: int
    axis_param: str = ""
    axis_value: str = ""

    def to_row(self) -> list[str]:
        return [
            SCHEMA_VERSION,
            self.experiment_id,
            self.kind,
            str(self.rep),
            self.seed,
            self.axis_param,
            self.axis_value,
            str(self.n_samples),
            str(self.n_queries),
            _fmt(self.loss_gap),
            _fmt(self.invalidity),
            _fmt(self.tv_to_p),
            "1" if self.fallback_triggered else "0",
            "1" if self.success_loss else "0",
            "1" if self.success_validity else "0",
            _fmt(self.eps1),
            _fmt(self.eps2),
            _fmt(self.delta),
            _fmt(self.cap_m),
            _fmt(self.gamma),
            _fmt(self.c1),
            _fmt(self.c2),
            _fmt(self.c3),
            str(self.size_q),
            str(self.vc_dim),
        ]


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment description; see README for the JSON schema."""

    kind: str
    reps: int
    base_seed: int
    params: LearnParams
    name: str = ""
    instance: Optional[dict] = None
    pair: Optional[dict] = None
    loss: Optional[LossSpec] = None
    n: Optional[int] = None
    sweep_param: Optional[str] = None
    sweep_values: tuple = ()
    known_validity_floor: Optional[float] = None
    out: Optional[str] = None

    @property
    def experiment_id(self) -> str:
        return self.name or self.kind

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        problems: list[str] = []
        kind = data.get("kind")
        if kind not in KINDS:
            problems.append(f"kind must be one of {KINDS}, got {kind!r}")
        reps = data.get("reps", 0)
        if not (isinstance(reps, int) and reps >= 1):
            problems.append("reps must be an integer >= 1")
        base_seed = data.get("base_seed")
        if not isinstance(base_seed, int):
            problems.append("base_seed must be an integer")

        params = None
        try:
            params = LearnParams(**data.get("params", {}))
        except (TypeError, ValueError) as e:
            problems.append(f"params: {e}")

        loss = None
        if "loss" in data:
            try:
                loss = LossSpec.from_dict(data["loss"])
            except (KeyError, ValueError) as e:
                problems.append(f"loss: {e}")

        n = data.get("n")
        if n is not None and not (isinstance(n, int) and n >= 1):
            problems.append("n must be an integer >= 1")

        sweep_param, sweep_values = None, ()
        if "sweep" in data:
            sw = data["sweep"]
            sweep_param = sw.get("param")
            sweep_values = tuple(sw.get("values", ()))
            if sweep_param not in SWEEPABLE:
                problems.append(f"sweep.param must be one of {SWEEPABLE}")
            if len(sweep_values) == 0:
                problems.append("sweep.values must be nonempty")

        if kind in ("alg1", "alg2", "alg3") and "instance" not in data:
            problems.append(f"kind {kind} requires an instance spec")
        if kind in ("lemma4", "flipprob", "product_tv") and "pair" not in data:
            problems.append(f"kind {kind} requires a pair spec")
        if kind in ("lemma4", "flipprob", "product_tv", "lower_bound"):
            if n is None and not (sweep_param == "n" and sweep_values):
                problems.append(f"kind {kind} requires a sample size n")

        floor = data.get("known_validity_floor")
        if floor is not None and not 0.0 < floor <= 1.0:
            problems.append("known_validity_floor must lie in (0, 1]")

        if problems:
            raise ConfigError(problems)

        cfg = cls(
            kind=kind,
            reps=reps,
            base_seed=base_seed,
            params=params,
            name=data.get("name", ""),
            instance=data.get("instance"),
            pair=data.get("pair"),
            loss=loss,
            n=n,
            sweep_param=sweep_param,
            sweep_values=sweep_values,
            known_validity_floor=floor,
            out=data.get("out"),
        )
        # Bounded-loss runs key their size formulas off the loss cap; keep the
        # echoed M consistent with it.
        if cfg.kind == "alg2" and cfg.loss is not None and cfg.loss.cap is not None:
            cfg = replace(cfg, params=cfg.params.with_(M=cfg.loss.cap))
        return cfg


@dataclass
class ExperimentResult:
    records: list[RunRecord] = field(default_factory=list)
    product_rows: list[tuple] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# instance / pair assembly
# ---------------------------------------------------------------------------


def build_instance(spec: dict, default_loss: Optional[LossSpec] = None) -> ProblemInstance:
    """Materialize an instance from an inline dict or generator parameters."""
    if "inline" in spec:
        return ProblemInstance.from_dict(spec["inline"])
    gen = spec.get("generator")
    rng = np.random.default_rng(spec.get("seed", 0))
    if gen == "realizable":
        return make_realizable_instance(
            rng,
            bins=spec["bins"],
            size_Q=spec["size_q"],
            invalidity_profile=spec["invalidity_profile"],
            k=spec.get("k", 2),
            density_cap=spec.get("density_cap"),
        )
    if gen == "mismatched":
        return make_mismatched_instance(
            rng,
            bins=spec["bins"],
            size_Q=spec["size_q"],
            gamma_floor=spec["gamma_floor"],
            beta_cap=spec["beta_cap"],
            k=spec.get("k", 2),
            loss=default_loss,
        )
    if gen == "capped_trap":
        return make_capped_trap_instance(
            rng,
            bins=spec["bins"],
            size_Q=spec["size_q"],
            cap=spec["cap"],
            k=spec.get("k", 2),
        )
    raise ConfigError([f"unknown instance generator {gen!r}"])


def _pair_from_dict(pair: dict) -> tuple[PiecewiseDensity, PiecewiseDensity, IntervalUnion]:
    p = PiecewiseDensity.from_dict(pair["p"])
    q = PiecewiseDensity.from_dict(pair["q"])
    valid = (
        IntervalUnion.from_dict(pair["valid"])
        if "valid" in pair
        else IntervalUnion.full()
    )
    return p, q, valid


# ---------------------------------------------------------------------------
# replication engines
# ---------------------------------------------------------------------------


def _thread_count() -> int:
    raw = os.environ.get("VALIDLEARN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_reps(reps: int, fn: Callable[[int], RunRecord]) -> list[RunRecord]:
    workers = _thread_count()
    if workers == 1:
        records = [fn(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(fn, range(reps)))
    records.sort(key=lambda rec: rec.rep)
    return records


def _seed_tuple(cfg: ExperimentConfig, rep: int, axis_index: Optional[int]) -> tuple:
    if axis_index is None:
        return (cfg.base_seed, rep)
    return (cfg.base_seed, axis_index, rep)


def _seed_str(seed: tuple) -> str:
    return ":".join(str(s) for s in seed)


def _echo_fields(cfg: ExperimentConfig, size_q: int, vc_dim: int) -> dict:
    p = cfg.params
    return dict(
        eps1=p.eps1,
        eps2=p.eps2,
        delta=p.delta,
        cap_m=p.M,
        gamma=p.gamma,
        c1=p.c1,
        c2=p.c2,
        c3=p.c3,
        size_q=size_q,
        vc_dim=vc_dim,
    )


def _learner_record(
    cfg: ExperimentConfig,
    inst: ProblemInstance,
    eval_loss: LossSpec,
    l_star: float,
    rep: int,
    axis_index: Optional[int],
    axis_param: str,
    axis_value: str,
) -> RunRecord:
    seed = _seed_tuple(cfg, rep, axis_index)
    rng = np.random.default_rng(seed)
    p = cfg.params
    if cfg.kind == "alg1":
        out = finite_log_loss(inst.Q, inst.p_source(), p, rng)
    elif cfg.kind == "alg2":
        out = valid_restriction(
            inst.Q,
            inst.validity_class,
            inst.p_source(),
            inst.oracle(),
            eval_loss,
            p,
            rng,
            known_validity_floor=cfg.known_validity_floor,
        )
    else:
        out = valid_restriction_log(
            inst.Q,
            inst.validity_class,
            inst.d_ref,
            inst.d_ref_validity,
            inst.p_source(),
            inst.oracle(),
            p,
            rng,
        )
    gap = expected_loss(inst.P, out.model, eval_loss) - l_star
    inv = invalidity(out.model, inst.valid_region)
    return RunRecord(
        experiment_id=cfg.experiment_id,
        kind=cfg.kind,
        rep=rep,
        seed=_seed_str(seed),
        n_samples=out.samples_used,
        n_queries=out.queries_used,
        loss_gap=gap,
        invalidity=inv,
        tv_to_p=tv(out.model, inst.P),
        fallback_triggered=out.fallback_triggered,
        success_loss=gap <= p.eps1,
        success_validity=inv <= p.eps2,
        axis_param=axis_param,
        axis_value=axis_value,
        **_echo_fields(cfg, len(inst.Q), inst.validity_class.vc_dimension),
    )


def _flip_record(
    cfg: ExperimentConfig,
    P: PiecewiseDensity,
    q: PiecewiseDensity,
    valid: IntervalUnion,
    inv_q: float,
    tv_pq: float,
    n: int,
    rep: int,
    axis_index: Optional[int],
    axis_param: str,
    axis_value: str,
) -> RunRecord:
    seed = _seed_tuple(cfg, rep, axis_index)
    rng = np.random.default_rng(seed)
    S = sample(P, rng, n)
    loss = LossSpec.log()
    gap = empirical_loss(S, q, loss) - empirical_loss(S, P, loss)
    if math.isnan(gap):  # both sides infinite
        gap = 0.0
    no_flip = gap > 0  # flip event: L_S(q) <= L_S(P)
    return RunRecord(
        experiment_id=cfg.experiment_id,
        kind=cfg.kind,
        rep=rep,
        seed=_seed_str(seed),
        n_samples=n,
        n_queries=0,
        loss_gap=gap,
        invalidity=inv_q,
        tv_to_p=tv_pq,
        fallback_triggered=False,
        success_loss=no_flip,
        success_validity=inv_q <= cfg.params.eps2,
        axis_param=axis_param,
        axis_value=axis_value,
        **_echo_fields(cfg, 2, 0),
    )


@dataclass(frozen=True)
class LowerBoundResult:
    """Per-environment failure frequency of few-sample in-class selection."""

    failure_freq: tuple[float, float]
    selections: tuple[np.ndarray, np.ndarray]
    pair: tuple[ProblemInstance, ProblemInstance]


def lower_bound_experiment(
    eps2: float, n: int, reps: int, base_seed: int, axis_index: Optional[int] = None
) -> LowerBoundResult:
    """Run in-class log-loss selection on both few-sample environments.

    Empirical log-losses of piecewise models depend on the sample only
    through its cell counts, so each replication draws multinomial counts
    on the shared grid -- distributionally identical to scoring raw
    samples.  Ties (all mass in the overlap cell) resolve to index 0; the
    failure event is selecting the model that is invalid in the
    environment at hand.
    """
    if n < 1:
        raise ValueError("sample size must be positive")
    pair = make_lower_bound_instance(eps2)
    with np.errstate(divide="ignore"):
        logdens = [np.log(np.asarray(q.densities)) for q in pair[0].Q]
    selections = []
    failures = []
    for inst_idx, inst in enumerate(pair):
        seed = (
            (base_seed, inst_idx)
            if axis_index is None
            else (base_seed, axis_index, inst_idx)
        )
        rng = np.random.default_rng(seed)
        counts = rng.multinomial(n, np.asarray(inst.P.masses), size=reps)
        with np.errstate(invalid="ignore"):
            scores = [
                np.where(counts > 0, counts * ld, 0.0).sum(axis=1) for ld in logdens
            ]
        picks = np.where(scores[0] >= scores[1], 0, 1)
        selections.append(picks)
        failures.append(float(np.mean(picks != inst_idx)))
    return LowerBoundResult(
        failure_freq=(failures[0], failures[1]),
        selections=(selections[0], selections[1]),
        pair=pair,
    )


def _lower_bound_records(
    cfg: ExperimentConfig, n: int, axis_index: Optional[int], axis_param: str, axis_value: str
) -> list[RunRecord]:
    result = lower_bound_experiment(
        cfg.params.eps2, n, cfg.reps, cfg.base_seed, axis_index
    )
    loss = LossSpec.log()
    records = []
    for inst_idx, inst in enumerate(result.pair):
        l_star = inst.optimal_loss
        gaps = [expected_loss(inst.P, q, loss) - l_star for q in inst.Q]
        invs = [invalidity(q, inst.valid_region) for q in inst.Q]
        tvs = [tv(q, inst.P) for q in inst.Q]
        seed = (
            (cfg.base_seed, inst_idx)
            if axis_index is None
            else (cfg.base_seed, axis_index, inst_idx)
        )
        for rep, pick in enumerate(result.selections[inst_idx]):
            pick = int(pick)
            records.append(
                RunRecord(
                    experiment_id=f"{cfg.experiment_id}/{inst_idx}",
                    kind=cfg.kind,
                    rep=rep,
                    seed=_seed_str(seed),
                    n_samples=n,
                    n_queries=0,
                    loss_gap=gaps[pick],
                    invalidity=invs[pick],
                    tv_to_p=tvs[pick],
                    fallback_triggered=False,
                    success_loss=gaps[pick] <= cfg.params.eps1,
                    success_validity=invs[pick] <= cfg.params.eps2,
                    axis_param=axis_param,
                    axis_value=axis_value,
                    **_echo_fields(cfg, 2, result.pair[0].validity_class.vc_dimension),
                )
            )
    records.sort(key=lambda r: (r.experiment_id, r.rep))
    return records


# ---------------------------------------------------------------------------
# top-level drivers
# ---------------------------------------------------------------------------


def _default_eval_loss(cfg: ExperimentConfig) -> LossSpec:
    if cfg.kind == "alg1":
        return LossSpec.log()
    if cfg.kind == "alg3":
        return LossSpec.capped_log(cfg.params.M)
    if cfg.loss is not None:
        return cfg.loss
    if cfg.kind == "alg2":
        return LossSpec.hinge()
    return LossSpec.log()


def _run_once(
    cfg: ExperimentConfig,
    axis_index: Optional[int] = None,
    axis_param: str = "",
    axis_value: str = "",
) -> ExperimentResult:
    result = ExperimentResult()
    if cfg.kind in ("alg1", "alg2", "alg3"):
        eval_loss = _default_eval_loss(cfg)
        inst = build_instance(cfg.instance, default_loss=eval_loss)
        if cfg.kind == "alg3" and inst.d_ref is None:
            raise ConfigError(["alg3 needs an instance with a reference distribution"])
        l_star = expected_loss(inst.P, inst.Q[inst.q_star_index], eval_loss)
        result.records = _run_reps(
            cfg.reps,
            lambda rep: _learner_record(
                cfg, inst, eval_loss, l_star, rep, axis_index, axis_param, axis_value
            ),
        )
    elif cfg.kind in ("lemma4", "flipprob"):
        P, q, valid = _pair_from_dict(cfg.pair)
        inv_q = invalidity(q, valid)
        tv_pq = tv(P, q)
        n = cfg.n
        result.records = _run_reps(
            cfg.reps,
            lambda rep: _flip_record(
                cfg, P, q, valid, inv_q, tv_pq, n, rep, axis_index, axis_param, axis_value
            ),
        )
    elif cfg.kind == "lower_bound":
        result.records = _lower_bound_records(
            cfg, cfg.n, axis_index, axis_param, axis_value
        )
    elif cfg.kind == "product_tv":
        P, q, valid = _pair_from_dict(cfg.pair)
        inv_q = invalidity(q, valid)
        inv_p = invalidity(P, valid)
        margin_inv = inv_q if (inv_p <= 1e-12 and inv_q > 0.0) else None
        n_max = cfg.n
        for n in range(1, n_max + 1):
            rep_row = ProductTVReport.build(P, q, n, invalid_mass_of_q=margin_inv)
            result.product_rows.append(_product_row(cfg.experiment_id, "p-q", rep_row))
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError([f"unhandled kind {cfg.kind!r}"])
    result.summary = _summarize(cfg, result)
    return result


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Execute all replications for a config (no sweep axis)."""
    return _run_once(cfg)


def sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """One sub-experiment per axis value; records carry the axis tag."""
    if not cfg.sweep_param or not cfg.sweep_values:
        raise ConfigError(["sweep requires an axis (param + nonempty values)"])
    combined = ExperimentResult()
    for i, value in enumerate(cfg.sweep_values):
        sub = _apply_axis(cfg, cfg.sweep_param, value)
        part = _run_once(
            sub, axis_index=i, axis_param=cfg.sweep_param, axis_value=_fmt_axis(value)
        )
        combined.records.extend(part.records)
        combined.product_rows.extend(part.product_rows)
        combined.summary[f"{cfg.sweep_param}={_fmt_axis(value)}"] = part.summary
    return combined


def _fmt_axis(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return _fmt(float(value))


def _apply_axis(cfg: ExperimentConfig, param: str, value) -> ExperimentConfig:
    if param == "n":
        return replace(cfg, n=int(value))
    return replace(cfg, params=cfg.params.with_(**{param: value}))


def _product_row(experiment_id: str, pair_id: str, rep: ProductTVReport) -> tuple:
    return (
        SCHEMA_VERSION,
        experiment_id,
        pair_id,
        str(rep.n),
        _fmt(rep.tv_single),
        _fmt(rep.exact_tv),
        _fmt(rep.reis_lower),
        _fmt(rep.subadditive_upper),
        "" if rep.invalid_margin_lower is None else _fmt(rep.invalid_margin_lower),
    )


# ---------------------------------------------------------------------------
# summaries and CSV output
# ---------------------------------------------------------------------------


def _freq_with_ci(hits: int, total: int) -> dict:
    lo, hi, _ = _binomial_ci(hits, total)
    return {"freq": hits / total if total else 0.0, "ci_low": lo, "ci_high": hi}


def _summarize(cfg: ExperimentConfig, result: ExperimentResult) -> dict:
    recs = result.records
    if cfg.kind == "product_tv":
        return {"rows": len(result.product_rows)}
    if not recs:
        return {}
    total = len(recs)
    fail_loss = sum(1 for r in recs if not r.success_loss)
    fail_valid = sum(1 for r in recs if not r.success_validity)
    fail_bi = sum(1 for r in recs if not (r.success_loss and r.success_validity))
    out = {
        "kind": cfg.kind,
        "replications": total,
        "failure_loss": _freq_with_ci(fail_loss, total),
        "failure_validity": _freq_with_ci(fail_valid, total),
        "failure_bicriteria": _freq_with_ci(fail_bi, total),
        "total_queries": sum(r.n_queries for r in recs),
        "total_samples": sum(r.n_samples for r in recs),
        "fallback_count": sum(1 for r in recs if r.fallback_triggered),
    }
    if cfg.kind in ("lemma4", "flipprob"):
        out["flip"] = _freq_with_ci(fail_loss, total)
    if cfg.kind == "lower_bound":
        by_inst: dict[str, list[RunRecord]] = {}
        for r in recs:
            by_inst.setdefault(r.experiment_id, []).append(r)
        out["per_instance_failure"] = {
            key: _freq_with_ci(
                sum(1 for r in rows if not r.success_validity), len(rows)
            )
            for key, rows in sorted(by_inst.items())
        }
    return out


def format_summary(summary: dict, indent: int = 0) -> str:
    lines = []
    pad = "  " * indent
    for key, val in summary.items():
        if isinstance(val, dict) and "freq" in val:
            lines.append(
                f"{pad}{key}: {val['freq']:.5f} "
                f"[{val['ci_low']:.5f}, {val['ci_high']:.5f}] (99% CI)"
            )
        elif isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.append(format_summary(val, indent + 1))
        else:
            lines.append(f"{pad}{key}: {val}")
    return "\n".join(lines)


def write_records_csv(path: str, records: Sequence[RunRecord]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            writer.writerow(rec.to_row())


def write_product_csv(path: str, rows: Sequence[tuple]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRODUCT_COLUMNS)
        for row in rows:
            writer.writerow(list(row))

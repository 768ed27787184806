import os

import pytest

from validlearn import (
    ConfigError,
    ExperimentConfig,
    lower_bound_experiment,
    run_experiment,
    sweep,
)
from validlearn.experiments import (
    RECORD_COLUMNS,
    SCHEMA_VERSION,
    build_instance,
    write_records_csv,
)
from validlearn.learners import n_vc_realizable


def _alg2_config(**overrides):
    data = {
        "name": "t-alg2",
        "kind": "alg2",
        "reps": 5,
        "base_seed": 77,
        "params": {"eps1": 0.2, "eps2": 0.1, "delta": 0.1, "M": 1.0, "gamma": 0.5},
        "loss": {"kind": "hinge", "cap": 1.0},
        "instance": {
            "generator": "mismatched",
            "seed": 3,
            "bins": 16,
            "size_q": 4,
            "gamma_floor": 0.5,
            "beta_cap": 16.0,
            "k": 2,
        },
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


def _pair_config(**overrides):
    data = {
        "name": "t-pair",
        "kind": "lemma4",
        "reps": 50,
        "base_seed": 5,
        "params": {"eps1": 0.2, "eps2": 0.05, "delta": 0.1},
        "pair": {
            "p": {"breakpoints": [0.0, 0.5, 1.0], "masses": [0.5, 0.5]},
            "q": {"breakpoints": [0.0, 0.5, 1.0], "masses": [0.3, 0.7]},
        },
        "n": 60,
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


class TestConfigValidation:
    def test_lists_every_problem(self):
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict({"kind": "nope", "reps": 0})
        text = str(exc.value)
        assert "kind" in text and "reps" in text and "base_seed" in text

    def test_kind_requirements(self):
        with pytest.raises(ConfigError, match="instance"):
            ExperimentConfig.from_dict(
                {
                    "kind": "alg1",
                    "reps": 1,
                    "base_seed": 1,
                    "params": {"eps1": 0.2, "eps2": 0.1, "delta": 0.1},
                }
            )
        with pytest.raises(ConfigError, match="pair"):
            ExperimentConfig.from_dict(
                {
                    "kind": "lemma4",
                    "reps": 1,
                    "base_seed": 1,
                    "n": 5,
                    "params": {"eps1": 0.2, "eps2": 0.1, "delta": 0.1},
                }
            )

    def test_sweep_axis_validated(self):
        with pytest.raises(ConfigError, match="sweep"):
            _pair_config(sweep={"param": "bogus", "values": [1]})
        with pytest.raises(ConfigError, match="sweep"):
            _pair_config(sweep={"param": "n", "values": []})

    def test_alg2_m_follows_loss_cap(self):
        cfg = _alg2_config(loss={"kind": "capped_log", "cap": 3.0})
        assert cfg.params.M == 3.0


class TestDeterminism:
    def test_identical_configs_identical_csv(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            result = run_experiment(_alg2_config())
            write_records_csv(tmp_path / name, result.records)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_thread_count_does_not_change_output(self, tmp_path):
        result = run_experiment(_pair_config())
        write_records_csv(tmp_path / "serial.csv", result.records)
        os.environ["VALIDLEARN_THREADS"] = "4"
        try:
            result2 = run_experiment(_pair_config())
        finally:
            del os.environ["VALIDLEARN_THREADS"]
        write_records_csv(tmp_path / "threaded.csv", result2.records)
        assert (
            (tmp_path / "serial.csv").read_bytes()
            == (tmp_path / "threaded.csv").read_bytes()
        )

    def test_seed_override_changes_output(self):
        a = run_experiment(_pair_config())
        b = run_experiment(_pair_config(base_seed=6))
        assert any(
            ra.loss_gap != rb.loss_gap for ra, rb in zip(a.records, b.records)
        )


class TestLearnerRecords:
    def test_alg2_query_formula(self):
        result = run_experiment(_alg2_config())
        expected = n_vc_realizable(4, 0.5 * 0.1 / 2.0, 0.1)
        assert expected == 2730
        for rec in result.records:
            assert rec.n_queries == expected
            assert rec.vc_dim == 4 and rec.size_q == 4
            assert rec.success_loss == (rec.loss_gap <= rec.eps1)
            assert rec.success_validity == (rec.invalidity <= rec.eps2)

    def test_exact_evaluation_consistency(self):
        # success bits recomputable from the stored exact functionals
        result = run_experiment(_alg2_config())
        for rec in result.records:
            assert 0.0 <= rec.invalidity <= 1.0
            assert 0.0 <= rec.tv_to_p <= 1.0

    def test_accounting_totals(self):
        result = run_experiment(_alg2_config())
        assert result.summary["total_queries"] == sum(
            r.n_queries for r in result.records
        )

    def test_alg1_zero_queries(self):
        cfg = ExperimentConfig.from_dict(
            {
                "kind": "alg1",
                "reps": 3,
                "base_seed": 9,
                "params": {"eps1": 0.2, "eps2": 0.05, "delta": 0.1, "c1": 2.0},
                "instance": {
                    "generator": "realizable",
                    "seed": 4,
                    "bins": 8,
                    "size_q": 3,
                    "invalidity_profile": [0, 0.2, 0.4],
                },
            }
        )
        result = run_experiment(cfg)
        assert all(r.n_queries == 0 for r in result.records)

    def test_single_rep_singleton_class(self):
        cfg = ExperimentConfig.from_dict(
            {
                "kind": "alg1",
                "reps": 1,
                "base_seed": 2,
                "params": {"eps1": 0.2, "eps2": 0.05, "delta": 0.1},
                "instance": {
                    "generator": "realizable",
                    "seed": 1,
                    "bins": 8,
                    "size_q": 1,
                    "invalidity_profile": [0.0],
                },
            }
        )
        result = run_experiment(cfg)
        assert len(result.records) == 1
        assert result.records[0].n_queries == 0


class TestPairRecords:
    def test_flip_bit_semantics(self):
        result = run_experiment(_pair_config())
        for rec in result.records:
            assert rec.success_loss == (rec.loss_gap > 0)
            assert abs(rec.tv_to_p - 0.2) < 1e-12

    def test_summary_flip_matches_records(self):
        result = run_experiment(_pair_config())
        flips = sum(1 for r in result.records if not r.success_loss)
        assert result.summary["flip"]["freq"] == flips / len(result.records)


class TestSweep:
    def test_requires_axis(self):
        with pytest.raises(ConfigError):
            sweep(_pair_config())

    def test_axis_tags_and_query_monotonicity(self):
        cfg = _alg2_config(sweep={"param": "eps2", "values": [0.2, 0.1, 0.05]}, reps=2)
        result = sweep(cfg)
        by_axis = {}
        for rec in result.records:
            assert rec.axis_param == "eps2"
            by_axis.setdefault(rec.axis_value, set()).add(rec.n_queries)
        counts = [by_axis[k].pop() for k in ("0.2", "0.1", "0.05")]
        assert counts[0] < counts[1] < counts[2]

    def test_n_axis_for_pair_kind(self):
        cfg = _pair_config(sweep={"param": "n", "values": [10, 40]}, reps=30)
        result = sweep(cfg)
        ns = {rec.axis_value for rec in result.records}
        assert ns == {"10", "40"}


class TestLowerBound:
    def test_small_n_fails_often_large_n_rarely(self):
        small = lower_bound_experiment(0.05, 2, 2000, base_seed=1)
        big = lower_bound_experiment(0.05, 4000, 2000, base_seed=2)
        assert max(small.failure_freq) >= 0.2
        assert max(big.failure_freq) <= 0.01

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            lower_bound_experiment(0.05, 0, 100, base_seed=1)

    def test_records_per_environment(self):
        cfg = ExperimentConfig.from_dict(
            {
                "name": "lb",
                "kind": "lower_bound",
                "reps": 50,
                "base_seed": 3,
                "params": {"eps1": 0.5, "eps2": 0.05, "delta": 0.1},
                "n": 2,
            }
        )
        result = run_experiment(cfg)
        ids = {rec.experiment_id for rec in result.records}
        assert ids == {"lb/0", "lb/1"}
        assert len(result.records) == 100
        assert "per_instance_failure" in result.summary


class TestCsvSchema:
    def test_row_shape_and_token(self, tmp_path):
        result = run_experiment(_pair_config())
        path = tmp_path / "out.csv"
        write_records_csv(path, result.records)
        lines = path.read_text().strip().split("\n")
        header = lines[0].split(",")
        assert header == RECORD_COLUMNS
        first = lines[1].split(",")
        assert first[0] == SCHEMA_VERSION
        assert len(first) == len(RECORD_COLUMNS)

    def test_infinite_loss_gap_serialized(self, tmp_path):
        cfg = _pair_config(
            pair={
                "p": {"breakpoints": [0.0, 0.5, 1.0], "masses": [1.0, 0.0]},
                "q": {"breakpoints": [0.0, 0.5, 1.0], "masses": [0.0, 1.0]},
            },
            reps=5,
            n=3,
        )
        result = run_experiment(cfg)
        path = tmp_path / "inf.csv"
        write_records_csv(path, result.records)
        assert "inf" in path.read_text()


def test_build_instance_inline_round_trip(rng):
    from validlearn import make_realizable_instance

    inst = make_realizable_instance(
        rng, bins=8, size_Q=2, invalidity_profile=[0, 0.2]
    )
    again = build_instance({"inline": inst.to_dict()})
    assert again.P == inst.P and again.Q == inst.Q

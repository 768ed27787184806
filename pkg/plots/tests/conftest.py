"""Builds the figure-input CSVs by driving the validlearn CLI, so these
tests exercise the real external interface (config in, versioned CSV out)."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
CONFIG_DIR = REPO_ROOT / "configs"


def _run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "validlearn.cli", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def _patched_config(name, tmp, **overrides):
    cfg = json.loads((CONFIG_DIR / name).read_text())
    cfg.update(overrides)
    cfg.pop("out", None)
    path = tmp / name
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="session")
def csv_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("csv")

    cfg = _patched_config("erm_flip_sweep_n.json", tmp, reps=200)
    _run_cli("sweep", str(cfg), "--out", str(tmp / "flip_sweep.csv"))

    cfg = _patched_config("restriction_sweep_eps2.json", tmp, reps=4)
    _run_cli("sweep", str(cfg), "--out", str(tmp / "query_sweep.csv"))

    cfg = _patched_config("product_tv_pair.json", tmp)
    _run_cli("run", str(cfg), "--out", str(tmp / "product.csv"))

    cfg = _patched_config("lower_bound.json", tmp, reps=400)
    _run_cli("sweep", str(cfg), "--out", str(tmp / "lower_bound.csv"))

    return tmp

from __future__ import annotations

import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

import oracle
from fixture_support import FIXTURES_ROOT, random_case, write_csv

from langcoder.core import MetricSpec
from langcoder.evaluation import PredictionTable, score

ORACLE = FIXTURES_ROOT / "oracle.py"
ALL_METRICS = list(oracle.METRICS)


def run_oracle(metric: str, truth: Path, pred: Path) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, str(ORACLE), metric, str(truth), str(pred)],
        capture_output=True,
        text=True,
        timeout=60,
    )


def run_primary_cli(metric: str, truth: Path, pred: Path) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "langcoder.cli", "eval", metric, str(truth), str(pred)],
        capture_output=True,
        text=True,
        timeout=120,
    )


def primary_score(metric: str, ids, truth_cols, pred_cols) -> float:
    truth = PredictionTable.from_rows(ids, truth_cols)
    pred = PredictionTable.from_rows(ids, pred_cols)
    return score(MetricSpec.for_name(metric), truth, pred)


def oracle_module_score(metric: str, truth_cols, pred_cols) -> float:
    names = list(truth_cols)
    truth_rows = [list(values) for values in zip(*(truth_cols[n] for n in names))]
    pred_rows = [list(values) for values in zip(*(pred_cols[n] for n in names))]
    return oracle.compute(metric, truth_rows, pred_rows)


def test_oracle_prints_zero_for_identical_files(tmp_path):
    path = write_csv(tmp_path / "same.csv", ["1", "2"], {"v": [1.5, 2.5]})
    completed = run_oracle("rmse", path, path)
    assert completed.returncode == 0
    assert float(completed.stdout.strip()) == 0.0
    assert completed.stdout.strip() == "0.0"


def test_oracle_prints_roc_auc_for_four_row_case(tmp_path):
    truth = write_csv(tmp_path / "t.csv", list("abcd"), {"v": [0.0, 0.0, 1.0, 1.0]})
    pred = write_csv(tmp_path / "p.csv", list("abcd"), {"v": [0.1, 0.4, 0.35, 0.8]})
    completed = run_oracle("roc_auc", truth, pred)
    assert completed.returncode == 0
    assert abs(float(completed.stdout.strip()) - 0.75) <= 1e-9


def test_oracle_rejects_unknown_metric(tmp_path):
    path = write_csv(tmp_path / "x.csv", ["1"], {"v": [1.0]})
    completed = run_oracle("log_loss", path, path)
    assert completed.returncode != 0
    assert "unknown metric" in completed.stderr


def test_oracle_rejects_malformed_input(tmp_path):
    good = write_csv(tmp_path / "good.csv", ["1"], {"v": [1.0]})
    bad = tmp_path / "bad.csv"
    bad.write_text("id,v\n1,not-a-number\n", encoding="utf-8")
    completed = run_oracle("rmse", good, bad)
    assert completed.returncode != 0
    assert completed.stderr.strip()

    missing = run_oracle("rmse", good, tmp_path / "absent.csv")
    assert missing.returncode != 0

    mismatched = write_csv(tmp_path / "other.csv", ["9"], {"v": [1.0]})
    completed = run_oracle("rmse", good, mismatched)
    assert completed.returncode != 0
    assert "ids do not match" in completed.stderr


def test_oracle_rejects_single_class_roc(tmp_path):
    truth = write_csv(tmp_path / "t.csv", ["1", "2"], {"v": [1.0, 1.0]})
    pred = write_csv(tmp_path / "p.csv", ["1", "2"], {"v": [0.2, 0.8]})
    completed = run_oracle("roc_auc", truth, pred)
    assert completed.returncode != 0


def test_oracle_alignment_is_order_independent(tmp_path):
    truth = write_csv(tmp_path / "t.csv", ["a", "b"], {"v": [1.0, 2.0]})
    pred = write_csv(tmp_path / "p.csv", ["b", "a"], {"v": [2.0, 1.0]})
    completed = run_oracle("rmse", truth, pred)
    assert completed.returncode == 0
    assert float(completed.stdout.strip()) == 0.0


def test_cross_implementation_equivalence_within_1e9():
    """100 random tables per metric: oracle vs primary harness agree."""
    started = time.monotonic()
    rng = random.Random(314159)
    for metric in ALL_METRICS:
        for _ in range(100):
            ids, truth_cols, pred_cols = random_case(metric, rng)
            mine = primary_score(metric, ids, truth_cols, pred_cols)
            reference = oracle_module_score(metric, truth_cols, pred_cols)
            assert abs(mine - reference) <= 1e-9, (metric, mine, reference)
    assert time.monotonic() - started < 30.0


@pytest.mark.parametrize("metric", ALL_METRICS)
def test_script_and_cli_boundaries_agree(metric, tmp_path):
    """One spot check per metric across both real process boundaries."""
    rng = random.Random(hash(metric) % (2**31))
    ids, truth_cols, pred_cols = random_case(metric, rng)
    truth = write_csv(tmp_path / "truth.csv", ids, truth_cols)
    pred = write_csv(tmp_path / "pred.csv", ids, pred_cols)

    oracle_run = run_oracle(metric, truth, pred)
    assert oracle_run.returncode == 0, oracle_run.stderr
    primary_run = run_primary_cli(metric, truth, pred)
    assert primary_run.returncode == 0, primary_run.stderr

    oracle_value = float(oracle_run.stdout.strip())
    primary_value = float(primary_run.stdout.strip().splitlines()[0])
    assert abs(oracle_value - primary_value) <= 1e-9
    # and both match the in-process computations they wrap
    assert abs(oracle_value - oracle_module_score(metric, truth_cols, pred_cols)) <= 1e-12
    assert abs(primary_value - primary_score(metric, ids, truth_cols, pred_cols)) <= 1e-12


def test_oracle_scores_the_reference_truth_fixture(tmp_path):
    """least_squares fixture scored against the bundled truth file."""
    from fixture_support import manifest_entry, run_fixture, stage_workspace

    workspace = stage_workspace(tmp_path / "ws")
    completed = run_fixture(manifest_entry("least_squares"), workspace)
    assert completed.returncode == 0
    truth = FIXTURES_ROOT / "data/truth.csv"
    scored = run_oracle("rmse", truth, workspace / "submission.csv")
    assert scored.returncode == 0
    assert float(scored.stdout.strip()) < 0.5  # near-linear data fits well

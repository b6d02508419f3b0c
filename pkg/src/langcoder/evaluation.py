"""Scoring, leaderboard percentiles, and run reports.

Metric implementations are deliberately plain: direct formulas and, for ROC
AUC, exhaustive pair counting. They are meant to be auditable at a glance
and checked against an independent re-computation in the test suite, not to
be fast on large tables.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .core import Direction, MetricName, MetricSpec
from .errors import MetricError, ValidationError

SINGLE_COLUMN_METRICS = frozenset(
    {
        MetricName.RMSE,
        MetricName.MAE,
        MetricName.ROC_AUC,
        MetricName.ACCURACY,
        MetricName.F1,
        MetricName.CATEGORIZATION_ACCURACY,
    }
)


@dataclass(frozen=True)
class PredictionTable:
    """Ids plus one or more equally long float columns."""

    ids: tuple[str, ...]
    columns: tuple[tuple[str, tuple[float, ...]], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(
            self, "columns", tuple((name, tuple(values)) for name, values in self.columns)
        )
        if not self.columns:
            raise ValidationError("table needs at least one value column")
        for name, values in self.columns:
            if len(values) != len(self.ids):
                raise ValidationError(
                    f"column {name!r} has {len(values)} values for {len(self.ids)} ids"
                )

    @classmethod
    def from_rows(
        cls, ids: Sequence[str], columns: Mapping[str, Sequence[float]]
    ) -> "PredictionTable":
        return cls(
            ids=tuple(str(i) for i in ids),
            columns=tuple((name, tuple(float(v) for v in values)) for name, values in columns.items()),
        )

    @classmethod
    def from_csv(cls, path: str | Path, id_column: str | None = None) -> "PredictionTable":
        """Read a header CSV; the id column is the first one unless named."""
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise MetricError(f"{path} is empty") from None
            if not header:
                raise MetricError(f"{path} has an empty header row")
            id_index = 0 if id_column is None else _index_of(header, id_column, path)
            value_names = [name for i, name in enumerate(header) if i != id_index]
            ids: list[str] = []
            values: list[list[float]] = [[] for _ in value_names]
            for row_no, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise MetricError(f"{path} row {row_no}: expected {len(header)} cells")
                ids.append(row[id_index])
                position = 0
                for i, cell in enumerate(row):
                    if i == id_index:
                        continue
                    try:
                        values[position].append(float(cell))
                    except ValueError:
                        raise MetricError(
                            f"{path} row {row_no}: {cell!r} is not a number"
                        ) from None
                    position += 1
        return cls(
            ids=tuple(ids),
            columns=tuple((name, tuple(col)) for name, col in zip(value_names, values)),
        )

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def row_count(self) -> int:
        return len(self.ids)


def _index_of(header: list[str], name: str, path: Path) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise MetricError(f"{path} has no column named {name!r}") from None


def _aligned_rows(
    truth: PredictionTable, pred: PredictionTable
) -> tuple[list[tuple[float, ...]], list[tuple[float, ...]]]:
    """Match rows by id (multiset), columns by name; order-independent."""
    if truth.row_count() == 0 or pred.row_count() == 0:
        raise MetricError("cannot score empty tables")
    if Counter(truth.ids) != Counter(pred.ids):
        extra = set(pred.ids) - set(truth.ids)
        missing = set(truth.ids) - set(pred.ids)
        raise MetricError(
            f"id mismatch between truth and prediction (missing: {sorted(missing)[:5]}, "
            f"unexpected: {sorted(extra)[:5]})"
        )
    if len(truth.columns) != len(pred.columns):
        raise MetricError(
            f"column mismatch: truth has {len(truth.columns)} value columns, "
            f"prediction has {len(pred.columns)}"
        )
    # single-column tables align positionally (header names routinely differ
    # between truth files and submissions); wider tables align by name
    if len(truth.columns) > 1 and truth.column_names() != pred.column_names():
        pred_by_name = dict(pred.columns)
        if set(pred_by_name) != set(truth.column_names()):
            raise MetricError(
                f"column mismatch: truth has {truth.column_names()}, "
                f"prediction has {pred.column_names()}"
            )
        pred = PredictionTable(
            ids=pred.ids, columns=tuple((n, pred_by_name[n]) for n in truth.column_names())
        )

    def sorted_rows(table: PredictionTable) -> list[tuple[float, ...]]:
        order = sorted(range(table.row_count()), key=lambda i: (table.ids[i], i))
        return [tuple(col[i] for _, col in table.columns) for i in order]

    return sorted_rows(truth), sorted_rows(pred)


def _rmse(truth: list[float], pred: list[float]) -> float:
    return math.sqrt(sum((t - p) ** 2 for t, p in zip(truth, pred)) / len(truth))


def _roc_auc(truth: list[float], pred: list[float]) -> float:
    labels = sorted(set(truth))
    if len(labels) < 2:
        raise MetricError("roc_auc is undefined for single-class truth")
    if len(labels) > 2:
        raise MetricError(f"roc_auc needs binary truth, got labels {labels}")
    positive = labels[1]
    pos_scores = [p for t, p in zip(truth, pred) if t == positive]
    neg_scores = [p for t, p in zip(truth, pred) if t != positive]
    concordant = 0.0
    for pos in pos_scores:
        for neg in neg_scores:
            if pos > neg:
                concordant += 1.0
            elif pos == neg:
                concordant += 0.5
    return concordant / (len(pos_scores) * len(neg_scores))


def _nearest_label(value: float, labels: list[float]) -> float:
    # ties go to the smaller label, labels are sorted ascending
    return min(labels, key=lambda label: (abs(value - label), label))


def _accuracy(truth: list[float], pred: list[float]) -> float:
    labels = sorted(set(truth))
    hits = sum(1 for t, p in zip(truth, pred) if _nearest_label(p, labels) == t)
    return hits / len(truth)


def _f1(truth: list[float], pred: list[float]) -> float:
    labels = sorted(set(truth))
    positive = labels[-1]
    rounded = [_nearest_label(p, labels) for p in pred]
    tp = sum(1 for t, p in zip(truth, rounded) if t == positive and p == positive)
    fp = sum(1 for t, p in zip(truth, rounded) if t != positive and p == positive)
    fn = sum(1 for t, p in zip(truth, rounded) if t == positive and p != positive)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


def _categorization_accuracy(truth: list[float], pred: list[float]) -> float:
    hits = sum(
        1 for t, p in zip(truth, pred) if _round_half_up(p) == _round_half_up(t)
    )
    return hits / len(truth)


def _mean_cosine_similarity(truth_rows: list[tuple[float, ...]], pred_rows: list[tuple[float, ...]]) -> float:
    total = 0.0
    for t, p in zip(truth_rows, pred_rows):
        norm_t = math.sqrt(sum(x * x for x in t))
        norm_p = math.sqrt(sum(x * x for x in p))
        if norm_t == 0.0 or norm_p == 0.0:
            continue  # zero-norm rows contribute 0
        total += sum(a * b for a, b in zip(t, p)) / (norm_t * norm_p)
    return total / len(truth_rows)


def score(metric: MetricSpec, truth: PredictionTable, pred: PredictionTable) -> float:
    """Score predictions against ground truth under one metric."""
    truth_rows, pred_rows = _aligned_rows(truth, pred)
    n_columns = len(truth.columns)
    if metric.name in SINGLE_COLUMN_METRICS and n_columns != 1:
        raise MetricError(f"{metric.name.value} expects a single value column, got {n_columns}")

    if metric.name in SINGLE_COLUMN_METRICS:
        t = [row[0] for row in truth_rows]
        p = [row[0] for row in pred_rows]
        if metric.name is MetricName.RMSE:
            return _rmse(t, p)
        if metric.name is MetricName.MAE:
            return sum(abs(a - b) for a, b in zip(t, p)) / len(t)
        if metric.name is MetricName.ROC_AUC:
            return _roc_auc(t, p)
        if metric.name is MetricName.ACCURACY:
            return _accuracy(t, p)
        if metric.name is MetricName.F1:
            return _f1(t, p)
        return _categorization_accuracy(t, p)

    if metric.name is MetricName.MCRMSE:
        per_column = [
            _rmse([row[c] for row in truth_rows], [row[c] for row in pred_rows])
            for c in range(n_columns)
        ]
        return sum(per_column) / len(per_column)
    return _mean_cosine_similarity(truth_rows, pred_rows)


def percentile(candidate: float, leaderboard: Sequence[float], direction: Direction) -> int:
    """floor(100 * share of leaderboard entries strictly better); 0 is best."""
    entries = list(leaderboard)
    if not entries:
        raise MetricError("percentile needs a non-empty leaderboard")
    if direction is Direction.LOWER_BETTER:
        better = sum(1 for entry in entries if entry < candidate)
    else:
        better = sum(1 for entry in entries if entry > candidate)
    return (100 * better) // len(entries)


@dataclass(frozen=True)
class RunReport:
    """Summary of one pipeline run; score may only be set on success."""

    task_id: str
    provenance: str | None
    fix_attempts: int
    execution_status: str
    metric_name: str | None
    score: float | None = None
    percentile: int | None = None
    wall_times: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.score is not None and self.execution_status != "success":
            raise ValidationError("a score requires a successful execution")
        object.__setattr__(self, "wall_times", tuple(tuple(p) for p in self.wall_times))

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "provenance": self.provenance,
            "fix_attempts": self.fix_attempts,
            "execution_status": self.execution_status,
            "metric_name": self.metric_name,
            "score": self.score,
            "percentile": self.percentile,
            "wall_times": {phase: seconds for phase, seconds in self.wall_times},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunReport":
        return cls(
            task_id=data["task_id"],
            provenance=data.get("provenance"),
            fix_attempts=data["fix_attempts"],
            execution_status=data["execution_status"],
            metric_name=data.get("metric_name"),
            score=data.get("score"),
            percentile=data.get("percentile"),
            wall_times=tuple((k, v) for k, v in (data.get("wall_times") or {}).items()),
        )

    def summary(self) -> str:
        score_text = "n/a" if self.score is None else f"{self.score:.6g}"
        pct_text = "n/a" if self.percentile is None else str(self.percentile)
        total = sum(seconds for _, seconds in self.wall_times)
        return (
            f"task={self.task_id} status={self.execution_status} "
            f"metric={self.metric_name or 'n/a'} score={score_text} "
            f"percentile={pct_text} fix_attempts={self.fix_attempts} "
            f"wall={total:.2f}s"
        )


def build_report(
    task_id: str,
    provenance: str | None,
    fix_attempts: int,
    execution_status: str,
    metric_name: str | None,
    score_value: float | None = None,
    percentile_value: int | None = None,
    wall_times: Mapping[str, float] | None = None,
) -> RunReport:
    """Assemble a RunReport, enforcing the score-implies-success invariant."""
    return RunReport(
        task_id=task_id,
        provenance=provenance,
        fix_attempts=fix_attempts,
        execution_status=execution_status,
        metric_name=metric_name,
        score=score_value,
        percentile=percentile_value,
        wall_times=tuple((wall_times or {}).items()),
    )

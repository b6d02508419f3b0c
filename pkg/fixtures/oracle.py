#!/usr/bin/env python3
"""Standalone metric oracle: score a prediction CSV against ground truth.

Usage: oracle.py <metric> <truth.csv> <pred.csv>

Prints the score to stdout in round-trip decimal form (exact to the double,
at least ten significant digits where they matter) and exits nonzero with a
message on malformed input. The formulas here are written from scratch on
the standard library so the result can cross-check any other scorer without
sharing code with it.
"""

from __future__ import annotations

import csv
import math
import sys

METRICS = (
    "rmse",
    "mae",
    "mcrmse",
    "roc_auc",
    "accuracy",
    "f1",
    "categorization_accuracy",
    "mean_cosine_similarity",
)

MULTI_COLUMN = {"mcrmse", "mean_cosine_similarity"}


class OracleInputError(Exception):
    pass


def read_table(path: str) -> tuple[list[str], list[str], list[list[float]]]:
    """Returns (ids, column names, rows); first CSV column is the id."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise OracleInputError(f"{path}: empty file") from None
            if len(header) < 2:
                raise OracleInputError(f"{path}: need an id column plus values")
            ids, rows = [], []
            for number, record in enumerate(reader, start=2):
                if len(record) != len(header):
                    raise OracleInputError(f"{path}:{number}: wrong cell count")
                ids.append(record[0])
                try:
                    rows.append([float(cell) for cell in record[1:]])
                except ValueError as exc:
                    raise OracleInputError(f"{path}:{number}: {exc}") from None
    except OSError as exc:
        raise OracleInputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise OracleInputError(f"{path}: no data rows")
    return ids, header[1:], rows


def align(truth_path: str, pred_path: str) -> tuple[list[list[float]], list[list[float]]]:
    truth_ids, truth_cols, truth_rows = read_table(truth_path)
    pred_ids, pred_cols, pred_rows = read_table(pred_path)
    if sorted(truth_ids) != sorted(pred_ids):
        raise OracleInputError("truth and prediction ids do not match")
    if len(truth_cols) != len(pred_cols):
        raise OracleInputError("truth and prediction column counts do not match")
    if len(truth_cols) > 1:
        # multi-column tables align by name; single columns pair positionally
        if sorted(truth_cols) != sorted(pred_cols):
            raise OracleInputError("truth and prediction columns do not match")
        column_order = [pred_cols.index(name) for name in truth_cols]
        pred_rows = [[row[i] for i in column_order] for row in pred_rows]
    truth_sorted = [row for _, _, row in sorted(zip(truth_ids, range(len(truth_rows)), truth_rows))]
    pred_sorted = [row for _, _, row in sorted(zip(pred_ids, range(len(pred_rows)), pred_rows))]
    return truth_sorted, pred_sorted


def column(rows: list[list[float]], index: int) -> list[float]:
    return [row[index] for row in rows]


def rmse_of(truth: list[float], pred: list[float]) -> float:
    return math.sqrt(math.fsum((t - p) ** 2 for t, p in zip(truth, pred)) / len(truth))


def mae_of(truth: list[float], pred: list[float]) -> float:
    return math.fsum(abs(t - p) for t, p in zip(truth, pred)) / len(truth)


def roc_auc_of(truth: list[float], pred: list[float]) -> float:
    """Mann-Whitney rank statistic with midranks for tied scores."""
    classes = sorted(set(truth))
    if len(classes) != 2:
        raise OracleInputError(f"roc_auc needs exactly two classes, got {len(classes)}")
    positive = classes[1]
    order = sorted(range(len(pred)), key=lambda i: pred[i])
    ranks = [0.0] * len(pred)
    index = 0
    while index < len(order):
        tied_end = index
        while tied_end + 1 < len(order) and pred[order[tied_end + 1]] == pred[order[index]]:
            tied_end += 1
        midrank = (index + tied_end) / 2 + 1
        for position in range(index, tied_end + 1):
            ranks[order[position]] = midrank
        index = tied_end + 1
    n_pos = sum(1 for t in truth if t == positive)
    n_neg = len(truth) - n_pos
    rank_sum = math.fsum(r for r, t in zip(ranks, truth) if t == positive)
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def nearest(value: float, labels: list[float]) -> float:
    best = labels[0]
    for label in labels[1:]:
        if abs(value - label) < abs(value - best):
            best = label
    return best


def accuracy_of(truth: list[float], pred: list[float]) -> float:
    labels = sorted(set(truth))
    return sum(1 for t, p in zip(truth, pred) if nearest(p, labels) == t) / len(truth)


def f1_of(truth: list[float], pred: list[float]) -> float:
    labels = sorted(set(truth))
    positive = labels[-1]
    decided = [nearest(p, labels) for p in pred]
    true_pos = sum(1 for t, p in zip(truth, decided) if t == positive and p == positive)
    pred_pos = sum(1 for p in decided if p == positive)
    real_pos = sum(1 for t in truth if t == positive)
    if true_pos == 0:
        return 0.0
    precision = true_pos / pred_pos
    recall = true_pos / real_pos
    return 2 * precision * recall / (precision + recall)


def categorization_accuracy_of(truth: list[float], pred: list[float]) -> float:
    as_class = lambda v: math.floor(v + 0.5)  # noqa: E731
    return sum(1 for t, p in zip(truth, pred) if as_class(t) == as_class(p)) / len(truth)


def mcrmse_of(truth_rows: list[list[float]], pred_rows: list[list[float]]) -> float:
    width = len(truth_rows[0])
    scores = [rmse_of(column(truth_rows, i), column(pred_rows, i)) for i in range(width)]
    return math.fsum(scores) / width


def cosine_of(truth_rows: list[list[float]], pred_rows: list[list[float]]) -> float:
    total = 0.0
    for t, p in zip(truth_rows, pred_rows):
        norm_t = math.sqrt(math.fsum(x * x for x in t))
        norm_p = math.sqrt(math.fsum(x * x for x in p))
        if norm_t and norm_p:
            total += math.fsum(a * b for a, b in zip(t, p)) / (norm_t * norm_p)
    return total / len(truth_rows)


def compute(metric: str, truth_rows: list[list[float]], pred_rows: list[list[float]]) -> float:
    width = len(truth_rows[0])
    if metric not in MULTI_COLUMN and width != 1:
        raise OracleInputError(f"{metric} expects one value column, got {width}")
    if metric == "rmse":
        return rmse_of(column(truth_rows, 0), column(pred_rows, 0))
    if metric == "mae":
        return mae_of(column(truth_rows, 0), column(pred_rows, 0))
    if metric == "mcrmse":
        return mcrmse_of(truth_rows, pred_rows)
    if metric == "roc_auc":
        return roc_auc_of(column(truth_rows, 0), column(pred_rows, 0))
    if metric == "accuracy":
        return accuracy_of(column(truth_rows, 0), column(pred_rows, 0))
    if metric == "f1":
        return f1_of(column(truth_rows, 0), column(pred_rows, 0))
    if metric == "categorization_accuracy":
        return categorization_accuracy_of(column(truth_rows, 0), column(pred_rows, 0))
    return cosine_of(truth_rows, pred_rows)


def main(argv: list[str]) -> int:
    if len(argv) != 4:
        print("usage: oracle.py <metric> <truth.csv> <pred.csv>", file=sys.stderr)
        return 2
    metric = argv[1]
    if metric not in METRICS:
        print(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}", file=sys.stderr)
        return 2
    try:
        truth_rows, pred_rows = align(argv[2], argv[3])
        value = compute(metric, truth_rows, pred_rows)
    except OracleInputError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(repr(value))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))

"""Competition corpus loading, metric-category filtering, top-K selection.

The corpus container is JSONL: one competition object per line with its
task fields and scored solutions. Metric and modality labels are normalized
through closed tables; an unknown label fails fast with its line number
rather than guessing a direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .core import (
    DataModality,
    MetricName,
    MetricSpec,
    SolutionRecord,
    TaskSpec,
    rank_solutions,
)
from .errors import CorpusError, ValidationError

DEFAULT_TOP_K = 75

# Original metric categories that are dropped from the working corpus.
EXCLUDED_METRIC_CATEGORIES = frozenset({"points", "significance", "custom loss"})

_METRIC_LABELS = {
    "rmse": MetricName.RMSE,
    "mae": MetricName.MAE,
    "mcrmse": MetricName.MCRMSE,
    "roc auc": MetricName.ROC_AUC,
    "auc": MetricName.ROC_AUC,
    "accuracy": MetricName.ACCURACY,
    "f1": MetricName.F1,
    "f1 score": MetricName.F1,
    "categorization accuracy": MetricName.CATEGORIZATION_ACCURACY,
    "mean cosine similarity": MetricName.MEAN_COSINE_SIMILARITY,
}

_MODALITY_LABELS = {
    "tabular": DataModality.TABULAR,
    "time series": DataModality.TIME_SERIES,
    "text": DataModality.TEXT,
    "image": DataModality.IMAGE,
    "images": DataModality.IMAGE,
}

_REQUIRED_FIELDS = ("id", "title", "description", "metric", "data_type", "solutions")
_REQUIRED_SOLUTION_FIELDS = ("id", "score", "code")


def _normalize_label(label: str) -> str:
    return " ".join(label.lower().replace("-", " ").replace("_", " ").split())


def normalize_metric_label(label: str) -> MetricName | None:
    """Map a raw metric label to its enum, or None for excluded categories."""
    norm = _normalize_label(label)
    if norm in EXCLUDED_METRIC_CATEGORIES:
        return None
    if norm in _METRIC_LABELS:
        return _METRIC_LABELS[norm]
    raise ValidationError(f"unknown metric label {label!r}")


def normalize_modality_label(label: str) -> DataModality:
    norm = _normalize_label(label)
    if norm in _MODALITY_LABELS:
        return _MODALITY_LABELS[norm]
    raise ValidationError(f"unknown data type label {label!r}")


@dataclass(frozen=True)
class Competition:
    task: TaskSpec
    solutions: tuple[SolutionRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "solutions", tuple(self.solutions))


@dataclass(frozen=True)
class Corpus:
    competitions: tuple[Competition, ...]
    raw_metric_names: dict[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "competitions", tuple(self.competitions))

    def __len__(self) -> int:
        return len(self.competitions)


def _parse_record(record: dict, line_no: int, errors: list[tuple[int, str]]) -> Competition | None:
    def fail(message: str) -> None:
        errors.append((line_no, message))

    for fieldname in _REQUIRED_FIELDS:
        if fieldname not in record:
            fail(f"missing field {fieldname!r}")
            return None
    try:
        metric_name = normalize_metric_label(str(record["metric"]))
        modality = normalize_modality_label(str(record["data_type"]))
    except ValidationError as exc:
        fail(str(exc))
        return None

    if not isinstance(record["solutions"], list):
        fail("field 'solutions' must be a list")
        return None
    solutions = []
    for i, sol in enumerate(record["solutions"]):
        if not isinstance(sol, dict):
            fail(f"solution #{i} must be an object")
            return None
        for fieldname in _REQUIRED_SOLUTION_FIELDS:
            if fieldname not in sol:
                fail(f"solution #{i} missing field {fieldname!r}")
                return None
        try:
            score = float(sol["score"])
        except (TypeError, ValueError):
            fail(f"solution #{i} score {sol['score']!r} is not a number")
            return None
        solutions.append(SolutionRecord(id=str(sol["id"]), source=str(sol["code"]), score=score))

    data_files = record.get("data_files") or ()
    leaderboard = record.get("leaderboard")
    if not isinstance(data_files, (list, tuple)):
        fail("field 'data_files' must be a list of paths")
        return None
    if leaderboard is not None and not isinstance(leaderboard, (list, tuple)):
        fail("field 'leaderboard' must be a list of scores")
        return None
    try:
        task = TaskSpec(
            id=str(record["id"]),
            title=str(record["title"]),
            description=str(record["description"]),
            metric=MetricSpec.for_name(metric_name) if metric_name is not None else None,
            modality=modality,
            data_files=tuple(str(f) for f in data_files),
            leaderboard=tuple(float(x) for x in leaderboard) if leaderboard is not None else None,
        )
    except (ValidationError, TypeError, ValueError) as exc:
        fail(str(exc))
        return None
    return Competition(task=task, solutions=tuple(solutions))


def load_corpus(path: str | Path) -> Corpus:
    """Parse a corpus JSONL file; any malformed line fails the whole load.

    Competitions in the excluded metric categories load with metric unset
    and raw label retained, so filter_metric_categories can drop them.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    competitions: list[Competition] = []
    raw_metric_names: dict[str, str] = {}
    seen_ids: dict[str, int] = {}
    errors: list[tuple[int, str]] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append((line_no, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(record, dict):
            errors.append((line_no, "record is not a JSON object"))
            continue
        competition = _parse_record(record, line_no, errors)
        if competition is None:
            continue
        task_id = competition.task.id
        if task_id in seen_ids:
            errors.append((line_no, f"duplicate task id {task_id!r} (first seen line {seen_ids[task_id]})"))
            continue
        seen_ids[task_id] = line_no
        competitions.append(competition)
        raw_metric_names[task_id] = str(record["metric"])

    if errors:
        detail = "; ".join(f"line {n}: {msg}" for n, msg in errors)
        raise CorpusError(f"corpus {path} has malformed records: {detail}", line_errors=errors)
    return Corpus(competitions=tuple(competitions), raw_metric_names=raw_metric_names)


def filter_metric_categories(corpus: Corpus) -> Corpus:
    """Drop competitions whose original metric label is an excluded category."""
    kept = []
    raw = {}
    for competition in corpus.competitions:
        label = corpus.raw_metric_names.get(competition.task.id, "")
        if _normalize_label(label) in EXCLUDED_METRIC_CATEGORIES:
            continue
        kept.append(competition)
        raw[competition.task.id] = label
    return Corpus(competitions=tuple(kept), raw_metric_names=raw)


def select_top_solutions(
    task: TaskSpec, solutions: list[SolutionRecord], k: int = DEFAULT_TOP_K
) -> list[SolutionRecord]:
    """The best min(k, n) solutions under the task metric, ranked 1..min(k, n)."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    ranked = rank_solutions(list(solutions), task.require_metric())
    ranked.sort(key=lambda sol: sol.rank)  # type: ignore[arg-type]
    return ranked[: min(k, len(ranked))]

from __future__ import annotations

import json

import pytest

from langcoder.core import DataModality, Direction, MetricName
from langcoder.corpus import (
    filter_metric_categories,
    load_corpus,
    normalize_metric_label,
    select_top_solutions,
)
from langcoder.errors import CorpusError, ValidationError

from support import make_task


def _competition_record(task_id="comp-1", metric="rmse", data_type="tabular", n_solutions=1, **extra):
    record = {
        "id": task_id,
        "title": f"Competition {task_id}",
        "description": "Predict the target column from the features.",
        "metric": metric,
        "data_type": data_type,
        "data_files": ["train.csv", "test.csv"],
        "solutions": [
            {"id": f"{task_id}-s{i}", "score": 0.1 * (i + 1), "code": f"print({i})"}
            for i in range(n_solutions)
        ],
    }
    record.update(extra)
    return record


def _write_corpus(tmp_path, records, name="corpus.jsonl"):
    path = tmp_path / name
    path.write_text(
        "".join(json.dumps(r) + "\n" for r in records), encoding="utf-8"
    )
    return path


def test_load_two_line_fixture(tmp_path):
    path = _write_corpus(tmp_path, [_competition_record(), _competition_record("comp-2")])
    corpus = load_corpus(path)
    assert len(corpus) == 2
    first = corpus.competitions[0]
    assert first.task.id == "comp-1"
    assert len(first.solutions) == 1
    assert first.solutions[0].source == "print(0)"


def test_missing_description_names_line_one(tmp_path):
    record = _competition_record()
    del record["description"]
    path = _write_corpus(tmp_path, [record])
    with pytest.raises(CorpusError) as excinfo:
        load_corpus(path)
    assert excinfo.value.line_errors[0][0] == 1
    assert "description" in excinfo.value.line_errors[0][1]


def test_roc_auc_label_normalizes_with_direction(tmp_path):
    path = _write_corpus(tmp_path, [_competition_record(metric="roc-auc")])
    corpus = load_corpus(path)
    metric = corpus.competitions[0].task.metric
    assert metric is not None
    assert metric.name is MetricName.ROC_AUC
    assert metric.direction is Direction.HIGHER_BETTER


def test_label_normalization_table():
    assert normalize_metric_label("RMSE") is MetricName.RMSE
    assert normalize_metric_label("mean cosine similarity") is MetricName.MEAN_COSINE_SIMILARITY
    assert normalize_metric_label("F1 Score") is MetricName.F1
    assert normalize_metric_label("points") is None  # excluded category
    with pytest.raises(ValidationError, match="log loss"):
        normalize_metric_label("log loss")


def test_unknown_metric_label_reports_label_and_line(tmp_path):
    path = _write_corpus(
        tmp_path,
        [_competition_record(), _competition_record("comp-2", metric="weird-metric")],
    )
    with pytest.raises(CorpusError) as excinfo:
        load_corpus(path)
    line, message = excinfo.value.line_errors[0]
    assert line == 2
    assert "weird-metric" in message


def test_unknown_modality_label_fails(tmp_path):
    path = _write_corpus(tmp_path, [_competition_record(data_type="audio")])
    with pytest.raises(CorpusError, match="audio"):
        load_corpus(path)


def test_time_series_label_maps_to_enum(tmp_path):
    path = _write_corpus(tmp_path, [_competition_record(data_type="time series")])
    corpus = load_corpus(path)
    assert corpus.competitions[0].task.modality is DataModality.TIME_SERIES


def test_duplicate_task_ids_rejected(tmp_path):
    path = _write_corpus(tmp_path, [_competition_record(), _competition_record()])
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(path)


def test_invalid_json_line_reports_line_number(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(json.dumps(_competition_record()) + "\n{broken\n", encoding="utf-8")
    with pytest.raises(CorpusError) as excinfo:
        load_corpus(path)
    assert excinfo.value.line_errors[0][0] == 2


def test_unreadable_file(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "does-not-exist.jsonl")


def test_filter_drops_excluded_metric_categories(tmp_path):
    path = _write_corpus(
        tmp_path,
        [
            _competition_record("keep-rmse", metric="rmse"),
            _competition_record("drop-points", metric="points"),
            _competition_record("drop-significance", metric="Significance"),
            _competition_record("drop-custom", metric="Custom Loss"),
        ],
    )
    corpus = load_corpus(path)
    assert len(corpus) == 4
    filtered = filter_metric_categories(corpus)
    assert [c.task.id for c in filtered.competitions] == ["keep-rmse"]
    assert set(filtered.raw_metric_names) == {"keep-rmse"}


def test_filter_is_identity_without_excluded_labels(tmp_path):
    path = _write_corpus(tmp_path, [_competition_record(), _competition_record("comp-2")])
    corpus = load_corpus(path)
    filtered = filter_metric_categories(corpus)
    assert filtered.competitions == corpus.competitions


def test_excluded_category_loads_with_metric_unset(tmp_path):
    path = _write_corpus(tmp_path, [_competition_record("pts", metric="points")])
    corpus = load_corpus(path)
    task = corpus.competitions[0].task
    assert task.metric is None
    assert corpus.raw_metric_names["pts"] == "points"
    with pytest.raises(ValidationError):
        task.require_metric()


def _scored_solutions(n, task):
    from support import make_solution

    return [make_solution(f"s{i:03d}", score=float(i)) for i in range(n)]


def test_select_top_takes_75_of_100():
    task = make_task(metric="roc_auc")
    selected = select_top_solutions(task, _scored_solutions(100, task), k=75)
    assert len(selected) == 75
    assert [s.rank for s in selected] == list(range(1, 76))
    assert selected[0].score == 99.0  # best under higher_better


def test_select_top_returns_all_40_when_fewer():
    task = make_task(metric="roc_auc")
    selected = select_top_solutions(task, _scored_solutions(40, task), k=75)
    assert len(selected) == 40
    assert [s.rank for s in selected] == list(range(1, 41))


def test_select_top_k_one_is_single_best():
    task = make_task(metric="rmse")
    selected = select_top_solutions(task, _scored_solutions(10, task), k=1)
    assert len(selected) == 1
    assert selected[0].score == 0.0


def test_select_top_rejects_bad_k():
    task = make_task()
    with pytest.raises(ValidationError):
        select_top_solutions(task, _scored_solutions(3, task), k=0)


def test_selection_is_a_best_prefix():
    task = make_task(metric="rmse")
    solutions = _scored_solutions(30, task)
    selected = select_top_solutions(task, solutions, k=10)
    included = {s.id for s in selected}
    worst_included = max(s.score for s in selected)
    for sol in solutions:
        if sol.id not in included:
            assert sol.score >= worst_included


def test_filter_and_select_commute(tmp_path):
    records = [
        _competition_record("keep-1", metric="rmse", n_solutions=8),
        _competition_record("drop-1", metric="points", n_solutions=8),
        _competition_record("keep-2", metric="roc-auc", n_solutions=8),
    ]
    corpus = load_corpus(_write_corpus(tmp_path, records))

    def select_all(c):
        return {
            comp.task.id: [s.id for s in select_top_solutions(comp.task, list(comp.solutions), 3)]
            for comp in c.competitions
            if comp.task.metric is not None
        }

    filtered_then_selected = select_all(filter_metric_categories(corpus))
    selected_then_filtered = {
        task_id: ids
        for task_id, ids in select_all(corpus).items()
        if task_id in {c.task.id for c in filter_metric_categories(corpus).competitions}
    }
    assert filtered_then_selected == selected_then_filtered


def test_load_is_lossless_for_retained_fields(tmp_path):
    record = _competition_record(leaderboard=[0.5, 0.7])
    path = _write_corpus(tmp_path, [record])
    corpus = load_corpus(path)
    task = corpus.competitions[0].task
    assert task.to_dict()["leaderboard"] == [0.5, 0.7]
    assert list(task.data_files) == record["data_files"]
    assert task.title == record["title"]
    assert task.description == record["description"]

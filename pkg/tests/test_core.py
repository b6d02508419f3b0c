from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langcoder.core import (
    DataModality,
    Direction,
    FinetuneConfig,
    FinetunePair,
    InstructionSet,
    MetricName,
    MetricSpec,
    Provenance,
    SolutionRecord,
    TaskSpec,
    rank_solutions,
)
from langcoder.errors import ValidationError

from support import make_task


def _records(scores, ids=None):
    ids = ids or [f"s{i}" for i in range(len(scores))]
    return [SolutionRecord(id=i, source="code", score=s) for i, s in zip(ids, scores)]


def test_metric_direction_is_fixed_per_name():
    for name in (MetricName.RMSE, MetricName.MAE, MetricName.MCRMSE):
        assert MetricSpec.for_name(name).direction is Direction.LOWER_BETTER
    for name in (
        MetricName.ROC_AUC,
        MetricName.ACCURACY,
        MetricName.F1,
        MetricName.CATEGORIZATION_ACCURACY,
        MetricName.MEAN_COSINE_SIMILARITY,
    ):
        assert MetricSpec.for_name(name).direction is Direction.HIGHER_BETTER


def test_metric_spec_rejects_mismatched_direction():
    with pytest.raises(ValidationError):
        MetricSpec(name=MetricName.RMSE, direction=Direction.HIGHER_BETTER)


def test_task_requires_nonempty_description():
    with pytest.raises(ValidationError):
        make_task(description="   ")


def test_rank_higher_better():
    ranked = rank_solutions(_records([0.5, 0.9, 0.7]), MetricSpec.for_name("roc_auc"))
    assert [r.rank for r in ranked] == [3, 1, 2]


def test_rank_lower_better():
    ranked = rank_solutions(_records([0.5, 0.9, 0.7]), MetricSpec.for_name("rmse"))
    assert [r.rank for r in ranked] == [1, 3, 2]


def test_rank_ties_break_by_ascending_id():
    ranked = rank_solutions(_records([0.5, 0.5], ids=["b", "a"]), MetricSpec.for_name("rmse"))
    by_id = {r.id: r.rank for r in ranked}
    assert by_id["a"] == 1
    assert by_id["b"] == 2


def test_rank_rejects_non_finite_scores():
    records = _records([0.5, float("nan")])
    with pytest.raises(ValidationError, match="s1"):
        rank_solutions(records, MetricSpec.for_name("rmse"))
    with pytest.raises(ValidationError, match="s1"):
        rank_solutions(_records([0.1, float("inf")]), MetricSpec.for_name("rmse"))


@given(
    scores=st.lists(
        st.floats(allow_nan=False, allow_infinity=False, width=32), min_size=1, max_size=40
    )
)
@settings(max_examples=100, deadline=None)
def test_rank_is_a_permutation(scores):
    ranked = rank_solutions(_records(scores), MetricSpec.for_name("rmse"))
    assert sorted(r.rank for r in ranked) == list(range(1, len(scores) + 1))


@given(
    scores=st.lists(
        st.floats(allow_nan=False, allow_infinity=False, width=32),
        min_size=1,
        max_size=30,
        unique=True,
    )
)
@settings(max_examples=100, deadline=None)
def test_reversing_direction_reverses_ranks_on_distinct_scores(scores):
    records = _records(scores)
    low = rank_solutions(records, MetricSpec.for_name("rmse"))
    high = rank_solutions(records, MetricSpec.for_name("roc_auc"))
    n = len(scores)
    for lo, hi in zip(low, high):
        assert hi.rank == n + 1 - lo.rank


def test_rank_preserves_input_order_and_other_fields():
    records = _records([3.0, 1.0])
    ranked = rank_solutions(records, MetricSpec.for_name("rmse"))
    assert [r.id for r in ranked] == [r.id for r in records]
    assert all(r.source == "code" for r in ranked)


def test_finetune_pair_rejects_embedded_separator():
    with pytest.raises(ValidationError):
        FinetunePair(prompt="has [/INST] inside", completion="body")
    with pytest.raises(ValidationError):
        FinetunePair(prompt="ok", completion="bad [/INST]")


def test_finetune_pair_serialize_split_roundtrip():
    pair = FinetunePair(prompt="describe task", completion="Data Preprocessing:\n- load")
    record = pair.serialize()
    assert record.count("[/INST]") == 1
    assert FinetunePair.split(record) == pair


def test_finetune_config_defaults():
    config = FinetuneConfig()
    assert config.lora_dim == 64
    assert config.lr == 2e-4
    assert config.optimizer == "AdamW"
    assert config.max_seq_len is None


def test_instruction_set_requires_all_canonical_sections():
    with pytest.raises(ValidationError, match="architecture"):
        InstructionSet(preprocessing="a", architecture="  ", training="c")


def test_instruction_rank_must_be_positive():
    with pytest.raises(ValidationError):
        InstructionSet(preprocessing="a", architecture="b", training="c", rank=0)


_TEXT = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
    min_size=1,
    max_size=60,
)


@given(
    preprocessing=_TEXT,
    architecture=_TEXT,
    training=_TEXT,
    rank=st.one_of(st.none(), st.integers(min_value=1, max_value=75)),
    provenance=st.sampled_from(list(Provenance)),
)
@settings(max_examples=60, deadline=None)
def test_instruction_set_json_roundtrip(preprocessing, architecture, training, rank, provenance):
    try:
        original = InstructionSet(
            preprocessing=preprocessing,
            architecture=architecture,
            training=training,
            extra_sections=(("Model Evaluation", "check validation scores"),),
            rank=rank,
            provenance=provenance,
        )
    except ValidationError:
        return  # whitespace-only section text is legitimately rejected
    assert InstructionSet.from_dict(original.to_dict()) == original


def test_core_types_json_roundtrip():
    task = make_task(leaderboard=(0.1, 0.2))
    assert TaskSpec.from_dict(task.to_dict()) == task

    solution = SolutionRecord(id="s", source="print()", score=1.5, rank=2)
    assert SolutionRecord.from_dict(solution.to_dict()) == solution

    metric = MetricSpec.for_name("mcrmse")
    assert MetricSpec.from_dict(metric.to_dict()) == metric

    pair = FinetunePair(prompt="p", completion="c")
    assert FinetunePair.from_dict(pair.to_dict()) == pair

    config = FinetuneConfig()
    assert FinetuneConfig.from_dict(config.to_dict()) == config


def test_core_types_are_immutable():
    task = make_task()
    with pytest.raises(dataclasses.FrozenInstanceError):
        task.id = "other"
    metric = MetricSpec.for_name("rmse")
    with pytest.raises(dataclasses.FrozenInstanceError):
        metric.name = MetricName.MAE


def test_modality_enum_is_closed():
    assert {m.value for m in DataModality} == {"tabular", "time_series", "text", "image"}

from __future__ import annotations

import json

import pytest

from langcoder.core import FinetuneConfig, FinetunePair, Provenance
from langcoder.errors import ExtractionError, TemplateError, ValidationError
from langcoder.forge import (
    build_finetune_pair,
    export_dataset,
    export_finetune_config,
    extract_instruction,
    render_extraction_prompt,
)
from langcoder.gateway import Gateway, MockBackend
from langcoder.instructions import parse_instruction_text
from langcoder.templates import PromptTemplate, TemplateLibrary

from support import instruction_text, make_solution, make_task


def _mock_gateway(*, rules=None, default=None):
    return Gateway(MockBackend(rules=rules, default=default), model_id="extractor")


def test_extraction_prompt_embeds_code_and_headers(templates, task):
    solution = make_solution()
    messages = render_extraction_prompt(solution, task, templates)
    text = "\n".join(m.content for m in messages)
    assert solution.source in text
    assert "Data Preprocessing" in text
    assert "Model Architecture" in text
    assert "Model Training" in text
    assert task.description in text
    assert "rmse" in text
    assert "tabular" in text


def test_extraction_template_missing_code_slot_fails_validation():
    with pytest.raises(TemplateError, match="code"):
        PromptTemplate(
            name="extract",
            body="only {description} {metric} {data_type}",
            required_slots={"description", "metric", "data_type", "code"},
        )


def test_extraction_prompt_rejects_missing_metric():
    task = make_task().to_dict()
    task["metric"] = None
    from langcoder.core import TaskSpec

    with pytest.raises(ValidationError):
        render_extraction_prompt(
            make_solution(), TaskSpec.from_dict(task), TemplateLibrary.load()
        )


def test_extract_instruction_happy_path(templates, task):
    gateway = _mock_gateway(default=instruction_text("bert_text_classification"))
    solution = make_solution(rank=3)
    instruction = extract_instruction(solution, task, gateway, templates)
    assert instruction.provenance is Provenance.EXTRACTED
    assert instruction.rank == 3
    assert instruction.preprocessing.startswith("- The training data is loaded")


def test_extract_instruction_reasks_once_then_fails(templates, task):
    calls = []

    class CountingBackend:
        def complete(self, request):
            calls.append(request)
            return "no headers in this prose at all"

    gateway = Gateway(CountingBackend(), model_id="extractor")
    with pytest.raises(ExtractionError) as excinfo:
        extract_instruction(make_solution(rank=1), task, gateway, templates)
    assert len(calls) == 2  # one ask + one re-ask
    assert excinfo.value.raw_text == "no headers in this prose at all"
    # the re-ask appends the bad reply and a corrective user message
    retry_roles = [m.role.value for m in calls[1].messages]
    assert retry_roles == ["user", "assistant", "user"]


def test_extract_instruction_recovers_on_reask(templates, task):
    replies = iter(["prose only", instruction_text("pretrained_text_model")])

    class SequenceBackend:
        def complete(self, request):
            return next(replies)

    instruction = extract_instruction(
        make_solution(rank=2), task, Gateway(SequenceBackend(), model_id="m"), templates
    )
    assert instruction.rank == 2


def test_build_finetune_pair_contains_required_tokens(templates, task):
    instruction = parse_instruction_text(
        instruction_text("tabular_regression")
    ).with_provenance(Provenance.EXTRACTED, rank=5)
    pair = build_finetune_pair(task, instruction, templates)
    record = pair.serialize()
    assert record.count("[/INST]") == 1
    assert task.description in pair.prompt
    assert "rmse" in pair.prompt
    assert "tabular" in pair.prompt
    assert "rank: 5" in pair.prompt
    assert pair.completion.startswith("Data Preprocessing:")
    # completion carries the three canonical sections only
    assert "Model Prediction" not in pair.completion


def test_build_finetune_pair_requires_rank(templates, task):
    instruction = parse_instruction_text(instruction_text("tabular_regression"))
    assert instruction.rank is None
    with pytest.raises(ValidationError, match="rank"):
        build_finetune_pair(task, instruction, templates)


def test_export_dataset_roundtrip(tmp_path, templates, task):
    instruction = parse_instruction_text(
        instruction_text("bert_text_classification")
    ).with_provenance(Provenance.EXTRACTED, rank=1)
    pairs = [
        build_finetune_pair(task, instruction, templates),
        build_finetune_pair(make_task("t2", metric="mae"), instruction, templates),
    ]
    path = tmp_path / "dataset.jsonl"
    assert export_dataset(pairs, path) == 2

    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    for line, pair in zip(lines, pairs):
        text = json.loads(line)["text"]
        recovered = FinetunePair.split(text)
        assert recovered.prompt == pair.prompt
        assert recovered.completion == pair.completion


def test_export_dataset_is_byte_identical_across_runs(tmp_path, templates, task):
    instruction = parse_instruction_text(
        instruction_text("bert_text_classification")
    ).with_provenance(Provenance.EXTRACTED, rank=1)
    pairs = [build_finetune_pair(task, instruction, templates)]
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    export_dataset(pairs, first)
    export_dataset(pairs, second)
    assert first.read_bytes() == second.read_bytes()
    assert b"\r\n" not in first.read_bytes()


def test_export_dataset_rejects_empty_list(tmp_path):
    with pytest.raises(ValidationError):
        export_dataset([], tmp_path / "x.jsonl")


def test_export_finetune_config_values(tmp_path):
    path = tmp_path / "finetune.json"
    config = export_finetune_config(path)
    assert config.lr == 2e-4
    assert config.optimizer == "AdamW"
    assert config.quant_type == "nf4"
    assert config.nested_quant is False
    assert config.save_steps == 500
    assert config.log_steps == 25

    on_disk = json.loads(path.read_text(encoding="utf-8"))
    assert on_disk == FinetuneConfig().to_dict()
    assert on_disk["max_seq_len"] is None

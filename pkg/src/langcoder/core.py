"""Domain types shared by every pipeline stage, plus score ranking.

All types here are immutable value objects with canonical snake_case JSON
encodings (``to_dict`` / ``from_dict``), so they can be shared freely across
concurrent pipeline tasks and persisted as run artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Mapping

from .errors import ValidationError

SEPARATOR_TOKEN = "[/INST]"


class Direction(str, Enum):
    LOWER_BETTER = "lower_better"
    HIGHER_BETTER = "higher_better"


class MetricName(str, Enum):
    RMSE = "rmse"
    MAE = "mae"
    MCRMSE = "mcrmse"
    ROC_AUC = "roc_auc"
    ACCURACY = "accuracy"
    F1 = "f1"
    CATEGORIZATION_ACCURACY = "categorization_accuracy"
    MEAN_COSINE_SIMILARITY = "mean_cosine_similarity"

    @property
    def direction(self) -> Direction:
        if self in (MetricName.RMSE, MetricName.MAE, MetricName.MCRMSE):
            return Direction.LOWER_BETTER
        return Direction.HIGHER_BETTER


@dataclass(frozen=True)
class MetricSpec:
    """A scoring metric and which way its scores improve.

    Direction is fixed per metric name; carrying it explicitly keeps ranking
    and percentile computation on one source of truth.
    """

    name: MetricName
    direction: Direction

    def __post_init__(self) -> None:
        if self.direction is not self.name.direction:
            raise ValidationError(
                f"metric {self.name.value!r} must have direction "
                f"{self.name.direction.value!r}, got {self.direction.value!r}"
            )

    @classmethod
    def for_name(cls, name: MetricName | str) -> "MetricSpec":
        name = MetricName(name)
        return cls(name=name, direction=name.direction)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name.value, "direction": self.direction.value}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MetricSpec":
        return cls(name=MetricName(data["name"]), direction=Direction(data["direction"]))


class DataModality(str, Enum):
    TABULAR = "tabular"
    TIME_SERIES = "time_series"
    TEXT = "text"
    IMAGE = "image"


@dataclass(frozen=True)
class TaskSpec:
    """One competition task: what to solve, how it is scored, what data exists.

    ``metric`` may be None only transiently for freshly ingested competitions
    whose original metric category is slated for removal by the metric filter;
    every downstream operation requires it to be set.
    """

    id: str
    title: str
    description: str
    metric: MetricSpec | None
    modality: DataModality
    data_files: tuple[str, ...] = ()
    leaderboard: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("task id must be non-empty")
        if not self.description.strip():
            raise ValidationError(f"task {self.id!r} has an empty description")
        object.__setattr__(self, "data_files", tuple(self.data_files))
        if self.leaderboard is not None:
            object.__setattr__(self, "leaderboard", tuple(self.leaderboard))

    def require_metric(self) -> MetricSpec:
        if self.metric is None:
            raise ValidationError(f"task {self.id!r} has no scoring metric")
        return self.metric

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "metric": self.metric.to_dict() if self.metric else None,
            "modality": self.modality.value,
            "data_files": list(self.data_files),
            "leaderboard": list(self.leaderboard) if self.leaderboard is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TaskSpec":
        metric = data.get("metric")
        leaderboard = data.get("leaderboard")
        return cls(
            id=data["id"],
            title=data["title"],
            description=data["description"],
            metric=MetricSpec.from_dict(metric) if metric else None,
            modality=DataModality(data["modality"]),
            data_files=tuple(data.get("data_files") or ()),
            leaderboard=tuple(leaderboard) if leaderboard is not None else None,
        )


@dataclass(frozen=True)
class SolutionRecord:
    """A scored solution program; rank 1 is the best score for its task."""

    id: str
    source: str
    score: float
    rank: int | None = None

    def __post_init__(self) -> None:
        if self.rank is not None and self.rank < 1:
            raise ValidationError(f"solution {self.id!r} rank must be >= 1, got {self.rank}")

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "source": self.source, "score": self.score, "rank": self.rank}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SolutionRecord":
        return cls(
            id=data["id"], source=data["source"], score=data["score"], rank=data.get("rank")
        )


class Provenance(str, Enum):
    EXTRACTED = "extracted"
    INFERRED = "inferred"
    REFINED = "refined"
    MANUAL = "manual"


@dataclass(frozen=True)
class InstructionSet:
    """The three-section high-level solution plan.

    Additional headers beyond the canonical three (e.g. "Model Evaluation")
    are kept in ``extra_sections`` in document order instead of being dropped.
    """

    preprocessing: str
    architecture: str
    training: str
    extra_sections: tuple[tuple[str, str], ...] = ()
    rank: int | None = None
    provenance: Provenance = Provenance.EXTRACTED

    def __post_init__(self) -> None:
        for label, text in (
            ("preprocessing", self.preprocessing),
            ("architecture", self.architecture),
            ("training", self.training),
        ):
            if not text.strip():
                raise ValidationError(f"instruction section {label!r} is empty")
        if self.rank is not None and self.rank < 1:
            raise ValidationError(f"instruction rank must be >= 1, got {self.rank}")
        object.__setattr__(self, "extra_sections", tuple(tuple(p) for p in self.extra_sections))

    def with_provenance(self, provenance: Provenance, rank: int | None = None) -> "InstructionSet":
        return replace(self, provenance=provenance, rank=self.rank if rank is None else rank)

    def to_dict(self) -> dict[str, Any]:
        return {
            "preprocessing": self.preprocessing,
            "architecture": self.architecture,
            "training": self.training,
            "extra_sections": [[h, t] for h, t in self.extra_sections],
            "rank": self.rank,
            "provenance": self.provenance.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InstructionSet":
        return cls(
            preprocessing=data["preprocessing"],
            architecture=data["architecture"],
            training=data["training"],
            extra_sections=tuple((h, t) for h, t in data.get("extra_sections") or ()),
            rank=data.get("rank"),
            provenance=Provenance(data.get("provenance", "extracted")),
        )


@dataclass(frozen=True)
class FinetunePair:
    """One prompt/completion training record joined by the [/INST] separator.

    Neither side may contain the separator itself, so the serialized record
    always has exactly one occurrence.
    """

    prompt: str
    completion: str

    def __post_init__(self) -> None:
        for label, text in (("prompt", self.prompt), ("completion", self.completion)):
            if SEPARATOR_TOKEN in text:
                raise ValidationError(f"{label} contains the reserved {SEPARATOR_TOKEN} token")
            if not text.strip():
                raise ValidationError(f"{label} is empty")

    def serialize(self) -> str:
        return f"{self.prompt}{SEPARATOR_TOKEN}{self.completion}"

    @classmethod
    def split(cls, record: str) -> "FinetunePair":
        """Inverse of serialize(); the record must contain exactly one separator."""
        if record.count(SEPARATOR_TOKEN) != 1:
            raise ValidationError(
                f"record must contain exactly one {SEPARATOR_TOKEN}, "
                f"found {record.count(SEPARATOR_TOKEN)}"
            )
        prompt, completion = record.split(SEPARATOR_TOKEN)
        return cls(prompt=prompt, completion=completion)

    def to_dict(self) -> dict[str, Any]:
        return {"prompt": self.prompt, "completion": self.completion}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FinetunePair":
        return cls(prompt=data["prompt"], completion=data["completion"])


@dataclass(frozen=True)
class FinetuneConfig:
    """Training hyperparameters exported alongside the fine-tune dataset.

    The defaults are the exact published recipe; do not tweak them here
    without also updating the exported-config checks.
    """

    lora_dim: int = 64
    lora_alpha: int = 16
    lora_dropout: float = 0.1
    load_4bit: bool = True
    compute_dtype: str = "float16"
    quant_type: str = "nf4"
    nested_quant: bool = False
    epochs: int = 1
    fp16: bool = False
    bf16: bool = False
    train_batch: int = 4
    eval_batch: int = 4
    grad_checkpointing: bool = True
    max_grad_norm: float = 0.3
    lr: float = 2e-4
    weight_decay: float = 0.001
    optimizer: str = "AdamW"
    lr_schedule: str = "constant"
    max_steps: int = -1
    warmup_ratio: float = 0.03
    group_by_length: bool = True
    save_steps: int = 500
    log_steps: int = 25
    max_seq_len: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "lora_dim": self.lora_dim,
            "lora_alpha": self.lora_alpha,
            "lora_dropout": self.lora_dropout,
            "load_4bit": self.load_4bit,
            "compute_dtype": self.compute_dtype,
            "quant_type": self.quant_type,
            "nested_quant": self.nested_quant,
            "epochs": self.epochs,
            "fp16": self.fp16,
            "bf16": self.bf16,
            "train_batch": self.train_batch,
            "eval_batch": self.eval_batch,
            "grad_checkpointing": self.grad_checkpointing,
            "max_grad_norm": self.max_grad_norm,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "optimizer": self.optimizer,
            "lr_schedule": self.lr_schedule,
            "max_steps": self.max_steps,
            "warmup_ratio": self.warmup_ratio,
            "group_by_length": self.group_by_length,
            "save_steps": self.save_steps,
            "log_steps": self.log_steps,
            "max_seq_len": self.max_seq_len,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FinetuneConfig":
        return cls(**dict(data))


def rank_solutions(
    solutions: list[SolutionRecord], metric: MetricSpec
) -> list[SolutionRecord]:
    """Assign ranks 1..n so that rank 1 has the best score under the metric.

    Ties are broken by ascending solution id so ranking is deterministic.
    Input order is preserved; each record comes back with its rank set.
    """
    for sol in solutions:
        if not math.isfinite(sol.score):
            raise ValidationError(f"solution {sol.id!r} has non-finite score {sol.score!r}")
    flip = -1.0 if metric.direction is Direction.HIGHER_BETTER else 1.0
    order = sorted(range(len(solutions)), key=lambda i: (flip * solutions[i].score, solutions[i].id))
    ranks = [0] * len(solutions)
    for position, index in enumerate(order, start=1):
        ranks[index] = position
    return [replace(sol, rank=ranks[i]) for i, sol in enumerate(solutions)]

"""End-to-end orchestration: configuration, run directories, the main loop.

A run walks one task through candidate inference, refinement (or manual
selection), staged synthesis, integration, sandboxed execution, and up to
three repair cycles, persisting every artifact under a per-run directory.
Timestamps and timings live only in the report file so that replayed runs
are byte-identical everywhere else.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import yaml

from .core import InstructionSet, TaskSpec
from .engine import CandidateSet, infer_candidates, refine, select_manual
from .errors import ConfigError
from .evaluation import PredictionTable, RunReport, build_report, percentile, score
from .gateway import (
    CassetteStore,
    Gateway,
    HttpBackend,
    MockBackend,
    RecordBackend,
    ReplayBackend,
)
from .sandbox import ExecutionOutcome, ExecutionStatus, execute, prepare_workspace
from .synth import MAX_FIX_ATTEMPTS, STAGE_ORDER, StagedProgram, integrate, repair, synth_stage
from .templates import TemplateLibrary

logger = logging.getLogger(__name__)

BACKENDS = ("http", "mock", "replay", "record")


@dataclass
class PipelineConfig:
    """Everything a run needs; file < environment < flags precedence."""

    backend: str = "mock"
    base_url: str = ""
    model_extraction: str = "gpt-3.5-turbo"
    model_instruction: str = "llama-2-7b-ft"
    model_code: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_tokens: int | None = None
    cassette_dir: str | None = None
    template_dir: str | None = None
    mock_script: str | None = None
    interpreter_command: list[str] = field(default_factory=lambda: ["python3"])
    solution_extension: str = "py"
    submission_filename: str = "submission.csv"
    timeout_seconds: float = 600.0
    stream_tail_bytes: int = 16384
    env_whitelist: list[str] | None = None
    repair_limit: int = MAX_FIX_ATTEMPTS
    refine_rounds: int = 2
    top_k: int = 75
    truth_csv: str | None = None
    id_column: str | None = None
    data_root: str | None = None
    out_dir: str = "runs"

    def validate(self) -> "PipelineConfig":
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.repair_limit != MAX_FIX_ATTEMPTS:
            raise ConfigError(
                f"repair_limit is fixed at {MAX_FIX_ATTEMPTS} and cannot be changed"
            )
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if self.refine_rounds < 1:
            raise ConfigError(f"refine_rounds must be >= 1, got {self.refine_rounds}")
        if self.backend in ("replay", "record") and not self.cassette_dir:
            raise ConfigError(f"backend {self.backend!r} needs cassette_dir")
        if self.backend in ("http", "record"):
            if not self.base_url:
                raise ConfigError(f"backend {self.backend!r} needs base_url")
            if not os.environ.get("LC_API_KEY"):
                raise ConfigError("set LC_API_KEY to use the live backend")
        if not self.interpreter_command:
            raise ConfigError("interpreter_command must be non-empty")
        return self

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as handle:
                data = yaml.safe_load(handle) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        updates = {k: v for k, v in overrides.items() if v is not None}
        merged = {f.name: getattr(self, f.name) for f in fields(self)}
        merged.update(updates)
        return PipelineConfig(**merged)


def build_backend(config: PipelineConfig):
    if config.backend == "mock":
        if config.mock_script:
            return MockBackend.from_script(config.mock_script)
        return MockBackend()
    if config.backend == "replay":
        return ReplayBackend(CassetteStore(config.cassette_dir))
    if config.backend == "record":
        live = HttpBackend(config.base_url)
        return RecordBackend(live, CassetteStore(config.cassette_dir))
    return HttpBackend(config.base_url)


def build_gateway(config: PipelineConfig, model_id: str, backend=None) -> Gateway:
    return Gateway(
        backend=backend if backend is not None else build_backend(config),
        model_id=model_id,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
    )


def load_task(path: str | Path) -> TaskSpec:
    try:
        with open(path, encoding="utf-8") as handle:
            return TaskSpec.from_dict(json.load(handle))
    except OSError as exc:
        raise ConfigError(f"cannot read task spec {path}: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"task spec {path} is malformed: {exc}") from exc


_run_dir_lock = threading.Lock()


def allocate_run_dir(out_dir: str | Path, task_id: str) -> Path:
    """out/<task_id>/<utc timestamp>/, suffixed on collision."""
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S.%f")
    base = Path(out_dir) / task_id
    with _run_dir_lock:
        candidate = base / stamp
        counter = 1
        while candidate.exists():
            candidate = base / f"{stamp}-{counter}"
            counter += 1
        candidate.mkdir(parents=True)
    return candidate


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


@dataclass
class PipelineResult:
    report: RunReport
    run_dir: Path
    succeeded: bool
    failure: str | None = None


class PipelineRunner:
    """Drives one task end to end with injected gateways and templates."""

    def __init__(
        self,
        config: PipelineConfig,
        gateway_instruction: Gateway,
        gateway_code: Gateway,
        templates: TemplateLibrary | None = None,
    ):
        self.config = config
        self.gateway_instruction = gateway_instruction
        self.gateway_code = gateway_code
        self.templates = templates or TemplateLibrary.load(config.template_dir)

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "PipelineRunner":
        backend = build_backend(config)
        return cls(
            config=config,
            gateway_instruction=build_gateway(config, config.model_instruction, backend),
            gateway_code=build_gateway(config, config.model_code, backend),
        )

    def run(
        self,
        task: TaskSpec,
        chooser: Callable[[str], Any] | None = None,
    ) -> PipelineResult:
        """Full pipeline for one task; ``chooser`` switches on manual selection."""
        config = self.config
        run_dir = allocate_run_dir(config.out_dir, task.id)
        _write_json(run_dir / "task.json", task.to_dict())
        wall: dict[str, float] = {}
        staged = StagedProgram()

        started = time.monotonic()
        candidates = infer_candidates(task, self.gateway_instruction, self.templates)
        wall["infer"] = time.monotonic() - started
        _write_json(run_dir / "candidates.json", candidates.to_dict())

        started = time.monotonic()
        instruction = self._choose_instruction(candidates, task, run_dir, chooser)
        wall["select"] = time.monotonic() - started
        _write_json(run_dir / "instruction.json", instruction.to_dict())

        started = time.monotonic()
        program_text = self._synthesize(instruction, task, run_dir, staged)
        wall["synthesis"] = time.monotonic() - started

        started = time.monotonic()
        outcome, program_text = self._execute_with_repairs(
            task, program_text, run_dir, staged
        )
        wall["execution"] = time.monotonic() - started
        _write_json(run_dir / "exchanges.json", staged.exchanges)

        return self._finish(task, run_dir, staged, outcome, instruction, wall)

    def _choose_instruction(
        self,
        candidates: CandidateSet,
        task: TaskSpec,
        run_dir: Path,
        chooser: Callable[[str], Any] | None,
    ) -> InstructionSet:
        if chooser is not None:
            instruction = select_manual(candidates, chooser)
            _write_json(run_dir / "selection.json", {"chosen_rank": instruction.rank})
            return instruction
        outcome = refine(
            candidates, task, self.gateway_instruction, self.templates,
            rounds=self.config.refine_rounds,
        )
        _write_json(run_dir / "refinement.json", outcome.to_dict())
        return outcome.improved

    def _synthesize(
        self, instruction: InstructionSet, task: TaskSpec, run_dir: Path, staged: StagedProgram
    ) -> str:
        for position, stage in enumerate(STAGE_ORDER, start=1):
            snippet = synth_stage(
                stage,
                instruction,
                task,
                staged.snippets,
                self.gateway_code,
                self.templates,
                submission_filename=self.config.submission_filename,
                program=staged,
            )
            staged.snippets[stage] = snippet
            (run_dir / f"snippet_{position}_{stage.value}.py").write_text(
                snippet + "\n", encoding="utf-8"
            )
        integrated = integrate(staged.snippets, self.gateway_code, self.templates, program=staged)
        (run_dir / "integrated.py").write_text(integrated + "\n", encoding="utf-8")
        return integrated

    def _run_once(
        self, task: TaskSpec, program_text: str, run_dir: Path, attempt: int
    ) -> ExecutionOutcome:
        workspace = prepare_workspace(
            task,
            run_dir / "work",
            data_root=self.config.data_root,
            name=f"attempt-{attempt}",
        )
        return execute(
            program_text,
            workspace,
            self.config.interpreter_command,
            timeout=self.config.timeout_seconds,
            solution_extension=self.config.solution_extension,
            submission_filename=self.config.submission_filename,
            stream_tail_bytes=self.config.stream_tail_bytes,
            env_whitelist=self.config.env_whitelist,
        )

    def _execute_with_repairs(
        self, task: TaskSpec, program_text: str, run_dir: Path, staged: StagedProgram
    ) -> tuple[ExecutionOutcome, str]:
        outcome = self._run_once(task, program_text, run_dir, attempt=0)
        while (
            outcome.status is ExecutionStatus.NONZERO_EXIT
            and staged.fix_attempts < self.config.repair_limit
        ):
            attempt = staged.fix_attempts + 1
            logger.info("run failed (exit %s), repair attempt %d", outcome.exit_code, attempt)
            program_text = repair(
                program_text,
                outcome.stderr_tail,
                self.gateway_code,
                self.templates,
                attempt,
                program=staged,
            )
            staged.fix_attempts = attempt
            (run_dir / f"repair_{attempt}.py").write_text(program_text + "\n", encoding="utf-8")
            outcome = self._run_once(task, program_text, run_dir, attempt=attempt)
        return outcome, program_text

    def _finish(
        self,
        task: TaskSpec,
        run_dir: Path,
        staged: StagedProgram,
        outcome: ExecutionOutcome,
        instruction: InstructionSet,
        wall: dict[str, float],
    ) -> PipelineResult:
        failure: str | None = None
        score_value: float | None = None
        percentile_value: int | None = None

        if outcome.status is ExecutionStatus.SUCCESS and outcome.submission_path is None:
            failure = (
                f"program exited 0 but wrote no {self.config.submission_filename}"
            )
        elif outcome.status is not ExecutionStatus.SUCCESS:
            failure = f"execution ended with status {outcome.status.value}"

        if failure is None and self.config.truth_csv:
            truth = PredictionTable.from_csv(self.config.truth_csv, id_column=self.config.id_column)
            predicted = PredictionTable.from_csv(
                outcome.submission_path, id_column=self.config.id_column
            )
            score_value = score(task.require_metric(), truth, predicted)
            if task.leaderboard:
                percentile_value = percentile(
                    score_value, task.leaderboard, task.require_metric().direction
                )

        if failure is None and outcome.submission_path is not None:
            final_submission = run_dir / self.config.submission_filename
            final_submission.write_bytes(Path(outcome.submission_path).read_bytes())

        report = build_report(
            task_id=task.id,
            provenance=instruction.provenance.value,
            fix_attempts=staged.fix_attempts,
            execution_status=outcome.status.value,
            metric_name=task.metric.name.value if task.metric else None,
            score_value=score_value,
            percentile_value=percentile_value,
            wall_times=wall,
        )
        payload = report.to_dict()
        payload["execution"] = outcome.to_dict()
        payload["generated_at"] = datetime.now(timezone.utc).isoformat()
        if failure:
            payload["failure"] = failure
        _write_json(run_dir / "report.json", payload)
        return PipelineResult(
            report=report, run_dir=run_dir, succeeded=failure is None, failure=failure
        )


def run_pipeline(
    config: PipelineConfig,
    task: TaskSpec,
    chooser: Callable[[str], Any] | None = None,
) -> PipelineResult:
    return PipelineRunner.from_config(config).run(task, chooser=chooser)

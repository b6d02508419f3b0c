"""Command-line entry point wiring the modules into runnable stages.

Exit codes: 0 success, 2 pipeline failure, 3 configuration error, 4 model
backend error. Every subcommand is a thin wrapper over one module
operation; ``pipeline`` composes them end to end.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .core import FinetunePair, InstructionSet, MetricSpec, TaskSpec
from .corpus import filter_metric_categories, load_corpus, select_top_solutions
from .engine import CandidateSet, infer_candidates, refine, select_manual
from .errors import ConfigError, GatewayError, LangcoderError
from .evaluation import PredictionTable, percentile, score
from .forge import build_finetune_pair, export_dataset, export_finetune_config, extract_instruction
from .gateway import CassetteStore
from .pipeline import (
    PipelineConfig,
    PipelineRunner,
    build_gateway,
    load_task,
)
from .sandbox import ExecutionStatus, execute, prepare_workspace
from .synth import STAGE_ORDER, integrate, synth_stage
from .templates import TemplateLibrary

EXIT_OK = 0
EXIT_PIPELINE = 2
EXIT_CONFIG = 3
EXIT_BACKEND = 4


def _config_from(config_path: str | None, **overrides) -> PipelineConfig:
    base = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
    return base.with_overrides(**overrides).validate()


def _common_options(command):
    for option in reversed(
        [
            click.option("--config", "config_path", type=click.Path(), default=None,
                         help="YAML config file."),
            click.option("--backend", type=click.Choice(["http", "mock", "replay", "record"]),
                         default=None, help="Model backend."),
            click.option("--cassettes", "cassette_dir", type=click.Path(), default=None,
                         help="Cassette directory for record/replay."),
            click.option("--mock-script", type=click.Path(), default=None,
                         help="Fixture script for the mock backend."),
            click.option("--templates", "template_dir", type=click.Path(), default=None,
                         help="Prompt template directory."),
        ]
    ):
        command = option(command)
    return command


def _make_chooser(interactive: bool, choice: int | None):
    if not interactive:
        return None
    if choice is not None:
        return lambda listing: choice
    if not sys.stdin.isatty():
        raise ConfigError(
            "--interactive needs a terminal; pass --choice N for scripted selection"
        )

    def chooser(listing: str):
        click.echo(listing)
        return click.prompt("Choose a candidate (1-3)")

    return chooser


def _write_or_print(payload: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(payload, encoding="utf-8")
    else:
        click.echo(payload)


@click.group()
def cli() -> None:
    """Turn ML task descriptions into runnable solution programs."""


@cli.command(name="pipeline")
@click.argument("task_paths", nargs=-1, required=True, type=click.Path())
@_common_options
@click.option("--interactive", is_flag=True, help="Choose the instruction manually.")
@click.option("--choice", type=int, default=None, help="Scripted candidate choice (1-3).")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker count for independent tasks.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Run artifact root.")
@click.option("--truth", "truth_csv", type=click.Path(), default=None,
              help="Ground-truth CSV for scoring the submission.")
@click.option("--data-root", type=click.Path(), default=None,
              help="Directory the task's data files are resolved against.")
@click.option("--refine-rounds", type=int, default=None, help="Critic/decider rounds.")
def cmd_pipeline(task_paths, config_path, backend, cassette_dir, mock_script, template_dir,
                 interactive, choice, jobs, out_dir, truth_csv, data_root, refine_rounds):
    """Run the full description-to-program pipeline for each TASK file."""
    config = _config_from(
        config_path,
        backend=backend,
        cassette_dir=cassette_dir,
        mock_script=mock_script,
        template_dir=template_dir,
        out_dir=out_dir,
        truth_csv=truth_csv,
        data_root=data_root,
        refine_rounds=refine_rounds,
    )
    chooser = _make_chooser(interactive, choice)
    tasks = [load_task(path) for path in task_paths]
    runner = PipelineRunner.from_config(config)

    def run_one(task: TaskSpec) -> int:
        result = runner.run(task, chooser=chooser)
        click.echo(result.report.summary())
        if not result.succeeded:
            click.echo(f"failure: {result.failure}", err=True)
            return EXIT_PIPELINE
        return EXIT_OK

    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(run_one, tasks))
    else:
        codes = [run_one(task) for task in tasks]
    return max(codes)


@cli.command(name="ingest")
@click.argument("corpus_path", type=click.Path())
@click.option("--keep-excluded", is_flag=True,
              help="Skip the metric-category filter.")
def cmd_ingest(corpus_path, keep_excluded):
    """Load a corpus JSONL file and report what it contains."""
    corpus = load_corpus(corpus_path)
    loaded = len(corpus)
    if not keep_excluded:
        corpus = filter_metric_categories(corpus)
    solutions = sum(len(c.solutions) for c in corpus.competitions)
    click.echo(
        f"competitions={len(corpus)} solutions={solutions} "
        f"dropped_by_metric_category={loaded - len(corpus)}"
    )
    return EXIT_OK


@cli.command(name="extract")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--task", "task_id", required=True)
@click.option("--solution", "solution_id", default=None,
              help="Solution id; defaults to the best-scored one.")
@click.option("--out", default=None, type=click.Path())
@_common_options
def cmd_extract(corpus_path, task_id, solution_id, out, config_path, backend,
                cassette_dir, mock_script, template_dir):
    """Extract a three-section instruction from one corpus solution."""
    config = _config_from(config_path, backend=backend, cassette_dir=cassette_dir,
                          mock_script=mock_script, template_dir=template_dir)
    corpus = filter_metric_categories(load_corpus(corpus_path))
    competition = next((c for c in corpus.competitions if c.task.id == task_id), None)
    if competition is None:
        raise ConfigError(f"no competition with id {task_id!r} in {corpus_path}")
    ranked = select_top_solutions(competition.task, list(competition.solutions), config.top_k)
    if solution_id is None:
        solution = ranked[0]
    else:
        solution = next((s for s in ranked if s.id == solution_id), None)
        if solution is None:
            raise ConfigError(f"no solution {solution_id!r} in the top {config.top_k}")
    gateway = build_gateway(config, config.model_extraction)
    templates = TemplateLibrary.load(config.template_dir)
    instruction = extract_instruction(solution, competition.task, gateway, templates)
    _write_or_print(json.dumps(instruction.to_dict(), indent=2) + "\n", out)
    return EXIT_OK


@cli.command(name="export-finetune")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--train-config", "train_config_path", required=True, type=click.Path())
@click.option("--top-k", type=int, default=None, help="Solutions per competition.")
@_common_options
def cmd_export_finetune(corpus_path, dataset_path, train_config_path, top_k, config_path,
                        backend, cassette_dir, mock_script, template_dir):
    """Extract instructions corpus-wide and export dataset plus train config."""
    config = _config_from(config_path, backend=backend, cassette_dir=cassette_dir,
                          mock_script=mock_script, template_dir=template_dir, top_k=top_k)
    corpus = filter_metric_categories(load_corpus(corpus_path))
    gateway = build_gateway(config, config.model_extraction)
    templates = TemplateLibrary.load(config.template_dir)
    pairs: list[FinetunePair] = []
    for competition in corpus.competitions:
        ranked = select_top_solutions(competition.task, list(competition.solutions), config.top_k)
        for solution in ranked:
            instruction = extract_instruction(solution, competition.task, gateway, templates)
            pairs.append(build_finetune_pair(competition.task, instruction, templates))
    count = export_dataset(pairs, dataset_path)
    export_finetune_config(train_config_path)
    click.echo(f"records={count} dataset={dataset_path} train_config={train_config_path}")
    return EXIT_OK


@cli.command(name="infer")
@click.argument("task_path", type=click.Path())
@click.option("--out", default=None, type=click.Path())
@_common_options
def cmd_infer(task_path, out, config_path, backend, cassette_dir, mock_script, template_dir):
    """Infer the top-3 candidate instructions for a task."""
    config = _config_from(config_path, backend=backend, cassette_dir=cassette_dir,
                          mock_script=mock_script, template_dir=template_dir)
    task = load_task(task_path)
    gateway = build_gateway(config, config.model_instruction)
    templates = TemplateLibrary.load(config.template_dir)
    candidates = infer_candidates(task, gateway, templates)
    _write_or_print(json.dumps(candidates.to_dict(), indent=2) + "\n", out)
    return EXIT_OK


@cli.command(name="refine")
@click.argument("task_path", type=click.Path())
@click.option("--candidates", "candidates_path", required=True, type=click.Path())
@click.option("--rounds", type=int, default=None)
@click.option("--out", default=None, type=click.Path())
@_common_options
def cmd_refine(task_path, candidates_path, rounds, out, config_path, backend,
               cassette_dir, mock_script, template_dir):
    """Run the critic/decider dialogue over saved candidates."""
    config = _config_from(config_path, backend=backend, cassette_dir=cassette_dir,
                          mock_script=mock_script, template_dir=template_dir,
                          refine_rounds=rounds)
    task = load_task(task_path)
    with open(candidates_path, encoding="utf-8") as handle:
        candidates = CandidateSet.from_dict(json.load(handle))
    gateway = build_gateway(config, config.model_instruction)
    templates = TemplateLibrary.load(config.template_dir)
    outcome = refine(candidates, task, gateway, templates, rounds=config.refine_rounds)
    _write_or_print(json.dumps(outcome.to_dict(), indent=2) + "\n", out)
    return EXIT_OK


@cli.command(name="select")
@click.option("--candidates", "candidates_path", required=True, type=click.Path())
@click.option("--interactive", is_flag=True)
@click.option("--choice", type=int, default=None)
@click.option("--out", default=None, type=click.Path())
def cmd_select(candidates_path, interactive, choice, out):
    """Manually pick one of three saved candidates."""
    chooser = _make_chooser(interactive or choice is not None, choice)
    if chooser is None:
        raise ConfigError("select needs --interactive or --choice N")
    with open(candidates_path, encoding="utf-8") as handle:
        candidates = CandidateSet.from_dict(json.load(handle))
    instruction = select_manual(candidates, chooser)
    _write_or_print(json.dumps(instruction.to_dict(), indent=2) + "\n", out)
    return EXIT_OK


@cli.command(name="synth")
@click.argument("task_path", type=click.Path())
@click.option("--instruction", "instruction_path", required=True, type=click.Path())
@click.option("--out", default=None, type=click.Path())
@_common_options
def cmd_synth(task_path, instruction_path, out, config_path, backend, cassette_dir,
              mock_script, template_dir):
    """Generate and integrate the four program stages for a task."""
    config = _config_from(config_path, backend=backend, cassette_dir=cassette_dir,
                          mock_script=mock_script, template_dir=template_dir)
    task = load_task(task_path)
    with open(instruction_path, encoding="utf-8") as handle:
        instruction = InstructionSet.from_dict(json.load(handle))
    gateway = build_gateway(config, config.model_code)
    templates = TemplateLibrary.load(config.template_dir)
    snippets = {}
    for stage in STAGE_ORDER:
        snippets[stage] = synth_stage(
            stage, instruction, task, snippets, gateway, templates,
            submission_filename=config.submission_filename,
        )
    program = integrate(snippets, gateway, templates)
    _write_or_print(program + "\n", out)
    return EXIT_OK


@cli.command(name="exec")
@click.argument("program_path", type=click.Path())
@click.argument("task_path", type=click.Path())
@click.option("--workspace-base", type=click.Path(), default="workspaces", show_default=True)
@click.option("--data-root", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_exec(program_path, task_path, workspace_base, data_root, config_path):
    """Execute a program in a fresh workspace for a task."""
    config = _config_from(config_path, data_root=data_root)
    task = load_task(task_path)
    program = Path(program_path).read_text(encoding="utf-8")
    workspace = prepare_workspace(task, workspace_base, data_root=config.data_root)
    outcome = execute(
        program,
        workspace,
        config.interpreter_command,
        timeout=config.timeout_seconds,
        solution_extension=config.solution_extension,
        submission_filename=config.submission_filename,
        stream_tail_bytes=config.stream_tail_bytes,
        env_whitelist=config.env_whitelist,
    )
    click.echo(json.dumps(outcome.to_dict(), indent=2))
    return EXIT_OK if outcome.status is ExecutionStatus.SUCCESS else EXIT_PIPELINE


@cli.command(name="eval")
@click.argument("metric")
@click.argument("truth_csv", type=click.Path())
@click.argument("pred_csv", type=click.Path())
@click.option("--leaderboard", "leaderboard_path", type=click.Path(), default=None,
              help="JSON file with a list of public scores.")
@click.option("--id-column", default=None)
def cmd_eval(metric, truth_csv, pred_csv, leaderboard_path, id_column):
    """Score a prediction CSV against ground truth."""
    try:
        spec = MetricSpec.for_name(metric)
    except ValueError:
        raise ConfigError(f"unknown metric {metric!r}") from None
    truth = PredictionTable.from_csv(truth_csv, id_column=id_column)
    pred = PredictionTable.from_csv(pred_csv, id_column=id_column)
    value = score(spec, truth, pred)
    click.echo(repr(value))
    if leaderboard_path:
        with open(leaderboard_path, encoding="utf-8") as handle:
            board = json.load(handle)
        click.echo(f"percentile {percentile(value, board, spec.direction)}")
    return EXIT_OK


@cli.command(name="replay-list")
@click.option("--cassettes", "cassette_dir", required=True, type=click.Path())
def cmd_replay_list(cassette_dir):
    """List recorded cassettes: digest, model, response size."""
    store = CassetteStore(cassette_dir)
    for cassette in store.list():
        click.echo(
            f"{cassette.key} model={cassette.request_snapshot.model_id} "
            f"response_bytes={len(cassette.response.encode('utf-8'))}"
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and map failures onto the exit-code contract."""
    try:
        result = cli.main(args=argv, standalone_mode=False)
        return int(result) if isinstance(result, int) else EXIT_OK
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_CONFIG
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_CONFIG
    except GatewayError as exc:
        click.echo(f"backend error: {exc}", err=True)
        return EXIT_BACKEND
    except LangcoderError as exc:
        click.echo(f"pipeline error: {exc}", err=True)
        return EXIT_PIPELINE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

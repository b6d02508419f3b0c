"""Isolated child-process execution of generated programs.

Each run gets a fresh workspace populated with the task's data files. The
program is written to ``solution.<ext>`` and run with the configured
interpreter, its own process group, and a hard deadline; on timeout the
whole group is killed within a bounded grace period. Only the trailing
bytes of each output stream are kept, so repair prompts stay small.

This is process-level isolation only: no network or filesystem jailing is
performed. An optional environment whitelist limits what the child can see,
but callers must not treat the sandbox as a security boundary.
"""

from __future__ import annotations

import logging
import os
import shutil
import signal
import subprocess
import time
import uuid
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .core import TaskSpec
from .errors import ValidationError, WorkspaceError

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_SECONDS = 600.0
DEFAULT_TAIL_BYTES = 16384
DEFAULT_SUBMISSION_FILENAME = "submission.csv"
KILL_GRACE_SECONDS = 5.0


class ExecutionStatus(str, Enum):
    SUCCESS = "success"
    NONZERO_EXIT = "nonzero_exit"
    TIMEOUT = "timeout"
    SPAWN_ERROR = "spawn_error"


@dataclass(frozen=True)
class ExecutionOutcome:
    status: ExecutionStatus
    exit_code: int | None
    duration: float
    stdout_tail: str
    stderr_tail: str
    submission_path: Path | None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "exit_code": self.exit_code,
            "duration": self.duration,
            "stdout_tail": self.stdout_tail,
            "stderr_tail": self.stderr_tail,
            "submission_path": str(self.submission_path) if self.submission_path else None,
        }


def prepare_workspace(
    task: TaskSpec,
    base_dir: str | Path,
    data_root: str | Path | None = None,
    name: str | None = None,
) -> Path:
    """Create a fresh directory holding copies of the task's data files.

    Never reuses prior contents: unnamed workspaces get a unique suffix, and
    asking for an existing named one is an error rather than a reuse.
    """
    root = Path(data_root) if data_root is not None else Path.cwd()
    sources = [root / f for f in task.data_files]
    missing = [str(p) for p in sources if not p.is_file()]
    if missing:
        raise WorkspaceError(
            f"missing data files for task {task.id!r}: {', '.join(missing)}", missing=missing
        )
    base = Path(base_dir)
    base.mkdir(parents=True, exist_ok=True)
    workspace = base / (name if name is not None else f"{task.id}-{uuid.uuid4().hex[:12]}")
    try:
        workspace.mkdir()
    except FileExistsError:
        raise WorkspaceError(
            f"workspace {workspace} already exists; refusing to reuse it"
        ) from None
    for source in sources:
        shutil.copy2(source, workspace / source.name)
    return workspace


def _tail(stream: bytes | None, limit: int) -> str:
    data = stream or b""
    return data[-limit:].decode("utf-8", errors="replace")


def execute(
    program: str,
    workspace: str | Path,
    interpreter_command: list[str],
    timeout: float = DEFAULT_TIMEOUT_SECONDS,
    *,
    solution_extension: str = "py",
    submission_filename: str = DEFAULT_SUBMISSION_FILENAME,
    stream_tail_bytes: int = DEFAULT_TAIL_BYTES,
    env_whitelist: list[str] | None = None,
) -> ExecutionOutcome:
    """Run a program in the workspace and report how it ended.

    The submission path is set iff the configured submission file exists
    afterwards, regardless of exit status; callers decide whether it was
    required.
    """
    if not interpreter_command:
        raise ValidationError("interpreter command must be non-empty")
    if timeout <= 0:
        raise ValidationError(f"timeout must be positive, got {timeout}")
    workspace = Path(workspace)
    solution = workspace / f"solution.{solution_extension}"
    solution.write_text(program, encoding="utf-8")

    env = None
    if env_whitelist is not None:
        env = {key: os.environ[key] for key in env_whitelist if key in os.environ}
        env.setdefault("PATH", os.defpath)

    argv = [*interpreter_command, solution.name]
    started = time.monotonic()
    try:
        child = subprocess.Popen(
            argv,
            cwd=workspace,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env=env,
            start_new_session=True,
        )
    except OSError as exc:
        return ExecutionOutcome(
            status=ExecutionStatus.SPAWN_ERROR,
            exit_code=None,
            duration=time.monotonic() - started,
            stdout_tail="",
            stderr_tail=f"failed to spawn {argv[0]!r}: {exc}",
            submission_path=None,
        )

    timed_out = False
    try:
        stdout, stderr = child.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        _kill_group(child)
        try:
            stdout, stderr = child.communicate(timeout=KILL_GRACE_SECONDS)
        except subprocess.TimeoutExpired:
            child.kill()
            stdout, stderr = child.communicate()
    duration = time.monotonic() - started

    submission = workspace / submission_filename
    submission_path = submission if submission.is_file() else None
    if timed_out:
        status = ExecutionStatus.TIMEOUT
        exit_code = None
    else:
        exit_code = child.returncode
        status = ExecutionStatus.SUCCESS if exit_code == 0 else ExecutionStatus.NONZERO_EXIT
    return ExecutionOutcome(
        status=status,
        exit_code=exit_code,
        duration=duration,
        stdout_tail=_tail(stdout, stream_tail_bytes),
        stderr_tail=_tail(stderr, stream_tail_bytes),
        submission_path=submission_path,
    )


def _kill_group(child: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(child.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        child.kill()

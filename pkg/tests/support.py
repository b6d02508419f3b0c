from __future__ import annotations

from pathlib import Path

from langcoder.core import DataModality, MetricSpec, SolutionRecord, TaskSpec

DATA_DIR = Path(__file__).parent / "data"
INSTRUCTION_DIR = DATA_DIR / "instructions"


def make_task(
    task_id: str = "heat-flux",
    metric: str = "rmse",
    modality: DataModality = DataModality.TABULAR,
    description: str = "Impute the missing heat flux column from sensor features.",
    data_files: tuple[str, ...] = (),
    leaderboard: tuple[float, ...] | None = None,
) -> TaskSpec:
    return TaskSpec(
        id=task_id,
        title=task_id.replace("-", " ").title(),
        description=description,
        metric=MetricSpec.for_name(metric),
        modality=modality,
        data_files=data_files,
        leaderboard=leaderboard,
    )


def make_solution(sol_id: str = "s1", score: float = 0.5, rank: int | None = None) -> SolutionRecord:
    return SolutionRecord(
        id=sol_id,
        source="import pandas as pd\ndf = pd.read_csv('train.csv')\n",
        score=score,
        rank=rank,
    )


def instruction_text(name: str) -> str:
    return (INSTRUCTION_DIR / f"{name}.txt").read_text(encoding="utf-8")

from __future__ import annotations

import json
import random
import shutil
import subprocess
import sys
from pathlib import Path

FIXTURES_ROOT = Path(__file__).resolve().parents[1]

MANIFEST = json.loads((FIXTURES_ROOT / "manifest.json").read_text(encoding="utf-8"))


def manifest_entry(name: str) -> dict:
    for entry in MANIFEST["fixtures"]:
        if entry["name"] == name:
            return entry
    raise KeyError(name)


def stage_workspace(directory: Path) -> Path:
    """Copy the micro data files into a fresh working directory."""
    directory.mkdir(parents=True, exist_ok=True)
    for relative in MANIFEST["data_files"]:
        source = FIXTURES_ROOT / relative
        shutil.copy2(source, directory / source.name)
    return directory


def run_fixture(entry: dict, workspace: Path) -> subprocess.CompletedProcess:
    script = FIXTURES_ROOT / entry["entry"]
    return subprocess.run(
        [sys.executable, str(script)],
        cwd=workspace,
        capture_output=True,
        text=True,
        timeout=60,
    )


def submission_row_count(workspace: Path) -> int:
    path = workspace / "submission.csv"
    if not path.exists():
        return 0
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    return max(len(lines) - 1, 0)


def write_csv(path: Path, ids, columns: dict[str, list[float]]) -> Path:
    names = list(columns)
    lines = ["id," + ",".join(names)]
    for i, row_id in enumerate(ids):
        lines.append(f"{row_id}," + ",".join(repr(columns[name][i]) for name in names))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def random_case(metric: str, rng: random.Random, max_rows: int = 20):
    """One random aligned (ids, truth columns, pred columns) case."""
    n = rng.randint(2, max_rows)
    ids = [f"row{i:02d}" for i in range(n)]
    width = rng.randint(1, 3) if metric in ("mcrmse", "mean_cosine_similarity") else 1
    if metric == "roc_auc":
        labels = [0.0, 1.0] + [float(rng.getrandbits(1)) for _ in range(n - 2)]
        rng.shuffle(labels)
        truth = {"v": labels}
        pred = {"v": [round(rng.random(), 1) for _ in range(n)]}
    elif metric in ("accuracy", "f1"):
        truth = {"v": [float(rng.getrandbits(1)) for _ in range(n)]}
        pred = {"v": [rng.uniform(-0.3, 1.3) for _ in range(n)]}
    elif metric == "categorization_accuracy":
        truth = {"v": [float(rng.randint(0, 3)) for _ in range(n)]}
        pred = {"v": [rng.uniform(-0.4, 3.4) for _ in range(n)]}
    else:
        truth = {f"c{j}": [rng.uniform(-9, 9) for _ in range(n)] for j in range(width)}
        pred = {f"c{j}": [rng.uniform(-9, 9) for _ in range(n)] for j in range(width)}
    return ids, truth, pred

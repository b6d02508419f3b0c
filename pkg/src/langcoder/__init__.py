"""langcoder: natural-language ML task descriptions to runnable programs.

Phase 1 turns a task description into ranked three-section solution
instructions; phase 2 turns the chosen instruction into one integrated
program via staged generation, sandboxed execution, and a bounded repair
loop. All model traffic goes through a gateway with live, mock, and
record/replay backends so every stage is testable offline.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
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

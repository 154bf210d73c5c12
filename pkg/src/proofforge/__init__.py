"""Tooling for structured-proof corpora developed with a sorry-first workflow.

Modules:

- :mod:`proofforge.model` and :mod:`proofforge.parser`: theory documents and
  the supported structured-proof subset, with a canonical serializer.
- :mod:`proofforge.census`: closing-method, structure and proof-size counts.
- :mod:`proofforge.backend`: prover interface, mock and external backends.
- :mod:`proofforge.workflow`: the placeholder-elimination loop.
- :mod:`proofforge.profiler`: step timing, method swaps, build budget.
- :mod:`proofforge.planner`: cache split point for a linear build chain.
- :mod:`proofforge.logs`: agent session-log statistics.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .backend import (  # noqa: E402
    CheckResult,
    ExternalBackend,
    GoalId,
    MockBackend,
    SuggestionRecord,
    TransportError,
    UnresolvedGoalError,
)
from .census import proof_size_report, structure_census, tactic_census  # noqa: E402
from .model import (  # noqa: E402
    Block,
    ProofStep,
    ProofTree,
    SourceAnnotation,
    TacticCall,
    TheoryDocument,
)
from .parser import TheorySyntaxError, parse_tactic, parse_theory, serialize  # noqa: E402
from .planner import BuildUnit, SplitPlan, evaluate_plan, plan_split  # noqa: E402
from .logs import compute_stats, ingest, ingest_path, intervention_report  # noqa: E402
from .profiler import apply_swaps, budget_check, is_equality_free, profile, propose_swaps  # noqa: E402
from .workflow import locate_sorries, run_to_zero, validate_skeleton  # noqa: E402

__all__ = [
    "Block",
    "BuildUnit",
    "CheckResult",
    "ExternalBackend",
    "GoalId",
    "MockBackend",
    "ProofStep",
    "ProofTree",
    "SourceAnnotation",
    "SplitPlan",
    "SuggestionRecord",
    "TacticCall",
    "TheoryDocument",
    "TheorySyntaxError",
    "TransportError",
    "UnresolvedGoalError",
    "apply_swaps",
    "budget_check",
    "compute_stats",
    "evaluate_plan",
    "ingest",
    "ingest_path",
    "intervention_report",
    "is_equality_free",
    "locate_sorries",
    "parse_tactic",
    "parse_theory",
    "plan_split",
    "profile",
    "proof_size_report",
    "propose_swaps",
    "run_to_zero",
    "serialize",
    "structure_census",
    "tactic_census",
    "validate_skeleton",
]

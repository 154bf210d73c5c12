"""Per-step timing, slow-step detection, method-swap proposals and the build budget."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .backend import GoalId, ProverBackend, resolve, with_method
from .goals import goal_text_at
from .model import TheoryDocument

log = logging.getLogger(__name__)

DEFAULT_SLOW_THRESHOLD_MS = 2_000
DEFAULT_BUDGET_MS = 120_000
DEFAULT_CHECK_TIMEOUT_MS = 60_000


@dataclass(frozen=True)
class TimingEntry:
    goal: GoalId
    head: str
    elapsed_ms: int
    status: str = "proved"


@dataclass(frozen=True)
class TimingProfile:
    entries: tuple[TimingEntry, ...]
    total_ms: int
    slow: tuple[GoalId, ...]
    slow_threshold_ms: int = DEFAULT_SLOW_THRESHOLD_MS
    regressions: tuple[GoalId, ...] = ()
    skipped_sorries: int = 0

    def __post_init__(self) -> None:
        if self.total_ms != sum(e.elapsed_ms for e in self.entries):
            raise ValueError("total_ms must equal the sum of entry times")

    def entry(self, goal: GoalId) -> TimingEntry:
        for e in self.entries:
            if e.goal == goal:
                return e
        raise KeyError(str(goal))

    def to_dict(self, budget_ms: Optional[int] = None) -> dict:
        out = {
            "entries": [
                {
                    "goal": str(e.goal),
                    "method": e.head,
                    "ms": e.elapsed_ms,
                    "status": e.status,
                    "slow": e.goal in self.slow,
                }
                for e in self.entries
            ],
            "total_ms": self.total_ms,
            "slow": [str(g) for g in self.slow],
            "regressions": [str(g) for g in self.regressions],
            "skipped_sorries": self.skipped_sorries,
        }
        if budget_ms is not None:
            passed, margin = budget_check(self, budget_ms)
            out["budget_ms"] = budget_ms
            out["budget_pass"] = passed
            out["budget_margin_ms"] = margin
        return out


def _make_profile(entries: Sequence[TimingEntry], threshold: int, skipped: int = 0) -> TimingProfile:
    return TimingProfile(
        entries=tuple(entries),
        total_ms=sum(e.elapsed_ms for e in entries),
        slow=tuple(e.goal for e in entries if e.elapsed_ms > threshold),
        slow_threshold_ms=threshold,
        regressions=tuple(e.goal for e in entries if e.status != "proved"),
        skipped_sorries=skipped,
    )


def profile(
    documents: Iterable[TheoryDocument],
    backend: ProverBackend,
    timeout_ms: int = DEFAULT_CHECK_TIMEOUT_MS,
    slow_threshold_ms: int = DEFAULT_SLOW_THRESHOLD_MS,
    workers: int = 1,
) -> TimingProfile:
    """Time every closing method other than sorry; sorries are skipped with a warning.

    Checks that do not come back ``proved`` are listed as regressions.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = []
    skipped = 0
    for doc in documents:
        for block in doc.blocks:
            if block.proof is None:
                continue
            for path, step in block.proof.walk():
                if step.method is None:
                    continue
                if step.method.is_sorry:
                    skipped += 1
                    continue
                jobs.append((doc, GoalId(doc.name, block.name, path), step.method))
    if skipped:
        log.warning("profile skipped %d sorry placeholder(s)", skipped)

    def one(job) -> TimingEntry:
        doc, goal, method = job
        r = backend.check(doc, goal, method, timeout_ms)
        return TimingEntry(goal, method.head, r.elapsed_ms, r.status)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        entries = list(pool.map(one, jobs))
    return _make_profile(entries, slow_threshold_ms, skipped)


# equality detection: longest operator first, so "==>" is not read as "="
_EQ_TOKENS = ("\\<noteq>", "\\<longleftrightarrow>", "~=", "≠", "⟷", "<->", "=")
_NON_EQ = (
    "\\<Longrightarrow>",
    "\\<longrightarrow>",
    "\\<equiv>",
    "\\<le>",
    "\\<ge>",
    "<==>",
    "==>",
    "-->",
    "<=",
    ">=",
    "==",
    "=>",
    "≡",
)
_OPS = sorted(_EQ_TOKENS + _NON_EQ, key=len, reverse=True)
_OP_RE = re.compile("|".join(re.escape(op) for op in _OPS))


def is_equality_free(goal_text: str) -> bool:
    """Textual heuristic: no ``=``, ``≠`` or ``⟷`` token outside ``''...''`` strings.

    Operators are read greedily in one left-to-right pass, so ``==>``,
    ``-->``, ``<=`` and ``≡`` do not count as equalities.
    """
    if not goal_text.strip():
        raise ValueError("goal_text must be non-empty")
    text = re.sub(r"''.*?''", " ", goal_text, flags=re.DOTALL)
    for m in _OP_RE.finditer(text):
        if m.group() in _EQ_TOKENS:
            return False
    return True


@dataclass(frozen=True)
class SwapProposal:
    goal: GoalId
    from_head: str
    to_head: str
    verified: bool
    old_ms: int
    new_ms: Optional[int]

    @property
    def applicable(self) -> bool:
        return self.verified and self.new_ms is not None and self.new_ms < self.old_ms

    @property
    def speedup(self) -> Optional[float]:
        if not self.new_ms:
            return None
        return self.old_ms / self.new_ms

    def to_dict(self) -> dict:
        return {
            "goal": str(self.goal),
            "from": self.from_head,
            "to": self.to_head,
            "verified": self.verified,
            "old_ms": self.old_ms,
            "new_ms": self.new_ms,
        }


def _docs(documents: Iterable[TheoryDocument]) -> dict[str, TheoryDocument]:
    return {d.name: d for d in documents}


def propose_swaps(
    profile: TimingProfile,
    documents: Iterable[TheoryDocument],
    backend: ProverBackend,
    heads: Sequence[str] = ("metis",),
    target: str = "meson",
    timeout_ms: Optional[int] = None,
) -> list[SwapProposal]:
    """Propose ``target`` for each slow ``heads`` call on an equality-free goal.

    Each proposal is re-checked sequentially; the re-check timeout defaults
    to the old time, so a swap can only verify if it is no slower.
    """
    docs = _docs(documents)
    out = []
    for goal in profile.slow:
        entry = profile.entry(goal)
        if entry.head not in heads or entry.status != "proved":
            continue
        doc, block, step = resolve(docs, goal)
        if not is_equality_free(goal_text_at(block, goal.step_path)):
            continue
        new_method = step.method.with_head(target)
        r = backend.check(doc, goal, new_method, timeout_ms or max(entry.elapsed_ms, 1))
        out.append(
            SwapProposal(
                goal,
                entry.head,
                target,
                r.proved,
                entry.elapsed_ms,
                r.elapsed_ms if r.proved else None,
            )
        )
    return out


def apply_swaps(
    documents: Iterable[TheoryDocument], proposals: Iterable[SwapProposal]
) -> list[TheoryDocument]:
    """Rewrite methods for verified, strictly faster proposals only."""
    docs = _docs(documents)
    order = list(docs)
    for p in proposals:
        if not p.applicable:
            continue
        doc = docs[p.goal.file]
        _, _, step = resolve(doc, p.goal)
        if step.method.head != p.from_head:
            continue
        docs[doc.name] = with_method(doc, p.goal, step.method.with_head(p.to_head))
    return [docs[n] for n in order]


def budget_check(profile: TimingProfile, budget_ms: int = DEFAULT_BUDGET_MS) -> tuple[bool, int]:
    """Pass iff the total fits the budget (inclusive); margin is budget minus total."""
    if budget_ms <= 0:
        raise ValueError("budget_ms must be positive")
    margin = budget_ms - profile.total_ms
    return margin >= 0, margin


def format_profile(profile: TimingProfile, budget_ms: Optional[int] = None) -> str:
    rows = [("goal", "method", "ms", "slow?")]
    for e in profile.entries:
        mark = "slow" if e.goal in profile.slow else ""
        if e.status != "proved":
            mark = (mark + " " + e.status.upper()).strip()
        rows.append((str(e.goal), e.head, str(e.elapsed_ms), mark))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.append(f"total_ms {profile.total_ms}  slow {len(profile.slow)}")
    if budget_ms is not None:
        passed, margin = budget_check(profile, budget_ms)
        lines.append(f"budget {budget_ms} ms: {'pass' if passed else 'FAIL'} (margin {margin} ms)")
    return "\n".join(lines)


__all__ = [
    "DEFAULT_BUDGET_MS",
    "DEFAULT_SLOW_THRESHOLD_MS",
    "SwapProposal",
    "TimingEntry",
    "TimingProfile",
    "apply_swaps",
    "budget_check",
    "format_profile",
    "is_equality_free",
    "profile",
    "propose_swaps",
]

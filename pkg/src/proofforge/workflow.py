"""The sorry-first loop: skeleton checks, annotation, harvesting, substitution, decomposition.

A run keeps a :class:`WorkflowState` whose sites follow each placeholder
through its life: ``pending`` → ``annotated`` → ``suggested`` → ``resolved``,
with ``needs_decomposition`` for goals the hammer could not close. Documents
are values; every phase returns a new state.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .backend import (
    DEFAULT_HAMMER_TIMEOUT_MS,
    GoalId,
    ProverBackend,
    SuggestionRecord,
    TransportError,
    UnresolvedGoalError,
    rank_suggestions,
    resolve,
    with_method,
)
from .goals import assumption_facts, goal_text_at, normalize_goal, split_conjunction
from .model import SORRY, Block, ProofStep, ProofTree, StepPath, TacticCall, TheoryDocument, replace_step
from .parser import TheorySyntaxError, canonicalize, parse_theory, serialize

log = logging.getLogger(__name__)

SITE_STATUSES = ("pending", "annotated", "suggested", "resolved", "needs_decomposition")
ACTIVE_STATUSES = ("pending", "annotated", "suggested")
SKELETON_RULE = "new code may close steps only with sorry"

Decomposer = Callable[[str], Optional[Sequence[str]]]


@dataclass(frozen=True)
class SorrySite:
    goal: GoalId
    goal_text: str
    context_facts: tuple[str, ...] = ()
    status: str = "pending"
    suggestions: tuple[SuggestionRecord, ...] = ()
    assembly: bool = False

    def __post_init__(self) -> None:
        if self.status not in SITE_STATUSES:
            raise ValueError(f"unknown site status {self.status!r}")


@dataclass(frozen=True)
class SkeletonViolation:
    goal: GoalId
    offending_method: TacticCall
    rule_text: str = SKELETON_RULE

    def __post_init__(self) -> None:
        if self.offending_method.is_sorry:
            raise ValueError("sorry is never a violation")

    def describe(self) -> str:
        return f"{self.goal}: '{self.offending_method.raw_text}' ({self.rule_text})"


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    goal: GoalId
    action: str
    outcome: str


@dataclass(frozen=True)
class WorkflowState:
    documents: tuple[TheoryDocument, ...]
    sites: tuple[SorrySite, ...] = ()
    iteration: int = 0
    history: tuple[HistoryEntry, ...] = ()
    unresolved: frozenset[GoalId] = frozenset()
    violations: tuple[SkeletonViolation, ...] = ()
    check_ms: int = 0

    def document(self, name: str) -> TheoryDocument:
        for d in self.documents:
            if d.name == name:
                return d
        raise KeyError(name)

    def with_documents(self, docs: Mapping[str, TheoryDocument]) -> "WorkflowState":
        return replace(self, documents=tuple(docs.get(d.name, d) for d in self.documents))

    def log(self, goal: GoalId, action: str, outcome: str) -> "WorkflowState":
        return replace(self, history=self.history + (HistoryEntry(self.iteration, goal, action, outcome),))

    def by_status(self, *statuses: str) -> list[SorrySite]:
        return [s for s in self.sites if s.status in statuses]


@dataclass(frozen=True)
class WorkflowConfig:
    hammer_timeout_s: int = 10
    workers: int = 4
    max_iterations: int = 20

    def __post_init__(self) -> None:
        if self.hammer_timeout_s <= 0 or self.max_iterations <= 0 or self.workers < 1:
            raise ValueError("timeouts and iteration bounds must be positive, workers >= 1")

    @property
    def per_goal_timeout_ms(self) -> int:
        return self.hammer_timeout_s * 1000


@dataclass(frozen=True)
class RunReport:
    resolved: tuple[GoalId, ...]
    unresolved: tuple[tuple[GoalId, str], ...]
    iterations: int
    total_check_ms: int
    violations: tuple[SkeletonViolation, ...] = ()
    exhausted: bool = False

    @property
    def success(self) -> bool:
        return not self.unresolved

    def to_dict(self) -> dict:
        return {
            "resolved": [str(g) for g in self.resolved],
            "unresolved": [{"goal": str(g), "goal_text": t} for g, t in self.unresolved],
            "iterations": self.iterations,
            "total_check_ms": self.total_check_ms,
            "violations": [
                {"goal": str(v.goal), "method": v.offending_method.raw_text, "rule": v.rule_text}
                for v in self.violations
            ],
            "max_iterations_exhausted": self.exhausted,
        }


# skeleton discipline


def validate_skeleton(
    document: TheoryDocument, new_region: Optional[tuple[int, int]] = None
) -> list[SkeletonViolation]:
    """One violation per closing method other than sorry inside ``new_region``.

    A step belongs to the region when the line holding its method does;
    ``None`` checks the whole document. ``done`` counts as a method.
    """
    out = []
    for block in document.blocks:
        if block.proof is None:
            continue
        for path, step in block.proof.walk():
            if step.method is None or step.method.is_sorry:
                continue
            line = step.span[1]
            if new_region is not None and not (new_region[0] <= line <= new_region[1]):
                continue
            out.append(SkeletonViolation(GoalId(document.name, block.name, path), step.method))
    return out


# locating and annotating


def _context(block: Block, path: StepPath, step: ProofStep) -> tuple[str, ...]:
    facts = list(step.using_facts)
    for sib in block.proof.siblings_of(path)[: path[-1]]:
        if sib.label and sib.label not in facts:
            facts.append(sib.label)
    return tuple(facts)


def locate_sorries(documents: Iterable[TheoryDocument]) -> list[SorrySite]:
    sites = []
    for doc in documents:
        for block in doc.blocks:
            if block.proof is None:
                continue
            for path, step in block.proof.walk():
                if step.method is not None and step.method.is_sorry:
                    sites.append(
                        SorrySite(
                            GoalId(doc.name, block.name, path),
                            goal_text_at(block, path),
                            _context(block, path, step),
                        )
                    )
    return sites


def _map_step(
    document: TheoryDocument, goal: GoalId, fn: Callable[[ProofStep], ProofStep]
) -> TheoryDocument:
    _, block, step = resolve(document, goal)
    tree = replace_step(block.proof, goal.step_path, (fn(step),))
    idx = document.block_index(block.name)
    return replace(
        document, blocks=document.blocks[:idx] + (replace(block, proof=tree),) + document.blocks[idx + 1 :]
    )


def annotate_sorries(document: TheoryDocument, sites: Sequence[SorrySite], timeout_s: int) -> TheoryDocument:
    """Put a ``sledgehammer [timeout = N]`` line before each targeted sorry."""
    if timeout_s <= 0:
        raise ValueError("timeout_s must be positive")
    for site in sites:
        if site.goal.file != document.name:
            raise UnresolvedGoalError(f"{site.goal}: not in document {document.name!r}")
        _, _, step = resolve(document, site.goal)
        if not step.method.is_sorry:
            raise UnresolvedGoalError(f"{site.goal}: step is not a sorry")
        if step.hammer_timeout != timeout_s:
            document = _map_step(document, site.goal, lambda s: replace(s, hammer_timeout=timeout_s))
    return document


def annotate(state: WorkflowState, timeout_s: int) -> WorkflowState:
    pending = state.by_status("pending")
    if not pending:
        return state
    docs = {}
    for doc in state.documents:
        mine = [s for s in pending if s.goal.file == doc.name]
        if mine:
            docs[doc.name] = annotate_sorries(doc, mine, timeout_s)
    sites = tuple(replace(s, status="annotated") if s.status == "pending" else s for s in state.sites)
    state = replace(state.with_documents(docs), sites=sites)
    for s in pending:
        state = state.log(s.goal, "annotate", f"timeout={timeout_s}")
    return state


# harvesting and substitution


def harvest(
    state: WorkflowState,
    backend: ProverBackend,
    per_goal_timeout_ms: int = DEFAULT_HAMMER_TIMEOUT_MS,
    workers: int = 1,
) -> WorkflowState:
    """One hammer pass over every annotated site."""
    targets = state.by_status("annotated")
    if not targets:
        return state
    records = backend.hammer(
        list(state.documents), [s.goal for s in targets], per_goal_timeout_ms, workers
    )
    grouped: dict[GoalId, list[SuggestionRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.goal, []).append(rec)
    sites = []
    for s in state.sites:
        if s.status == "annotated":
            found = tuple(rank_suggestions(grouped.get(s.goal, ())))
            s = replace(s, suggestions=found, status="suggested" if found else "needs_decomposition")
        sites.append(s)
    state = replace(state, sites=tuple(sites))
    for s in targets:
        found = grouped.get(s.goal, [])
        outcome = ", ".join(f"{r.method_text}:{r.elapsed_ms}ms" for r in rank_suggestions(found))
        state = state.log(s.goal, "harvest", outcome or "no suggestions")
    return state


def substitute(
    state: WorkflowState, backend: ProverBackend, timeout_ms: int = DEFAULT_HAMMER_TIMEOUT_MS
) -> WorkflowState:
    """Re-check each suggested site's candidates fastest-first; keep the first that holds."""
    for site in state.by_status("suggested"):
        doc = state.document(site.goal.file)
        chosen = None
        for rec in site.suggestions:
            try:
                method = rec.method
            except TheorySyntaxError:
                state = state.log(site.goal, "recheck", f"{rec.method_text}: unparseable")
                continue
            result = backend.check(doc, site.goal, method, timeout_ms)
            state = replace(state, check_ms=state.check_ms + result.elapsed_ms)
            state = state.log(site.goal, "recheck", f"{method.raw_text}: {result.status}")
            if result.proved:
                chosen = method
                break
        if chosen is None:
            new_site = replace(site, status="needs_decomposition")
        else:
            new_doc = with_method(doc, site.goal, chosen)
            try:
                parse_theory(serialize(new_doc), new_doc.name)
            except TheorySyntaxError as exc:  # pragma: no cover - guarded by construction
                raise AssertionError(f"substitution broke {site.goal}: {exc}") from exc
            state = state.with_documents({doc.name: new_doc})
            new_site = replace(site, status="resolved")
            state = state.log(site.goal, "substitute", chosen.raw_text)
        state = replace(state, sites=tuple(new_site if s is site else s for s in state.sites))
    return state


# decomposition


class CommandDecomposer:
    """Runs an external command with the goal on stdin; each output line is a sub-goal.

    Empty output declines. A line starting with ``have``/``show``/``obtain``
    is taken as a proof step; anything else is a bare goal.
    """

    def __init__(self, command: str, timeout_s: float = 60.0):
        self.argv = shlex.split(command)
        self.timeout_s = timeout_s

    def __call__(self, goal_text: str) -> Optional[list[str]]:
        try:
            proc = subprocess.run(
                self.argv, input=goal_text + "\n", capture_output=True, text=True, timeout=self.timeout_s
            )
        except FileNotFoundError as exc:
            raise TransportError(f"decomposer not found: {self.argv[0]}", 127) from exc
        except subprocess.TimeoutExpired:
            return None
        if proc.returncode != 0:
            return None
        lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
        return lines or None


def _quote_goal(goal: str) -> str:
    return f"‹{goal}›" if '"' in goal else f'"{goal}"'


def _fresh(taken: set[str], base: str = "sub") -> str:
    n = 1
    while f"{base}{n}" in taken:
        n += 1
    name = f"{base}{n}"
    taken.add(name)
    return name


def _steps_from_lines(lines: Sequence[str]) -> list[ProofStep]:
    """Parse decomposer output into proof steps (raises TheorySyntaxError)."""
    body = []
    for ln in lines:
        first = ln.split(None, 1)[0] if ln.split() else ""
        if first in ("have", "show", "obtain"):
            body.append(ln)
        else:
            body.append(f"have {_quote_goal(ln)} sorry")
    text = "lemma decomposed: \"True\"\nproof -\n" + "\n".join(body) + "\nqed\n"
    doc = parse_theory(text, "Decomposer")
    return list(doc.blocks[0].proof.steps[0].children[:-1])


def _build_region(
    block: Block, goal_text: str, sub_lines: Optional[Sequence[str]], carry_using: tuple[str, ...]
) -> tuple[Optional[list[ProofStep]], list[TacticCall]]:
    """New proof-block children for a decomposition, plus any offending methods."""
    if sub_lines is None:
        return None, []
    steps = _steps_from_lines(sub_lines)
    bad = [s.method for s in steps if s.method is not None and not s.method.is_sorry]
    if bad:
        return None, bad
    if any(s.kind == "proof_block" for s in steps):
        return None, []
    taken = set(block.proof.labels()) | set(assumption_facts(block.statement_text))
    closing = steps.pop() if steps and steps[-1].kind == "show" else None
    subs = []
    for s in steps:
        if s.label is None:
            s = replace(s, label=_fresh(taken))
        elif s.label in taken:
            return None, []
        else:
            taken.add(s.label)
        subs.append(replace(s, hammer_timeout=None))
    if len(subs) < 2:
        return None, []
    target = normalize_goal(goal_text)
    if any(normalize_goal(s.goal_text or "") == target for s in subs):
        return None, []
    if closing is None:
        facts = carry_using + tuple(s.label for s in subs)
        closing = ProofStep("show", goal_text="?thesis", using_facts=facts, method=SORRY)
    return subs + [closing, ProofStep("qed")], []


def _shift(goal: GoalId, file: str, block: str, parent: StepPath, after: int) -> GoalId:
    p = goal.step_path
    d = len(parent)
    if goal.file == file and goal.block == block and len(p) > d and p[:d] == parent and p[d] > after:
        return replace(goal, step_path=p[:d] + (p[d] + 1,) + p[d + 1 :])
    return goal


def decompose(
    state: WorkflowState, site: SorrySite, decomposer: Optional[Decomposer] = None
) -> WorkflowState:
    """Replace a stuck placeholder by a proof block of finer sorry'd steps.

    Top-level conjunctions are split directly; otherwise ``decomposer`` is
    asked. A decline, or a site that is itself the assembly step of an
    earlier split, marks the site unresolved. Output that closes a step with
    anything but sorry is rejected and logged as a violation.
    """
    if site.status != "needs_decomposition":
        raise ValueError(f"{site.goal}: status {site.status}, expected needs_decomposition")
    doc = state.document(site.goal.file)
    _, block, step = resolve(doc, site.goal)

    def give_up(reason: str, bad: Sequence[TacticCall] = ()) -> WorkflowState:
        st = replace(
            state,
            unresolved=state.unresolved | {site.goal},
            violations=state.violations + tuple(SkeletonViolation(site.goal, m) for m in bad),
        )
        return st.log(site.goal, "decompose", reason)

    if site.assembly:
        return give_up("assembly step not re-decomposed")
    lines: Optional[Sequence[str]] = None
    if step.kind != "obtain":
        parts = split_conjunction(site.goal_text)
        if parts:
            lines = parts
    source = "conjunction"
    if lines is None and decomposer is not None:
        source = "decomposer"
        lines = decomposer(site.goal_text)
    if not lines:
        return give_up("declined")
    carry = step.using_facts if step.kind == "terminal" else ()
    try:
        children, bad = _build_region(block, site.goal_text, lines, carry)
    except TheorySyntaxError as exc:
        return give_up(f"unparseable decomposition: {exc}")
    if bad:
        log.warning("%s: decomposition rejected, %d non-sorry methods", site.goal, len(bad))
        return give_up("rejected: skeleton violation", bad)
    if children is None:
        return give_up("declined: fewer than two strictly smaller subgoals")

    path = site.goal.step_path
    new_block_step = ProofStep("proof_block", children=tuple(children), opener="-")
    parent, idx = path[:-1], path[-1]
    sites = list(state.sites)
    unresolved = set(state.unresolved)
    if step.kind == "terminal":
        tree = replace_step(block.proof, path, (new_block_step,))
        block_path = path
    else:
        opened = replace(step, method=None, hammer_timeout=None)
        tree = replace_step(block.proof, path, (opened, new_block_step))
        block_path = parent + (idx + 1,)
        shift = lambda g: _shift(g, doc.name, block.name, parent, idx)  # noqa: E731
        sites = [replace(s, goal=shift(s.goal)) for s in sites]
        unresolved = {shift(g) for g in unresolved}
    bi = doc.block_index(block.name)
    new_doc = replace(doc, blocks=doc.blocks[:bi] + (replace(block, proof=tree),) + doc.blocks[bi + 1 :])
    canon = canonicalize(new_doc)
    region = canon.block(block.name).proof.step_at(block_path).span
    assert not validate_skeleton(canon, region), "decomposed region must be a pure skeleton"

    new_block = canon.block(block.name)
    fresh = []
    for k, child in enumerate(children[:-1]):
        p = block_path + (k,)
        g = GoalId(doc.name, block.name, p)
        fresh.append(
            SorrySite(
                g,
                goal_text_at(new_block, p),
                _context(new_block, p, new_block.proof.step_at(p)),
                assembly=(k == len(children) - 2),
            )
        )
    sites = [s for s in sites if s.goal != site.goal or s.status != "needs_decomposition"]
    state = replace(
        state.with_documents({doc.name: canon}),
        sites=tuple(sites) + tuple(fresh),
        unresolved=frozenset(unresolved),
    )
    return state.log(site.goal, "decompose", f"{source}: {len(fresh) - 1} subgoals")


# the full loop


def initial_state(documents: Sequence[TheoryDocument]) -> WorkflowState:
    names = [d.name for d in documents]
    if len(set(names)) != len(names):
        raise ValueError("documents must have distinct names")
    return WorkflowState(tuple(documents), tuple(locate_sorries(documents)))


def run_to_zero(
    documents: Sequence[TheoryDocument],
    backend: ProverBackend,
    decomposer: Optional[Decomposer] = None,
    config: WorkflowConfig = WorkflowConfig(),
    observer: Optional[Callable[[str, WorkflowState], None]] = None,
) -> tuple[list[TheoryDocument], RunReport]:
    """Iterate annotate, harvest, substitute and decompose until nothing is active.

    ``observer(phase, state)`` is called after every phase for
    instrumentation. The report always names every goal left unproved,
    including those stranded by ``max_iterations``.
    """
    state = initial_state(documents)
    notify = observer or (lambda phase, st: None)
    notify("start", state)
    exhausted = False
    while state.by_status(*ACTIVE_STATUSES):
        if state.iteration >= config.max_iterations:
            exhausted = True
            break
        state = replace(state, iteration=state.iteration + 1)
        state = annotate(state, config.hammer_timeout_s)
        notify("annotate", state)
        state = harvest(state, backend, config.per_goal_timeout_ms, config.workers)
        notify("harvest", state)
        state = substitute(state, backend, config.per_goal_timeout_ms)
        notify("substitute", state)
        # decompositions shift sibling paths, so re-scan after each one
        while True:
            stuck = [
                s for s in state.by_status("needs_decomposition") if s.goal not in state.unresolved
            ]
            if not stuck:
                break
            state = decompose(state, stuck[0], decomposer)
            notify("decompose", state)

    resolved = tuple(sorted(s.goal for s in state.by_status("resolved")))
    left = {s.goal: s.goal_text for s in state.sites if s.status != "resolved"}
    report = RunReport(
        resolved=resolved,
        unresolved=tuple(sorted(left.items())),
        iterations=state.iteration,
        total_check_ms=state.check_ms,
        violations=state.violations,
        exhausted=exhausted,
    )
    return list(state.documents), report


__all__ = [
    "CommandDecomposer",
    "HistoryEntry",
    "RunReport",
    "SkeletonViolation",
    "SorrySite",
    "WorkflowConfig",
    "WorkflowState",
    "annotate",
    "annotate_sorries",
    "decompose",
    "harvest",
    "initial_state",
    "locate_sorries",
    "run_to_zero",
    "substitute",
    "validate_skeleton",
]

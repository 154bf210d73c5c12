"""Prover backends: the checking/suggestion interface and two implementations.

:class:`MockBackend` is driven by a fixture table and a simulated clock, so
whole pipelines run deterministically without a prover. :class:`ExternalBackend`
talks to a real toolchain through a small subprocess protocol: it writes one
temporary theory file, substitutes ``{file}``, ``{line}`` and ``{timeout}``
into a configured command, and scrapes ``Try this: <method> (<n> ms)`` lines.
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Mapping, Optional, Protocol, Sequence, Union

from .goals import fact_texts, goal_text_at, normalize_goal, split_conjunction
from .model import Block, ProofStep, TacticCall, TheoryDocument, replace_step
from .parser import TheorySyntaxError, canonicalize, parse_tactic, serialize

DEFAULT_HAMMER_TIMEOUT_MS = 10_000
DEFAULT_SUGGESTION_PATTERN = r"Try this:\s*(?P<method>.+?)\s*(?:\((?P<ms>\d+(?:\.\d+)?)\s*ms\))?\s*$"
PROVENANCES = ("hammer", "swap_rule", "manual")

Documents = Union[TheoryDocument, Sequence[TheoryDocument], Mapping[str, TheoryDocument]]


class UnresolvedGoalError(LookupError):
    """A GoalId does not name a checkable step."""


class TransportError(RuntimeError):
    def __init__(self, message: str, exit_status: Optional[int] = None):
        super().__init__(message)
        self.exit_status = exit_status


@dataclass(frozen=True, order=True)
class GoalId:
    file: str
    block: str
    step_path: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.file}#{self.block}#{'.'.join(map(str, self.step_path))}"

    @classmethod
    def parse(cls, text: str) -> "GoalId":
        try:
            file, block, path = text.rsplit("#", 2)
            steps = tuple(int(p) for p in path.split(".")) if path else ()
        except ValueError:
            raise ValueError(f"malformed goal id {text!r}") from None
        return cls(file, block, steps)


@dataclass(frozen=True)
class CheckResult:
    goal: GoalId
    status: str  # proved | failed | timeout
    method_tried: TacticCall
    elapsed_ms: int

    @property
    def proved(self) -> bool:
        return self.status == "proved"


@dataclass(frozen=True)
class SuggestionRecord:
    goal: GoalId
    method_text: str
    elapsed_ms: int
    provenance: str = "hammer"

    def __post_init__(self) -> None:
        if self.elapsed_ms < 0:
            raise ValueError("negative suggestion time")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def method(self) -> TacticCall:
        return parse_tactic(self.method_text)


def suggestion_sort_key(rec: SuggestionRecord):
    return (rec.goal, rec.elapsed_ms, len(rec.method_text), rec.method_text)


def rank_suggestions(records: Iterable[SuggestionRecord]) -> list[SuggestionRecord]:
    """Fastest first; ties go to the shorter, then lexicographically smaller text."""
    return sorted(records, key=suggestion_sort_key)


class ProverBackend(Protocol):
    def check(
        self, document: TheoryDocument, goal: GoalId, method: TacticCall, timeout_ms: int
    ) -> CheckResult: ...

    def hammer(
        self,
        documents: Documents,
        goals: Sequence[GoalId],
        per_goal_timeout_ms: int = DEFAULT_HAMMER_TIMEOUT_MS,
        workers: int = 1,
    ) -> list[SuggestionRecord]: ...


def _as_mapping(documents: Documents) -> dict[str, TheoryDocument]:
    if isinstance(documents, TheoryDocument):
        return {documents.name: documents}
    if isinstance(documents, Mapping):
        return dict(documents)
    return {d.name: d for d in documents}


def resolve(documents: Documents, goal: GoalId) -> tuple[TheoryDocument, Block, ProofStep]:
    """Find the step a GoalId names; raises UnresolvedGoalError otherwise."""
    docs = _as_mapping(documents)
    doc = docs.get(goal.file)
    if doc is None:
        raise UnresolvedGoalError(f"{goal}: no document named {goal.file!r}")
    try:
        block = doc.block(goal.block)
    except KeyError:
        raise UnresolvedGoalError(f"{goal}: no block {goal.block!r}") from None
    if block.proof is None:
        raise UnresolvedGoalError(f"{goal}: {goal.block} has no proof")
    try:
        step = block.proof.step_at(goal.step_path)
    except KeyError:
        raise UnresolvedGoalError(f"{goal}: step path does not resolve") from None
    if step.method is None:
        raise UnresolvedGoalError(f"{goal}: step has no method slot ({step.kind})")
    return doc, block, step


def with_method(document: TheoryDocument, goal: GoalId, method: TacticCall) -> TheoryDocument:
    """Copy of ``document`` with the step at ``goal`` closed by ``method``."""
    _, block, step = resolve(document, goal)
    new_step = replace(step, method=method, hammer_timeout=None)
    tree = replace_step(block.proof, goal.step_path, (new_step,))
    idx = document.block_index(block.name)
    blocks = document.blocks[:idx] + (replace(block, proof=tree),) + document.blocks[idx + 1 :]
    return replace(document, blocks=blocks)


def _check_timeout(timeout_ms: int) -> None:
    if timeout_ms <= 0:
        raise ValueError("timeout_ms must be positive")


@dataclass
class MockBackend:
    """Deterministic backend scripted by a ``(goal, method head) -> (verdict, ms)`` table.

    Unlisted pairs fail. ``sorry`` is always accepted at zero cost. With
    ``assemble_conjunctions`` on, ``blast`` also proves a conjunction whose
    conjuncts are all among the step's ``using`` facts; this is what closes
    the ``show`` that a conjunction split produces.

    ``suggestions`` optionally overrides what :meth:`hammer` offers per goal
    text (``[(method_text, ms), ...]``), which lets a test script stale hints.
    """

    table: Mapping[tuple[str, str], tuple[str, int]] = field(default_factory=dict)
    suggestions: Optional[Mapping[str, Sequence[tuple[str, int]]]] = None
    assemble_conjunctions: bool = True
    assembly_ms: int = 5
    fail_ms: int = 0
    check_calls: int = 0
    hammer_calls: int = 0
    clock_ms: int = 0

    def __post_init__(self) -> None:
        self.table = {(normalize_goal(g), h): v for (g, h), v in self.table.items()}
        if self.suggestions is not None:
            self.suggestions = {normalize_goal(g): list(v) for g, v in self.suggestions.items()}
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self.check_calls + self.hammer_calls

    def _assembles(self, block: Block, step: ProofStep, goal_text: str) -> bool:
        if not self.assemble_conjunctions or not step.using_facts:
            return False
        parts = split_conjunction(goal_text)
        if not parts:
            return False
        known = fact_texts(block)
        have = {normalize_goal(known[f]) for f in step.using_facts if f in known}
        return all(normalize_goal(p) in have for p in parts)

    def _verdict(self, block: Block, goal: GoalId, step: ProofStep, head: str) -> tuple[str, int]:
        text = normalize_goal(goal_text_at(block, goal.step_path))
        entry = self.table.get((text, head))
        if entry is not None:
            return entry
        if head == "blast" and self._assembles(block, step, text):
            return ("proved", self.assembly_ms)
        return ("failed", self.fail_ms)

    def check(
        self, document: TheoryDocument, goal: GoalId, method: TacticCall, timeout_ms: int
    ) -> CheckResult:
        _check_timeout(timeout_ms)
        if goal.file != document.name:
            raise UnresolvedGoalError(f"{goal}: document is {document.name!r}")
        _, block, step = resolve(document, goal)
        with self._lock:
            self.check_calls += 1
        if method.is_sorry:
            return CheckResult(goal, "proved", method, 0)
        verdict, cost = self._verdict(block, goal, step, method.head)
        if verdict == "proved" and cost > timeout_ms:
            status, elapsed = "timeout", timeout_ms
        else:
            status, elapsed = verdict, cost
        with self._lock:
            self.clock_ms += elapsed
        return CheckResult(goal, status, method, elapsed)

    def _offers(self, block: Block, goal: GoalId, step: ProofStep) -> list[tuple[str, int]]:
        text = normalize_goal(goal_text_at(block, goal.step_path))
        if self.suggestions is not None and text in self.suggestions:
            return list(self.suggestions[text])
        offers = [
            (f"by {head}", cost)
            for (g, head), (verdict, cost) in self.table.items()
            if g == text and verdict == "proved"
        ]
        if not offers and self._assembles(block, step, text):
            offers.append(("by blast", self.assembly_ms))
        return offers

    def hammer(
        self,
        documents: Documents,
        goals: Sequence[GoalId],
        per_goal_timeout_ms: int = DEFAULT_HAMMER_TIMEOUT_MS,
        workers: int = 1,
    ) -> list[SuggestionRecord]:
        _check_timeout(per_goal_timeout_ms)
        if workers < 1:
            raise ValueError("workers must be >= 1")
        docs = _as_mapping(documents)
        resolved = [(g, resolve(docs, g)) for g in goals]
        with self._lock:
            self.hammer_calls += 1

        def one(item) -> list[SuggestionRecord]:
            goal, (_, block, step) = item
            return [
                SuggestionRecord(goal, text, int(ms), "hammer")
                for text, ms in self._offers(block, goal, step)
                if ms <= per_goal_timeout_ms
            ]

        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(one, resolved))
        return rank_suggestions(r for batch in batches for r in batch)

    @classmethod
    def from_json(cls, data: Mapping) -> "MockBackend":
        """Build from ``{"entries": [{"goal", "method", "verdict", "ms"}], "suggestions": {...}}``."""
        table = {
            (e["goal"], e["method"]): (e.get("verdict", "proved"), int(e["ms"]))
            for e in data.get("entries", [])
        }
        sugg = data.get("suggestions")
        if sugg is not None:
            sugg = {g: [(s["method"], int(s["ms"])) for s in items] for g, items in sugg.items()}
        return cls(
            table,
            sugg,
            assemble_conjunctions=data.get("assemble_conjunctions", True),
            assembly_ms=int(data.get("assembly_ms", 5)),
        )


class ExternalBackend:
    """Adapter to an external prover toolchain via subprocesses.

    ``hammer_command`` and ``check_command`` are command templates; the
    placeholders ``{file}``, ``{line}`` and ``{timeout}`` (seconds) are
    substituted per argument after shell-style splitting. A check passes iff
    the command exits 0 within the timeout.
    """

    def __init__(
        self,
        hammer_command: Optional[str] = None,
        check_command: Optional[str] = None,
        pattern: str = DEFAULT_SUGGESTION_PATTERN,
        slack_s: float = 5.0,
    ):
        self.hammer_command = hammer_command
        self.check_command = check_command
        self.pattern = re.compile(pattern)
        self.slack_s = slack_s

    def _argv(self, template: str, file: Path, line: int, timeout_s: int) -> list[str]:
        subs = {"{file}": str(file), "{line}": str(line), "{timeout}": str(timeout_s)}
        out = []
        for arg in shlex.split(template):
            for k, v in subs.items():
                arg = arg.replace(k, v)
            out.append(arg)
        return out

    def _run(self, argv: list[str], timeout_s: float) -> Optional[subprocess.CompletedProcess]:
        try:
            return subprocess.run(argv, capture_output=True, text=True, timeout=timeout_s)
        except FileNotFoundError as exc:
            raise TransportError(f"backend command not found: {argv[0]}", 127) from exc
        except PermissionError as exc:
            raise TransportError(f"backend command not executable: {argv[0]}", 126) from exc
        except subprocess.TimeoutExpired:
            return None

    @staticmethod
    def _write(document: TheoryDocument, tmp: Path) -> tuple[Path, TheoryDocument]:
        canon = canonicalize(document)
        path = tmp / f"{document.name or 'Scratch'}.thy"
        path.write_text(serialize(canon), encoding="utf-8")
        return path, canon

    def check(
        self, document: TheoryDocument, goal: GoalId, method: TacticCall, timeout_ms: int
    ) -> CheckResult:
        _check_timeout(timeout_ms)
        if self.check_command is None:
            raise TransportError("no check command configured")
        trial = with_method(document, goal, method)
        with tempfile.TemporaryDirectory(prefix="proofforge-") as tmp:
            path, canon = self._write(trial, Path(tmp))
            line = resolve(canon, goal)[2].span[1]
            timeout_s = max(1, -(-timeout_ms // 1000))
            argv = self._argv(self.check_command, path, line, timeout_s)
            t0 = time.perf_counter()
            proc = self._run(argv, timeout_ms / 1000)
            elapsed = int(round((time.perf_counter() - t0) * 1000))
        if proc is None:
            return CheckResult(goal, "timeout", method, max(elapsed, timeout_ms))
        return CheckResult(goal, "proved" if proc.returncode == 0 else "failed", method, elapsed)

    def parse_suggestions(self, goal: GoalId, output: str, fallback_ms: int) -> list[SuggestionRecord]:
        """Scrape suggestion lines; lines whose method does not parse are skipped."""
        out = []
        for line in output.splitlines():
            m = self.pattern.search(line)
            if m is None:
                continue
            text = m.group("method").strip()
            try:
                call = parse_tactic(text)
            except TheorySyntaxError:
                continue
            ms = m.groupdict().get("ms")
            elapsed = int(round(float(ms))) if ms else fallback_ms
            out.append(SuggestionRecord(goal, call.raw_text, elapsed, "hammer"))
        return out

    def hammer(
        self,
        documents: Documents,
        goals: Sequence[GoalId],
        per_goal_timeout_ms: int = DEFAULT_HAMMER_TIMEOUT_MS,
        workers: int = 1,
    ) -> list[SuggestionRecord]:
        _check_timeout(per_goal_timeout_ms)
        if workers < 1:
            raise ValueError("workers must be >= 1")
        if self.hammer_command is None:
            raise TransportError("no hammer command configured")
        if not goals:
            return []
        docs = _as_mapping(documents)
        for g in goals:
            resolve(docs, g)
        timeout_s = max(1, -(-per_goal_timeout_ms // 1000))
        with tempfile.TemporaryDirectory(prefix="proofforge-") as tmp:
            written = {}
            for name in sorted({g.file for g in goals}):
                written[name] = self._write(docs[name], Path(tmp))

            def one(goal: GoalId) -> list[SuggestionRecord]:
                path, canon = written[goal.file]
                line = resolve(canon, goal)[2].span[1]
                argv = self._argv(self.hammer_command, path, line, timeout_s)
                t0 = time.perf_counter()
                proc = self._run(argv, per_goal_timeout_ms / 1000 + self.slack_s)
                elapsed = int(round((time.perf_counter() - t0) * 1000))
                if proc is None:
                    return []
                if proc.returncode != 0:
                    raise TransportError(
                        f"backend exited with status {proc.returncode}: {proc.stderr.strip()}",
                        proc.returncode,
                    )
                return self.parse_suggestions(goal, proc.stdout, elapsed)

            with ThreadPoolExecutor(max_workers=workers) as pool:
                batches = list(pool.map(one, goals))
        return rank_suggestions(r for batch in batches for r in batch)


# suggestion interchange: one JSON object per line


def suggestion_to_json(rec: SuggestionRecord) -> str:
    return json.dumps(
        {"goal": str(rec.goal), "method": rec.method_text, "ms": rec.elapsed_ms, "prov": rec.provenance},
        ensure_ascii=False,
    )


def write_suggestions(records: Iterable[SuggestionRecord], fp: IO[str]) -> None:
    for rec in records:
        fp.write(suggestion_to_json(rec) + "\n")


def read_suggestions(lines: Iterable[str]) -> list[SuggestionRecord]:
    out = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            rec = SuggestionRecord(
                GoalId.parse(obj["goal"]), obj["method"], int(obj["ms"]), obj.get("prov", "hammer")
            )
            parse_tactic(rec.method_text)
        except (ValueError, KeyError, TypeError, TheorySyntaxError) as exc:
            raise ValueError(f"suggestion line {n}: {exc}") from None
        out.append(rec)
    return out


__all__ = [
    "CheckResult",
    "DEFAULT_HAMMER_TIMEOUT_MS",
    "ExternalBackend",
    "GoalId",
    "MockBackend",
    "ProverBackend",
    "SuggestionRecord",
    "TransportError",
    "UnresolvedGoalError",
    "rank_suggestions",
    "read_suggestions",
    "resolve",
    "suggestion_to_json",
    "with_method",
    "write_suggestions",
]

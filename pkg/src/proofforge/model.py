"""Domain types for the supported structured-proof subset.

Everything here is a frozen dataclass: documents are values, and every
transformation (annotation, substitution, decomposition) builds a new one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterator, Optional

Span = tuple[int, int]
StepPath = tuple[int, ...]

BLOCK_KINDS = ("definition", "lemma", "theorem", "corollary")
RESULT_KINDS = ("lemma", "theorem", "corollary")
STEP_KINDS = ("have", "show", "obtain", "proof_block", "qed", "terminal")
GOAL_STEP_KINDS = ("have", "show", "obtain")

# method heads with their own census category; everything else is "other"
KNOWN_HEADS = (
    "sorry",
    "blast",
    "simp",
    "auto",
    "metis",
    "meson",
    "fast",
    "linarith",
    "presburger",
    "rule",
    "smt",
)
CENSUS_CATEGORIES = KNOWN_HEADS + ("other",)

_ANNOTATION_RE = re.compile(
    r"^\(\*\*\s+from\s+(?:§|\\<section>)\s*(\d+)\s+(.+?)\s+\[([^\[\]]+):(\d+)\]\s+\*\*\)$",
    re.DOTALL,
)


@dataclass(frozen=True)
class SourceAnnotation:
    """Provenance comment tying a block to a numbered textbook result."""

    section: int
    result_label: str
    source_file: str
    source_line: int

    def render(self) -> str:
        return (
            f"(** from §{self.section} {self.result_label} "
            f"[{self.source_file}:{self.source_line}] **)"
        )

    @classmethod
    def from_comment(cls, text: str) -> Optional["SourceAnnotation"]:
        """Parse a ``(** from §N label [file:line] **)`` comment, or return None."""
        m = _ANNOTATION_RE.match(text.strip())
        if m is None:
            return None
        label = " ".join(m.group(2).split())
        return cls(int(m.group(1)), label, m.group(3).strip(), int(m.group(4)))


@dataclass(frozen=True)
class TacticCall:
    """One closing proof method, e.g. ``unfolding foo_def by (simp add: bar)``.

    ``head`` is the literal method name. Names outside :data:`KNOWN_HEADS`
    (``force``, ``done``, ...) are kept verbatim and counted as ``other``.
    ``raw_text`` is the canonical source form and re-parses to an equal call.
    """

    head: str
    arguments: tuple[str, ...] = ()
    unfolding_facts: tuple[str, ...] = ()
    raw_text: str = ""

    def __post_init__(self) -> None:
        if self.head == "sorry" and (self.arguments or self.unfolding_facts):
            raise ValueError("sorry takes no arguments or unfolding facts")
        if not self.raw_text:
            object.__setattr__(self, "raw_text", render_tactic(self))

    @property
    def category(self) -> str:
        return self.head if self.head in KNOWN_HEADS else "other"

    @property
    def is_sorry(self) -> bool:
        return self.head == "sorry"

    def with_head(self, head: str) -> "TacticCall":
        """Same call with a different method name (arguments kept)."""
        return make_tactic(head, self.arguments, self.unfolding_facts)


def make_tactic(
    head: str, arguments: tuple[str, ...] = (), unfolding_facts: tuple[str, ...] = ()
) -> TacticCall:
    return TacticCall(head, tuple(arguments), tuple(unfolding_facts))


def render_tactic(call: TacticCall) -> str:
    prefix = ""
    if call.unfolding_facts:
        prefix = "unfolding " + " ".join(call.unfolding_facts) + " "
    if call.head in ("sorry", "done") and not call.arguments:
        return prefix + call.head
    if call.arguments == ("+",) or call.arguments == ("?",):
        return f"{prefix}by {call.head}{call.arguments[0]}"
    if call.arguments:
        return f"{prefix}by ({call.head} {' '.join(call.arguments)})"
    return f"{prefix}by {call.head}"


SORRY = make_tactic("sorry")


@dataclass(frozen=True)
class ProofStep:
    """A node of a structured proof.

    A goal step (have/show/obtain) either carries ``method`` or is followed,
    as its next sibling, by the ``proof_block`` that proves it.
    """

    kind: str
    label: Optional[str] = None
    goal_text: Optional[str] = None
    using_facts: tuple[str, ...] = ()
    method: Optional[TacticCall] = None
    children: tuple["ProofStep", ...] = ()
    span: Span = (0, 0)
    variables: tuple[str, ...] = ()
    hammer_timeout: Optional[int] = None
    opener: str = "-"

    def __post_init__(self) -> None:
        if self.kind not in STEP_KINDS:
            raise ValueError(f"unknown step kind {self.kind!r}")
        if self.kind == "proof_block":
            if self.method is not None:
                raise ValueError("proof block carries no method")
            if not self.children or self.children[-1].kind != "qed":
                raise ValueError("proof block must be non-empty and end in qed")
        elif self.children:
            raise ValueError(f"{self.kind} step cannot have children")
        if self.kind in ("have", "show") and self.goal_text is None:
            raise ValueError(f"{self.kind} step needs a goal")
        if self.kind in ("terminal",) and self.method is None:
            raise ValueError("terminal step needs a method")


@dataclass(frozen=True)
class ProofTree:
    steps: tuple[ProofStep, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("empty proof")

    @property
    def span(self) -> Span:
        return (self.steps[0].span[0], self.steps[-1].span[1])

    def walk(self) -> Iterator[tuple[StepPath, ProofStep]]:
        """Depth-first, document-order traversal yielding (path, step)."""

        def rec(steps: tuple[ProofStep, ...], prefix: StepPath):
            for i, step in enumerate(steps):
                path = prefix + (i,)
                yield path, step
                if step.children:
                    yield from rec(step.children, path)

        yield from rec(self.steps, ())

    def step_at(self, path: StepPath) -> ProofStep:
        if not path:
            raise KeyError("empty step path")
        steps = self.steps
        step = None
        for idx in path:
            if idx < 0 or idx >= len(steps):
                raise KeyError(f"step path {path} does not resolve")
            step = steps[idx]
            steps = step.children
        return step

    def siblings_of(self, path: StepPath) -> tuple[ProofStep, ...]:
        if len(path) == 1:
            return self.steps
        return self.step_at(path[:-1]).children

    def labels(self) -> list[str]:
        return [s.label for _, s in self.walk() if s.label]


@dataclass(frozen=True)
class Block:
    kind: str
    name: str
    statement_text: str
    proof: Optional[ProofTree] = None
    annotation: Optional[SourceAnnotation] = None
    span: Span = (0, 0)

    def __post_init__(self) -> None:
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.kind == "definition" and self.proof is not None:
            raise ValueError("definitions have no proof")
        if self.kind != "definition" and self.proof is None:
            raise ValueError(f"{self.kind} {self.name} has no proof")
        if self.span[0] > self.span[1]:
            raise ValueError("block span is inverted")

    @property
    def is_result(self) -> bool:
        return self.kind in RESULT_KINDS

    @property
    def extent(self) -> int:
        return self.span[1] - self.span[0] + 1

    @property
    def conclusion_text(self) -> str:
        """Goal text a top-level terminal step proves.

        A statement that is a single quoted proposition yields the
        proposition; anything structured (assumes/shows) is used verbatim.
        """
        text = self.statement_text.strip()
        for open_q, close_q in (('"', '"'), ("‹", "›")):
            if (
                len(text) >= 2
                and text.startswith(open_q)
                and text.endswith(close_q)
                and close_q not in text[1:-1]
                and (open_q == close_q or open_q not in text[1:-1])
            ):
                return text[1:-1]
        return text


@dataclass(frozen=True)
class TheoryDocument:
    name: str
    imports: tuple[str, ...] = ()
    blocks: tuple[Block, ...] = ()
    raw_line_count: int = 0
    header: bool = True

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(f"no block {name!r} in {self.name!r}")

    def block_index(self, name: str) -> int:
        for i, b in enumerate(self.blocks):
            if b.name == name:
                return i
        raise KeyError(f"no block {name!r} in {self.name!r}")

    def tactic_calls(self) -> Iterator[TacticCall]:
        for b in self.blocks:
            if b.proof is None:
                continue
            for _, step in b.proof.walk():
                if step.method is not None:
                    yield step.method


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    severity: str = "error"

    def format(self, source: str = "<input>") -> str:
        return f"{source}:{self.line}:{self.column}: {self.severity}: {self.message}"


def replace_step(tree: ProofTree, path: StepPath, new: tuple[ProofStep, ...]) -> ProofTree:
    """Replace the step at ``path`` with zero or more steps."""

    def rec(steps: tuple[ProofStep, ...], rest: StepPath) -> tuple[ProofStep, ...]:
        i = rest[0]
        if len(rest) == 1:
            return steps[:i] + new + steps[i + 1 :]
        parent = steps[i]
        updated = replace(parent, children=rec(parent.children, rest[1:]))
        return steps[:i] + (updated,) + steps[i + 1 :]

    return ProofTree(rec(tree.steps, path))


__all__ = [
    "BLOCK_KINDS",
    "Block",
    "CENSUS_CATEGORIES",
    "GOAL_STEP_KINDS",
    "KNOWN_HEADS",
    "ParseDiagnostic",
    "ProofStep",
    "ProofTree",
    "RESULT_KINDS",
    "SORRY",
    "STEP_KINDS",
    "SourceAnnotation",
    "Span",
    "StepPath",
    "TacticCall",
    "TheoryDocument",
    "make_tactic",
    "render_tactic",
    "replace_step",
]

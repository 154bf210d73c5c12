"""Textual helpers over opaque goal strings.

Goals are never parsed into terms. These helpers do the minimum of lexical
work needed by decomposition and the mock backend: whitespace
normalisation, top-level conjunction splitting, and assumption lookup.
"""

from __future__ import annotations

import re
from typing import Optional

from .model import Block, ProofTree, StepPath

_CONJ = ("∧", "\\<and>", "&")
_LOW = (
    "∨",
    "\\<or>",
    "|",
    "⟶",
    "\\<longrightarrow>",
    "-->",
    "⟷",
    "\\<longleftrightarrow>",
    "<->",
    "⟹",
    "\\<Longrightarrow>",
    "==>",
    "≡",
    "\\<equiv>",
)
_BINDERS = ("∀", "∃", "λ", "⋀", "\\<forall>", "\\<exists>", "\\<lambda>", "\\<And>")
_BINDER_WORDS = frozenset({"ALL", "EX", "SOME", "THE", "if", "let", "case", "LEAST"})
_OPEN, _CLOSE = "([{", ")]}"
_ASSUMPTION_RE = re.compile(r"""([A-Za-z_][A-Za-z0-9_']*)\s*:\s*(?:"([^"]*)"|‹([^›]*)›)""")


def normalize_goal(text: str) -> str:
    return " ".join(text.split())


def _strip_parens(text: str) -> str:
    while text.startswith("(") and text.endswith(")"):
        depth = 0
        for i, ch in enumerate(text):
            if ch in _OPEN:
                depth += 1
            elif ch in _CLOSE:
                depth -= 1
                if depth == 0 and i != len(text) - 1:
                    return text
        text = text[1:-1].strip()
    return text


def _match_at(text: str, i: int, options: tuple[str, ...]) -> Optional[str]:
    for op in sorted(options, key=len, reverse=True):
        if text.startswith(op, i):
            return op
    return None


def split_conjunction(goal_text: str) -> Optional[list[str]]:
    """Split a goal at its top-level conjunctions, or return None.

    HOL precedence is respected lexically: a disjunction, implication or
    equivalence at bracket depth 0 means the top-level operator is not a
    conjunction, and a binder (``∀``, ``λ``, ``if`` ...) swallows everything
    to its right into the last conjunct.
    """
    text = _strip_parens(normalize_goal(goal_text))
    parts: list[str] = []
    depth = 0
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if text.startswith("''", i):
            j = text.find("''", i + 2)
            i = n if j < 0 else j + 2
            continue
        if ch in _OPEN:
            depth += 1
        elif ch in _CLOSE:
            depth -= 1
        elif depth == 0:
            if _match_at(text, i, _BINDERS):
                break
            m = re.match(r"[A-Za-z]+\b", text[i:])
            if m and (i == 0 or not (text[i - 1].isalnum() or text[i - 1] == "_")):
                if m.group() in _BINDER_WORDS:
                    break
                i += m.end()
                continue
            low = _match_at(text, i, _LOW)
            if low and not (low == "|" and text.startswith("||", i)):
                return None
            conj = _match_at(text, i, _CONJ)
            if conj and not (conj == "&" and text.startswith("&&", i)):
                parts.append(text[start:i].strip())
                i += len(conj)
                start = i
                continue
        i += 1
    if not parts:
        return None
    parts.append(text[start:].strip())
    if any(not p for p in parts):
        return None
    return [_strip_parens(p) for p in parts]


def assumption_facts(statement_text: str) -> dict[str, str]:
    """Map ``name: "prop"`` labels found in a statement to their propositions."""
    out = {}
    for m in _ASSUMPTION_RE.finditer(statement_text):
        out[m.group(1)] = m.group(2) if m.group(2) is not None else m.group(3)
    return out


def goal_text_at(block: Block, path: StepPath) -> str:
    """The proposition the step at ``path`` must establish.

    Terminal steps prove the block statement; ``?thesis`` refers to the goal
    the enclosing proof block was opened for.
    """
    tree = block.proof
    step = tree.step_at(path)
    if step.goal_text is not None and step.goal_text != "?thesis":
        return step.goal_text
    if step.kind == "terminal" or len(path) == 1:
        return block.conclusion_text
    return _enclosing_goal(block, tree, path[:-1])


def _enclosing_goal(block: Block, tree: ProofTree, block_path: StepPath) -> str:
    if len(block_path) == 1:
        return block.conclusion_text
    owner = block_path[:-1] + (block_path[-1] - 1,)
    return goal_text_at(block, owner)


def fact_texts(block: Block) -> dict[str, str]:
    """Every named fact visible in a block: assumptions plus step labels."""
    facts = assumption_facts(block.statement_text)
    if block.proof is not None:
        for path, step in block.proof.walk():
            if step.label:
                facts[step.label] = goal_text_at(block, path)
    return facts


__all__ = [
    "assumption_facts",
    "fact_texts",
    "goal_text_at",
    "normalize_goal",
    "split_conjunction",
]
